#pragma once

#include <stdexcept>
#include <string>

namespace airnet {

// Thrown when an input file does not conform to its documented schema.
// Carries enough context (file, row/offset) to locate the bad record.
class InputFormatError : public std::runtime_error {
public:
    explicit InputFormatError(const std::string& what) : std::runtime_error(what) {}
};

// Configuration file problems: unknown keys, missing sections, bad windows.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical degeneracy: rank-deficient regression design, empty model set.
class FitError : public std::runtime_error {
public:
    explicit FitError(const std::string& what) : std::runtime_error(what) {}
};

// Violated call contract (e.g. aligning series of different window lengths).
class PreconditionError : public std::logic_error {
public:
    explicit PreconditionError(const std::string& what) : std::logic_error(what) {}
};

} // namespace airnet
