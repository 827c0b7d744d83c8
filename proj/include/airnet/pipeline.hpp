#pragma once

#include "airnet/config.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace airnet::pipeline {

// A stage failure names the stage and keeps the cause; the CLI maps
// exit_code to the documented process exit codes.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what, int exit_code)
        : std::runtime_error("stage '" + stage + "': " + what),
          stage_(std::move(stage)),
          exit_code_(exit_code) {}

    const std::string& stage() const { return stage_; }
    int exit_code() const { return exit_code_; }

private:
    std::string stage_;
    int exit_code_;
};

struct StageResult {
    std::string name;
    std::map<std::string, std::int64_t> counters; // ordered => deterministic manifests
    std::vector<std::filesystem::path> outputs;
};

// Each stage reads only files written by its predecessor, so any stage can
// be re-run alone. On failure every file the stage created is removed.
StageResult run_ingest(const cfg::RunConfig& rc, const std::filesystem::path& input_dir,
                       const std::filesystem::path& out_dir);
StageResult run_calibrate(const cfg::RunConfig& rc, const std::filesystem::path& stage_dir,
                          const std::filesystem::path& out_dir);
StageResult run_analyze(const cfg::RunConfig& rc, const std::filesystem::path& stage_dir,
                        const std::filesystem::path& out_dir);
StageResult run_attribute(const cfg::RunConfig& rc, const std::filesystem::path& stage_dir,
                          const std::filesystem::path& out_dir);
StageResult run_report(const cfg::RunConfig& rc, const std::filesystem::path& stage_dir,
                       const std::filesystem::path& out_dir);

// ingest -> calibrate -> analyze -> attribute (when a personal node is
// configured) -> report, with a manifest covering stage versions, the config
// hash, counters and output-file hashes. Identical inputs produce an
// identical manifest.
nlohmann::json run_pipeline(const cfg::RunConfig& rc, const std::filesystem::path& input_dir,
                            const std::filesystem::path& out_dir);

} // namespace airnet::pipeline
