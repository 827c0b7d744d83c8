#pragma once

#include <cmath>
#include <cstdint>

namespace airnet {

// Deterministic generator for synthetic scenarios and seeded tests.
// splitmix64 keeps dataset bytes stable across standard-library versions,
// which <random> distributions do not guarantee.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    std::uint64_t below(std::uint64_t bound) { return next_u64() % bound; }

    // standard normal via Box-Muller; second deviate cached
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * next_double() - 1.0;
            v = 2.0 * next_double() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double mul = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * mul;
        have_spare_ = true;
        return u * mul;
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace airnet
