#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace afex {

/// Deterministic random stream. mt19937_64 output is fully specified by the
/// standard; the uniform/normal mappings are done here by hand because the
/// std distribution objects are allowed to differ between standard library
/// implementations, which would break byte-stable checkpoints.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; one cached value per pair.
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * M_PI * u2;
        cached_ = r * std::sin(theta);
        have_cached_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    std::uint64_t next_raw() { return engine_(); }

    /// Derive an independent stream (used to give each compared method its
    /// own reproducible sequence).
    Rng fork(std::uint64_t salt) {
        return Rng(engine_() ^ (0x9e3779b97f4a7c15ULL * (salt + 1)));
    }

private:
    std::mt19937_64 engine_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace afex
