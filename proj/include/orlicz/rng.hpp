#pragma once

#include <cstdint>
#include <cmath>

namespace orlicz {

/// Deterministic 64-bit generator (splitmix64).
///
/// Stream contract, so that any language can reproduce the corpora:
///   state <- state + 0x9E3779B97F4A7C15  (wrapping)
///   z <- state
///   z <- (z xor (z >> 30)) * 0xBF58476D1CE4E5B9
///   z <- (z xor (z >> 27)) * 0x94D049BB133111EB
///   output = z xor (z >> 31)
/// uniform01() maps the top 53 bits to [0,1): (output >> 11) * 2^-53.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0,1).
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform in [a,b).
    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    /// Log-uniform in [a,b], a,b > 0.
    double log_uniform(double a, double b) {
        return std::exp(uniform(std::log(a), std::log(b)));
    }

    /// Standard normal via Box-Muller (consumes two draws).
    double normal() {
        double u1 = uniform01(), u2 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    std::uint64_t state_;
};

} // namespace orlicz
