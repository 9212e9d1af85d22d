#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fbq {

/// Seeded random stream. Uniforms are built from raw 64-bit engine output so
/// sequences are bit-identical across standard library implementations.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    /// Independent stream for replication `index` of a run seeded with `seed`.
    static RngStream derive(std::uint64_t seed, std::uint64_t index) {
        return RngStream(splitmix64(splitmix64(seed) ^ (0x9E3779B97F4A7C15ULL * (index + 1))));
    }

    std::uint64_t bits() { return engine_(); }

    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

    double exponential(double rate) { return -std::log(uniform()) / rate; }

    double normal() {
        // Marsaglia polar method; no cached spare so state is a pure function of draws.
        for (;;) {
            const double u = 2.0 * uniform() - 1.0;
            const double v = 2.0 * uniform() - 1.0;
            const double s = u * u + v * v;
            if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
        }
    }

    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace fbq
