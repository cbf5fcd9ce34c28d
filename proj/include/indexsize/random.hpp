#pragma once

// Portable keyed randomness. std::mt19937_64's output sequence is fixed by
// the standard but the std distributions are not, so every draw that feeds a
// reproducible artifact goes through the helpers below.

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace indexsize {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b) noexcept {
    return splitmix64(a ^ splitmix64(b));
}

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit word.
constexpr double to_unit(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Uniform [0,1) value that depends only on the key, never on call order.
inline double keyed_uniform(std::uint64_t seed, std::uint64_t key, std::uint64_t salt = 0) noexcept {
    return to_unit(mix_keys(mix_keys(seed, key), salt));
}

/// Standard normal from a key (Box-Muller on two keyed uniforms).
inline double keyed_normal(std::uint64_t seed, std::uint64_t key, std::uint64_t salt = 0) noexcept {
    double u1 = keyed_uniform(seed, key, salt * 2 + 1);
    double u2 = keyed_uniform(seed, key, salt * 2 + 2);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

/// Sequential generator with distribution code that is identical on every
/// standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return to_unit(engine_()); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        // Rejection keeps the draw exactly uniform.
        const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    /// Poisson draw; Knuth's product method, adequate for the small means used
    /// for citation out-degree.
    std::uint32_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean > 60.0) {
            double u1 = uniform();
            if (u1 <= 0.0) u1 = 0x1.0p-53;
            double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * uniform());
            double v = std::round(mean + std::sqrt(mean) * z);
            return v < 0 ? 0u : static_cast<std::uint32_t>(v);
        }
        const double limit = std::exp(-mean);
        std::uint32_t k = 0;
        double p = uniform();
        while (p > limit) {
            ++k;
            p *= uniform();
        }
        return k;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace indexsize
