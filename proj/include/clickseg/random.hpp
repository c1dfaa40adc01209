#pragma once

#include <cstdint>
#include <random>

namespace clickseg {

using Rng = std::mt19937_64;

/// Mixes a base seed with stream coordinates (epoch, sample index, ...) into an independent seed.
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) noexcept {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(base) ^ a) ^ b);
}

/// Uniform integer in [lo, hi].
template <typename Int>
[[nodiscard]] Int uniform_int(Rng& rng, Int lo, Int hi) {
    return std::uniform_int_distribution<Int>(lo, hi)(rng);
}

/// Uniform real in [lo, hi).
[[nodiscard]] inline double uniform_real(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

[[nodiscard]] inline bool bernoulli(Rng& rng, double p) {
    return uniform_real(rng, 0.0, 1.0) < p;
}

}  // namespace clickseg
