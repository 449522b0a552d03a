#pragma once

#include <cstdint>
#include <random>

namespace spinmux::rng {

// splitmix64; used to derive independent stream seeds from (seed, shot, purpose).
inline std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic per-shot stream, independent of evaluation order across shots.
inline std::mt19937_64 shot_stream(std::uint64_t seed, std::uint64_t shot,
                                   std::uint64_t purpose) {
    return std::mt19937_64(mix(mix(mix(seed) ^ shot) ^ (purpose << 32 | purpose)));
}

inline double uniform(std::mt19937_64& gen) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(gen);
}

inline int poisson(std::mt19937_64& gen, double mean) {
    if (mean <= 0.0) return 0;
    return std::poisson_distribution<int>(mean)(gen);
}

}  // namespace spinmux::rng
