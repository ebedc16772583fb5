#pragma once

#include <cstdint>
#include <random>

namespace spacon {

/// splitmix64 step; used to derive independent seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic per-stream generator: stream i of a seeded study gets its
/// own RNG so serial and parallel replicate loops produce identical draws.
inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed ^ (0x5851f42d4c957f2dULL * (stream + 1));
    std::uint64_t a = splitmix64(s);
    std::uint64_t b = splitmix64(s);
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace spacon
