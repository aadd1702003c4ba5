#pragma once

#include <cstdint>
#include <random>

namespace cslidar {

// Mixes a 64-bit key into a well-distributed seed (splitmix64 finalizer).
// Used to derive independent per-mask RNG streams from (run_seed ^ mask_id)
// so masks can be simulated in any order, or in parallel, with identical
// results.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream_id) {
    return std::mt19937_64(mix64(seed ^ stream_id));
}

} // namespace cslidar
