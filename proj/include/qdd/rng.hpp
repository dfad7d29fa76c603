#pragma once

#include <cstdint>
#include <random>

namespace qdd {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; the mixing function behind every derived seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed of an independent stream: splitmix64(splitmix64(root) ^ tag).
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t tag) noexcept {
    return splitmix64(splitmix64(root) ^ splitmix64(tag + 0x632BE59BD9B4E019ULL));
}

/// Per-purpose streams of a run, split from the root seed in this order.
enum class Stream : std::uint64_t {
    tessellation = 1,
    init = 2,
    selection = 3,
    weights = 4,
    emitter = 5,
    crossover = 6,
};

inline Rng make_stream(std::uint64_t root, Stream s) {
    return Rng{derive_seed(root, static_cast<std::uint64_t>(s))};
}

} // namespace qdd
