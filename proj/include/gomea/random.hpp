#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace gomea {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent seeds from a master seed.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives a child seed from a parent seed and a sequence of stream labels.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> labels) noexcept
{
    std::uint64_t s = mix64(seed);
    for (auto l : labels) {
        s = mix64(s ^ mix64(l + 0x632be59bd9b4e019ULL));
    }
    return s;
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline std::size_t uniform_index(Rng& rng, std::size_t n)
{
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

} // namespace gomea
