#pragma once

#include <cstdint>
#include <random>

namespace nsmc {

using Rng = std::mt19937_64;

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
}  // namespace detail

// Deterministic stream derivation: independent Rng for a (seed, index...) tuple.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t s = detail::splitmix64(seed);
    s = detail::splitmix64(s ^ (a + 0x632be59bd9b4e019ULL));
    s = detail::splitmix64(s ^ (b + 0x9e3779b97f4a7c15ULL));
    return Rng(s);
}

}  // namespace nsmc
