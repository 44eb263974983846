#pragma once

#include <cstdint>
#include <random>

namespace ddg {

// splitmix64; used both as a hash (derived per-example streams) and as the
// seeding primitive for mt19937_64 so streams decorrelate even for small seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (0x9e3779b97f4a7c15ULL + b));
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
    return std::mt19937_64(splitmix64(seed));
}

// Derived stream: rng(seed, a, b) is independent of rng(seed, a', b') for
// distinct (a,b); used for per-example dataset generation and probe repeats.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return std::mt19937_64(hash_combine(hash_combine(seed, a), b));
}

}  // namespace ddg
