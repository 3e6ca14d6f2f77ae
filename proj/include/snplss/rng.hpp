#pragma once

#include <cstdint>
#include <random>

namespace snplss {

// splitmix64 step; used to derive independent sub-stream seeds from one
// master seed so each simulation sub-product is reproducible in isolation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Named sub-streams of the master seed.
enum class Stream : std::uint64_t {
    genotypes = 1,
    sigma_select = 2,
    sigma_coeffs = 3,
    mu_select = 4,
    mu_coeffs = 5,
    noise = 6,
    split = 7,
    generic = 8,
};

inline std::mt19937_64 make_rng(std::uint64_t seed, Stream stream,
                                std::uint64_t counter = 0) {
    std::uint64_t s = seed;
    splitmix64(s);
    s ^= static_cast<std::uint64_t>(stream) * 0xd1342543de82ef95ULL;
    splitmix64(s);
    s ^= counter * 0x2545f4914f6cdd1dULL;
    return std::mt19937_64(splitmix64(s));
}

}  // namespace snplss
