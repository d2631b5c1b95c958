#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace est {

using Rng = std::mt19937_64;

/// Independent stream seed for one concern ("data", "init", "shuffle", ...)
/// derived from a run seed. Toggling one concern never shifts another's stream.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
    for (char ch : label) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ULL;
    }
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (h | 1ULL); // splitmix64 finaliser
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::string_view label) { return Rng(derive_seed(seed, label)); }

inline double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

/// Uniform integer in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

} // namespace est
