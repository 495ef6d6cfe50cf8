#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace coex {

// std::uniform_int_distribution and friends are implementation-defined, so all
// bounded draws are hand-rolled on top of mt19937_64 (whose output sequence is
// fully specified) to keep datasets and models byte-identical across toolchains.

// Unbiased integer in [lo, hi] via rejection sampling.
inline std::int64_t uniform_int(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(rng());  // full 64-bit range
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % span;
    std::uint64_t draw = rng();
    while (draw >= limit) draw = rng();
    return lo + static_cast<std::int64_t>(draw % span);
}

// Uniform real in [lo, hi) using the top 53 bits.
inline double uniform_real(std::mt19937_64& rng, double lo, double hi) {
    const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + unit * (hi - lo);
}

// Log-uniform real in [lo, hi), lo > 0.
inline double log_uniform_real(std::mt19937_64& rng, double lo, double hi) {
    return std::exp(uniform_real(rng, std::log(lo), std::log(hi)));
}

// Fisher-Yates shuffle with self-contained draws.
template <typename T>
void shuffle(std::mt19937_64& rng, std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i) - 1));
        std::swap(items[i - 1], items[j]);
    }
}

// First k indices of a seeded permutation of [0, n); k <= n.
inline std::vector<std::size_t> sample_indices(std::mt19937_64& rng, std::size_t n, std::size_t k) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    shuffle(rng, order);
    order.resize(k);
    return order;
}

// splitmix64: stateless mixing for hash-derived noise streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Sequence-sensitive combine for hashing structured keys.
inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
    return splitmix64(seed ^ splitmix64(value));
}

// Uniform double in [0, 1) from a hash value.
inline double hash_unit_real(std::uint64_t h) {
    return static_cast<double>(splitmix64(h) >> 11) * 0x1.0p-53;
}

// FNV-1a 64-bit: portable string hashing (std::hash is implementation-defined).
inline std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace coex
