#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

// Deterministic random streams.
//
// Everything downstream of a seed must reproduce bit-identically, so we do
// not use the <random> distribution classes (their algorithms are
// implementation-defined).  The raw engine is std::mt19937_64, which *is*
// pinned by the standard; the transforms on top of it live here.

namespace cards {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// FNV-1a, used to derive stream salts from names ("heatmap", cell ids, ...).
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed), gen_(splitmix64(seed)) {}

    std::uint64_t u64() { return gen_(); }

    /// Uniform double in [0, 1), 53 random bits.
    double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).  Rejection sampling, no modulo bias.
    std::uint64_t index(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % n;
    }

    /// Standard normal via Box-Muller (cosine branch only).
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1], keeps log() finite
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mu, double sigma) { return mu + sigma * normal(); }

    /// -1 or +1 with equal probability.
    int sign() { return (gen_() & 1) ? 1 : -1; }

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        // Fisher-Yates; std::shuffle is not reproducible across libraries.
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = std::size_t(index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// k distinct indices drawn from [0, n), in draw order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = i;
        std::vector<std::size_t> out;
        out.reserve(k < n ? k : n);
        for (std::size_t i = 0; i < k && i < n; ++i) {
            std::size_t j = i + std::size_t(index(n - i));
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
        return out;
    }

    /// Independent child stream; identical (seed, salt) pairs give identical streams.
    Rng derive(std::uint64_t salt) const {
        return Rng(splitmix64(seed_ ^ splitmix64(salt)));
    }
    Rng derive(std::string_view name) const { return derive(fnv1a(name)); }

  private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
};

}  // namespace cards
