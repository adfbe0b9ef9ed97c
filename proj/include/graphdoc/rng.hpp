#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace graphdoc {

/// Deterministic RNG. mt19937_64 output is pinned by the standard; the
/// derived draws below avoid std::*_distribution so that streams are
/// bit-reproducible across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n), n >= 1. Rejection sampling keeps it unbiased.
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

/// Mixes a textual tag into a base seed so independent streams (init,
/// splits, sampling, ...) never alias.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
    std::uint64_t h = 14695981039346656037ULL ^ base;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace graphdoc
