#pragma once

#include <cmath>
#include <cstdint>

namespace polynet {

// SplitMix64: tiny counter-based generator. Every Monte Carlo consumer derives
// an independent stream from (seed, key...) so that work items can run in any
// order, on any number of threads, and still produce bit-identical results.
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t s) : state(s) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
};

inline std::uint64_t mix_key(std::uint64_t a, std::uint64_t b) {
    SplitMix64 m(a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2)));
    return m.next();
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Derived stream: hash-chain the keys so (seed, k1, k2) streams never collide
    // with (seed, k1) streams in practice.
    Rng(std::uint64_t seed, std::uint64_t k1) : gen_(mix_key(seed, k1)) {}
    Rng(std::uint64_t seed, std::uint64_t k1, std::uint64_t k2)
        : gen_(mix_key(mix_key(seed, k1), k2)) {}

    std::uint64_t next_u64() { return gen_.next(); }

    // Uniform in [0,1) with 53 random bits.
    double uniform01() { return static_cast<double>(gen_.next() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    // Box-Muller; caches the second variate.
    double normal() {
        if (have_cache_) {
            have_cache_ = false;
            return cache_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        // Guard against log(0).
        while (u1 <= 0.0) u1 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cache_ = r * std::sin(a);
        have_cache_ = true;
        return r * std::cos(a);
    }

    // Uniform integer in [0, 2^bits) — exact, no modulo bias.
    std::uint64_t bits(int nbits) { return gen_.next() >> (64 - nbits); }

    // Uniform index in [0, m); the 53-bit mantissa makes floor(u*m) unbiased for
    // the small m used here.
    std::uint64_t index(std::uint64_t m) {
        std::uint64_t i = static_cast<std::uint64_t>(uniform01() * static_cast<double>(m));
        return i < m ? i : m - 1;
    }

private:
    SplitMix64 gen_;
    double cache_ = 0.0;
    bool have_cache_ = false;
};

}  // namespace polynet
