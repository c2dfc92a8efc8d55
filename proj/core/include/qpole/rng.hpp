#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace qpole {

// Deterministic, implementation-independent RNG. std::mt19937 plus the
// standard distributions would be reproducible only per standard-library
// implementation; every experiment here promises bit-identical reruns, so
// the generator and the float mappings are pinned in this header.
//
// splitmix64 seeds and derives independent streams, xoshiro256++ produces
// the bulk randomness.

inline std::uint64_t splitmix64(std::uint64_t &state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto &word : s_) {
            word = splitmix64(sm);
        }
    }

    // Independent child stream; distinct stream_ids give decorrelated
    // generators regardless of how much the parent has been consumed.
    static Rng derive(std::uint64_t seed, std::uint64_t stream_id) {
        std::uint64_t sm = seed;
        std::uint64_t base = splitmix64(sm);
        std::uint64_t mix = base ^ (0x9e3779b97f4a7c15ULL * (stream_id + 1));
        return Rng(mix);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform double in [0, 1) with 53 random mantissa bits.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Box-Muller; spends two uniforms per call to stay stateless.
    double normal(double mean = 0.0, double stddev = 1.0) {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) {
            u1 = uniform();
        }
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
    }

    // Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // Rejection-free multiply-shift; bias is < 2^-64, irrelevant here.
        unsigned __int128 m = (unsigned __int128)next_u64() * n;
        return (std::uint64_t)(m >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t s_[4];
};

} // namespace qpole
