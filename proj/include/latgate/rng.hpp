#pragma once

#include <cstdint>
#include <cmath>
#include <numbers>

namespace latgate {

// Deterministic, platform-independent RNG. Streams are derived from a master
// seed plus up to four stream tags (experiment, shot, atom, channel) through
// splitmix64, so results do not depend on evaluation order or worker count.

inline std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
  public:
    Rng() : Rng(0, 0, 0, 0, 0) {}
    explicit Rng(std::uint64_t seed, std::uint64_t t0 = 0, std::uint64_t t1 = 0,
                 std::uint64_t t2 = 0, std::uint64_t t3 = 0) {
        std::uint64_t x = seed;
        (void)splitmix64(x);
        x ^= 0xa0761d6478bd642fULL * (t0 + 1);
        (void)splitmix64(x);
        x ^= 0xe7037ed1a0b428dbULL * (t1 + 1);
        (void)splitmix64(x);
        x ^= 0x8ebc6af09c88c6e3ULL * (t2 + 1);
        (void)splitmix64(x);
        x ^= 0x589965cc75374cc3ULL * (t3 + 1);
        for (auto& si : s_) si = splitmix64(x);
    }

    // xoshiro256**
    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller (deterministic across platforms).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4]{};
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace latgate
