#pragma once

#include <cmath>
#include <cstdint>

namespace sbx {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Replica i of a run seeded with `master` draws from an independent stream.
/// The mapping depends only on (master, i), never on scheduling, so results
/// are identical for any worker count.
inline std::uint64_t replica_seed(std::uint64_t master, std::uint64_t replica_index) {
    return splitmix64(master ^ splitmix64(replica_index + 0x51ed2701a7b3c9d5ULL));
}

/// xoshiro256++ with a fixed, platform-independent Gaussian recipe
/// (Box-Muller), so seeded streams reproduce byte-for-byte.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 1) { reseed(seed); }

    void reseed(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& w : s_) w = (x = splitmix64(x));
        have_spare_ = false;
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

    /// Uniform in (0,1]; never returns 0 so log() is safe.
    double uniform() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Uniform in [0,1).
    double uniform_co() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double exponential() { return -std::log(uniform()); }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double phi = 6.283185307179586476925286766559 * uniform_co();
        spare_ = r * std::sin(phi);
        have_spare_ = true;
        return r * std::cos(phi);
    }

  private:
    static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    std::uint64_t s_[4]{};
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace sbx
