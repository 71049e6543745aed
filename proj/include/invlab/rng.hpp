#pragma once

// Self-contained xoshiro256++ generator with Box-Muller gaussians.
// Bit-reproducible across platforms, unlike std::normal_distribution,
// and cheap to split into independent per-trial streams.

#include <cmath>
#include <cstdint>

#include "invlab/kernels.hpp"

namespace invlab {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& s : s_) s = splitmix64(sm);
    }

    // Independent stream per (master seed, trial index) pair.
    static Rng for_trial(std::uint64_t master_seed, std::uint64_t trial) {
        std::uint64_t sm = master_seed;
        std::uint64_t base = splitmix64(sm);
        return Rng(base ^ (0xd1342543de82ef95ULL * (trial + 1)));
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

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [lo, hi] inclusive.
    int uniform_int(int lo, int hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(next_u64() % span);
    }

    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        const double two_pi = 6.283185307179586476925286766559;
        spare_ = mag * std::sin(two_pi * u2);
        has_spare_ = true;
        return mag * std::cos(two_pi * u2);
    }

    Vec gaussian_vec(std::size_t n) {
        Vec out(n);
        for (auto& v : out) v = gaussian();
        return out;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace invlab
