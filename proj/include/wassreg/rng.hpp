#pragma once

#include <cmath>
#include <cstdint>

namespace wassreg {

//! Seeded PRNG with self-contained sampling, so that identical seeds give
//! identical streams on every standard library. xoshiro256** core seeded
//! through splitmix64; Gaussians via Box-Muller.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& s : state_) s = splitmix64(x);
        has_cached_gauss_ = false;
    }

    //! Independent stream for a Monte Carlo run: seed and run index are
    //! mixed before seeding, so streams do not overlap for small indices.
    static Rng for_run(std::uint64_t seed, std::uint64_t run_index) {
        std::uint64_t x = seed;
        std::uint64_t a = splitmix64(x);
        x = run_index + 0x9e3779b97f4a7c15ULL;
        std::uint64_t b = splitmix64(x);
        return Rng(a ^ (b + 0x632be59bd9b4e019ULL));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    //! Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    double gaussian(double mean = 0.0, double sd = 1.0) {
        if (has_cached_gauss_) {
            has_cached_gauss_ = false;
            return mean + sd * cached_gauss_;
        }
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        cached_gauss_ = r * std::sin(theta);
        has_cached_gauss_ = true;
        return mean + sd * r * std::cos(theta);
    }

private:
    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t rotl(std::uint64_t v, int k) {
        return (v << k) | (v >> (64 - k));
    }

    std::uint64_t state_[4];
    double cached_gauss_ = 0.0;
    bool has_cached_gauss_;
};

} // namespace wassreg
