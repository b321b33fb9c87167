#pragma once
// Seeded, platform-independent RNG. The generator is xoshiro256** seeded
// through SplitMix64 (Blackman & Vigna). This algorithm identifier is part
// of the checkpoint format and must never change.

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "sdac/tensor.hpp"

namespace sdac {

inline constexpr const char* kRngAlgorithm = "xoshiro256ss";

inline std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class SeededRng {
  public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    std::uint64_t seed() const { return seed_; }

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

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // Index in [0, n).
    std::size_t next_index(std::size_t n) {
        return std::size_t(next_double() * double(n)) % n;
    }

    // Standard normal via Box-Muller; consumes two uniforms per pair.
    double next_gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        while (u1 == 0.0) u1 = next_double();
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // Independent sub-stream for worker `stream`. Documented derivation:
    // child seed = SplitMix64 applied to (seed + (stream+1) * golden ratio).
    SeededRng split(std::uint64_t stream) const {
        std::uint64_t x = seed_ + (stream + 1) * 0x9E3779B97F4A7C15ULL;
        return SeededRng(splitmix64(x));
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t seed_;
    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool have_spare_ = false;
};

inline Tensor uniform(SeededRng& rng, std::size_t n) {
    if (n < 1) throw std::invalid_argument("uniform: n must be >= 1");
    Tensor t({n});
    for (double& v : t.data) v = rng.next_double();
    return t;
}

inline Tensor uniform_range(SeededRng& rng, std::size_t n, double lo, double hi) {
    Tensor t = uniform(rng, n);
    for (double& v : t.data) v = lo + v * (hi - lo);
    return t;
}

inline Tensor gaussian(SeededRng& rng, std::size_t n, double sigma) {
    if (sigma < 0.0) throw std::invalid_argument("gaussian: sigma must be >= 0");
    Tensor t({n});
    for (double& v : t.data) v = sigma == 0.0 ? 0.0 : sigma * rng.next_gaussian();
    return t;
}

}  // namespace sdac
