#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ddif/errors.hpp"

namespace ddif {

/**
 * Deterministic counter-based PRNG (splitmix64 finalizer over an
 * incrementing counter). The integer stream is pure 64-bit arithmetic,
 * so it is bit-exact across platforms and runs.
 *
 * Substreams: draw k of stream (seed, offset) is finalize(seed + (offset+k)*GAMMA),
 * i.e. every stream is a window of one master sequence. substream(a, b) with
 * a, b < 2^20 starts at offset ((a << 20) | b) + 1 shifted left by 24 bits,
 * so distinct index pairs own disjoint windows of 2^24 draws each and none
 * of them collides with the root stream's window.
 */
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed), counter_(0) {}

    std::uint64_t next_u64() {
        counter_ += 1;
        std::uint64_t z = seed_ + counter_ * kGamma;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Standard normal via Box-Muller; draws a pair of uniforms every
    // other call and caches the second deviate.
    double next_gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - next_double();  // (0, 1], keeps log finite
        double u2 = next_double();
        double mag = std::sqrt(-2.0 * std::log(u1));
        double ang = 2.0 * kPi * u2;
        spare_ = mag * std::sin(ang);
        has_spare_ = true;
        return mag * std::cos(ang);
    }

    // Independent stream addressed by (a, b); see class comment for the
    // non-overlap window construction. Derived from the seed only, so the
    // result does not depend on how much of this stream was consumed.
    Rng substream(std::uint64_t a, std::uint64_t b) const {
        if (a >= (1ULL << 20) || b >= (1ULL << 20)) {
            throw ParamError("Rng::substream: index out of range (< 2^20 required)");
        }
        Rng r(seed_);
        r.counter_ = (((a << 20) | b) + 1) << 24;
        return r;
    }

    std::uint64_t seed() const { return seed_; }

  private:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
    static constexpr double kPi = 3.14159265358979323846;

    std::uint64_t seed_;
    std::uint64_t counter_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// n i.i.d. standard normal deviates.
inline std::vector<double> gaussian_vector(Rng& rng, std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = rng.next_gaussian();
    return out;
}

}  // namespace ddif
