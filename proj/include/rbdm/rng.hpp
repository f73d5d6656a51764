#pragma once

#include <cstdint>
#include <random>

namespace rbdm {

// Seeded random stream with a fixed, implementation-independent mapping from
// engine output to uniforms and gaussians, so identical seeds give identical
// draws on every platform.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform double in [0, 1).
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased uniform integer in [0, n), n > 0. Rejection sampling.
    uint64_t uniform_int(uint64_t n);

    // Standard normal via Box-Muller; the paired draw is cached.
    double normal();

    // Derive a child seed from (seed, stream ids). splitmix64-style mixing.
    static uint64_t mix(uint64_t a, uint64_t b);
    static uint64_t mix(uint64_t a, uint64_t b, uint64_t c) { return mix(mix(a, b), c); }

private:
    std::mt19937_64 eng_;
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace rbdm
