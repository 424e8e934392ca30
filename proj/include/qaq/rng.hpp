// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "qaq/normal.hpp"

namespace qaq::rng {

// splitmix64 step (Steele, Lea, Flood); used to derive well-separated
// substream seeds from (seed, stream id) pairs.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Two splitmix64 rounds over seed xor a stream-dependent odd multiple; keeps
// adjacent (seed, stream) pairs statistically unrelated.
inline uint64_t mix(uint64_t seed, uint64_t stream) {
    uint64_t s = seed ^ (0x632be59bd9b4e019ULL * (stream + 1));
    splitmix64(s);
    return splitmix64(s);
}

// Deterministic random stream. mt19937_64 has a standard-mandated output
// sequence, and every variate below is a fixed transform of it, so a (seed,
// stream) pair produces identical draws on any platform or thread count.
class Stream {
public:
    explicit Stream(uint64_t seed) : eng_(seed) {}
    Stream(uint64_t seed, uint64_t stream) : eng_(mix(seed, stream)) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform on (0, 1), strictly inside the open interval: ((x >> 11) + 0.5)
    // * 2^-53. Safe to feed straight into inverse_cdf.
    double uniform01() {
        return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Gaussian by inversion; one engine draw per variate.
    double normal(double mu = 0.0, double sigma = 1.0) {
        return mu + sigma * qaq::normal::inverse_cdf(uniform01());
    }

    // Student's t with integer dof via Z / sqrt(chi2_nu / nu); chi2 is the sum
    // of nu squared normals, so one sample costs exactly nu + 1 engine draws.
    double student_t(int nu) {
        double z = normal();
        double chi2 = 0.0;
        for (int i = 0; i < nu; ++i) {
            double g = normal();
            chi2 += g * g;
        }
        return z / std::sqrt(chi2 / static_cast<double>(nu));
    }

    // Bernoulli(p) from one uniform draw.
    bool bernoulli(double p) { return uniform01() < p; }

    // Uniform integer in [0, n) by scaling; n is tiny in this codebase so the
    // modulo bias of a 53-bit mantissa is irrelevant.
    uint64_t below(uint64_t n) {
        return static_cast<uint64_t>(uniform01() * static_cast<double>(n)) % n;
    }

private:
    std::mt19937_64 eng_;
};

} // namespace qaq::rng
