// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qaq/tensor.hpp"

namespace qaq {

// One verified claim: an analytic value, its empirical or independently
// recomputed counterpart, and the verdict against a pinned tolerance.
struct McReport {
    std::string claim;
    double analytic = 0.0;
    double empirical = 0.0;
    uint64_t samples = 0;
    double rel_error = 0.0; // |empirical - analytic| / max(|analytic|, 1e-12)
    double tolerance = 0.0;
    bool pass = false;
    std::string metric = "rel"; // "rel", "abs" or "upper" (empirical <= analytic)
    std::string note;
};

// Monte-Carlo checks are chunked (fixed chunk of 1 << 14 samples, one rng
// substream per chunk, partials reduced in chunk order), so a report depends
// only on the seed, never on the thread count.

// Var[X_d] = sum_t s_t^2 * sigma_v[t]^2 under independent N(0, sigma_v[t])
// noise per token. Tolerance 3% relative at n >= 1e5.
McReport mc_variance_x(const Tensor1D& s, const std::vector<double>& sigma_v, uint64_t n,
                       uint64_t seed);

// E[e^Z] = exp(mu + sigma^2/2), Var[e^Z] = exp(2 mu + sigma^2) *
// (exp(sigma^2) - 1). Returns the mean claim and the variance claim.
std::vector<McReport> mc_lognormal_moments(double mu, double sigma, uint64_t n, uint64_t seed,
                                           double tolerance);

// Var[S_1] of a softmax over T iid N(0, sqrt(q_sq_sigma_k)) logits against
// the second-order approximation (1/T^2) (1 - 1/T) (e^{q_sq_sigma_k} - 1).
// Tolerance 20%: the claim itself is only a Taylor approximation.
McReport mc_ratio_variance(size_t T, double q_sq_sigma_k, uint64_t n, uint64_t seed);

// MAE coefficient of the b-bit equal-mass normal codec by adaptive Simpson
// quadrature of int |x - m_i| phi(x) dx per quantile segment (split at the
// kink, tails truncated where phi < 1e-18, absolute tolerance 1e-8). This is
// the independent route against the pinned table in qaq/quantizer.hpp.
double integrate_normal_coeff(int b);

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h; entry (j, i) =
// df_j/dx_i, matching the softmax_jacobian orientation.
Tensor2D finite_diff_jacobian(const std::function<Tensor1D(const Tensor1D&)>& f, const Tensor1D& x,
                              double h);

// Empirical MAE of normal_quantize on n sigma-scaled Gaussian draws, for the
// cross-check of the coefficient table at n = 1e6.
McReport mc_normal_quantize_mae(int b, double sigma, uint64_t n, uint64_t seed);

} // namespace qaq
