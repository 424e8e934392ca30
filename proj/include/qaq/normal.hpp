// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

namespace qaq::normal {

// Standard normal CDF, Phi(x) = 0.5 * erfc(-x / sqrt(2)).
double cdf(double x);

// Inverse standard normal CDF on (0, 1).
//
// Peter Acklam's rational approximation (relative error < 1.15e-9) refined by
// one Halley step of f(x) = Phi(x) - p. The argument is mirrored onto (0, 0.5]
// first; there 1-p is exact and the residual Phi(x) - p is computed between
// two small quantities, so the refinement is not limited by cancellation. Max
// absolute error is below 1e-13 on [1e-8, 1 - 1e-8] (the contract requires
// 1e-10); p outside (0, 1) returns +/-infinity or NaN like a quantile
// function should.
double inverse_cdf(double p);

// Inverse complementary error function on (0, 2), via the identity
// erfc_inv(y) = -Phi_inv(y / 2) / sqrt(2).
double erfc_inv(double y);

// Closed form of the mean absolute error of the b-bit equal-mass normal
// quantizer on N(0, 1):
//   (1/sqrt(2*pi)) * sum_i (2 E(i+0.5) - E(i) - E(i+1)),  i = 0 .. 2^b - 1,
// with E(x) = exp(-erfc_inv(x / 2^(b-1))^2). The quantizer coefficient table
// in qaq/quantizer.hpp pins the same values; mc_oracle re-derives them by
// direct quadrature of the error integral.
double equal_mass_mae_coeff(int b);

} // namespace qaq::normal
