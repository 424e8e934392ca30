// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#include "qaq/normal.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace qaq::normal {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kSqrt2Pi = 2.5066282746310002;

// Acklam's rational approximation of the inverse normal CDF, central branch
// for p in [0.02425, 0.5] and tail branch below. Coefficients as published
// (relative error < 1.15e-9 before refinement).
constexpr double kA[6] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                          1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
constexpr double kB[5] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                          6.680131188771972e+01, -1.328068155288572e+01};
constexpr double kC[6] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                          -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
constexpr double kD[4] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                          3.754408661907416e+00};

// Inverse CDF restricted to p in (0, 0.5]. The residual Phi(x) - p is
// evaluated as 0.5*erfc(-x/sqrt(2)) - p, a difference of two small numbers on
// this half, so the Halley step is limited only by erfc's own accuracy.
double inverse_cdf_lower(double p) {
    double x;
    if (p < 0.02425) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((kC[0] * q + kC[1]) * q + kC[2]) * q + kC[3]) * q + kC[4]) * q + kC[5]) /
            ((((kD[0] * q + kD[1]) * q + kD[2]) * q + kD[3]) * q + 1.0);
    } else {
        double q = p - 0.5;
        double r = q * q;
        x = (((((kA[0] * r + kA[1]) * r + kA[2]) * r + kA[3]) * r + kA[4]) * r + kA[5]) * q /
            (((((kB[0] * r + kB[1]) * r + kB[2]) * r + kB[3]) * r + kB[4]) * r + 1.0);
    }
    double e = 0.5 * std::erfc(-x / kSqrt2) - p;
    double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

} // namespace

double cdf(double x) {
    return 0.5 * std::erfc(-x / kSqrt2);
}

double inverse_cdf(double p) {
    if (std::isnan(p) || p < 0.0 || p > 1.0) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    if (p == 0.0) {
        return -std::numeric_limits<double>::infinity();
    }
    if (p == 1.0) {
        return std::numeric_limits<double>::infinity();
    }
    // For p in [0.5, 1], 1 - p is exact (Sterbenz), so the mirrored call
    // loses nothing.
    return p <= 0.5 ? inverse_cdf_lower(p) : -inverse_cdf_lower(1.0 - p);
}

double erfc_inv(double y) {
    return -inverse_cdf(0.5 * y) / kSqrt2;
}

double equal_mass_mae_coeff(int b) {
    if (b < 1 || b > 8) {
        throw std::invalid_argument("equal_mass_mae_coeff: b outside 1..8");
    }
    double half = static_cast<double>(1 << (b - 1));
    auto e = [half](double x) {
        if (x <= 0.0 || x >= 2.0 * half) {
            return 0.0; // erfc_inv diverges at both ends; the exponential wins
        }
        double t = erfc_inv(x / half);
        return std::exp(-t * t);
    };
    double sum = 0.0;
    for (int i = 0; i < (1 << b); ++i) {
        sum += 2.0 * e(i + 0.5) - e(i) - e(i + 1);
    }
    return sum / kSqrt2Pi;
}

} // namespace qaq::normal
