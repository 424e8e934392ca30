// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "qaq/quantizer.hpp"
#include "qaq/tensor.hpp"

namespace qaq {

enum class KeyMode { main_variance, appendix_mae };
enum class RequantSource { in_place, backing_store };

struct QuantConfig {
    double sigma_s_max = 0.02; // score-error std budget per component
    double sigma_x_max = 0.02; // output-error std budget per component
    double e_s_max = 4e-4;     // score MSE budget, appendix_mae key mode only
    double alpha = 0.01;       // outlier fraction per end (or total, see flag)
    bool alpha_total_budget = false;
    int window_n = 5;
    double query_quantile_p = 0.9;
    int bmin = 1;
    int bmax = 16;
    int baseline_bits = 16;
    KeyMode key_mode = KeyMode::main_variance;
    RequantSource requantize_source = RequantSource::in_place;
    bool scale_logits = false; // multiply logits by 1/sqrt(D)
    // Fixed-bit override used by the sweep baseline: >= 0 pins every token of
    // the respective cache to that width and disables adaptive reallocation.
    int fixed_bits_k = -1;
    int fixed_bits_v = -1;

    double alpha_per_end() const { return alpha_total_budget ? alpha / 2.0 : alpha; }
    void validate() const; // throws std::invalid_argument with the field name
};

// Upper-p nearest-rank quantile of observed squared query norms. Batch use:
// calibrate_query_norm. Engine use: add() per step until freeze(), or a
// rolling reservoir of the most recent max_samples norms when streaming.
struct QueryCalibration {
    std::vector<double> samples; // squared norms, insertion order
    double quantile_value = 0.0;
    size_t sample_count = 0;
    bool frozen = false;
    size_t max_samples = 0; // 0 = unbounded (freeze-style calibration)

    void add(double q_sq_norm, double p);
    void freeze() { frozen = true; }
};

constexpr double kInfBound = std::numeric_limits<double>::infinity();

// sigma_V_t <= sigma_x_max / (sqrt(T) * |s_t|); s_t == 0 -> +infinity
// (clamps to bmin downstream).
double value_std_bound(double s_t, size_t T, double sigma_x_max);

// Variance budget per key entry: (1 / q_sq_norm) * ln(T^3/(T-1) *
// sigma_s_max^2 + 1). sigma_s_max == 0 -> 0 (full precision downstream, even
// at T == 1); otherwise T == 1 -> +infinity (a single score is 1 no matter
// what).
double key_var_bound_main(double q_sq_norm, size_t T, double sigma_s_max);

// Per-token MAE budget sqrt(e_s_max) / (sqrt(D) * T * q_max_abs * J_t) with
// J_t = max_j |s_j * (delta_jt - s_t)|, the max |entry| of column t of the
// score jacobian. J_t == 0 or q_max_abs == 0 -> +infinity.
double key_mae_bound_appendix(double e_s_max, size_t D, size_t T, double q_max_abs,
                              const Tensor1D& s, size_t t);

// Nearest-rank upper-p quantile of {sum_d Q_d^2}: sorted rank ceil(p * N),
// 1-based. Throws "no calibration data" on an empty sequence.
QueryCalibration calibrate_query_norm(const std::vector<Tensor1D>& queries, double p);

struct TokenBits {
    BitChoice k;
    BitChoice v;
};

// Per-token bit widths for both caches. Ranges are the post-outlier
// (vmin, vmax) of the stored entries; predicted_s comes from the attention
// windows. Key bits use the calibrated query quantile (main mode) or the
// appendix MAE chain (appendix mode); value bits always use the std route.
std::vector<TokenBits> allocate_bits(const std::vector<std::pair<double, double>>& k_ranges,
                                     const std::vector<std::pair<double, double>>& v_ranges,
                                     const Tensor1D& predicted_s, const QueryCalibration& calib,
                                     const QuantConfig& cfg, size_t T, size_t D);

} // namespace qaq
