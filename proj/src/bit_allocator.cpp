// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#include "qaq/bit_allocator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qaq {

void QuantConfig::validate() const {
    if (!(sigma_s_max >= 0.0)) {
        throw std::invalid_argument("QuantConfig: sigma_s_max must be >= 0");
    }
    if (!(sigma_x_max >= 0.0)) {
        throw std::invalid_argument("QuantConfig: sigma_x_max must be >= 0");
    }
    if (!(e_s_max > 0.0)) {
        throw std::invalid_argument("QuantConfig: e_s_max must be > 0");
    }
    if (alpha < 0.0 || alpha_per_end() >= 0.5) {
        throw std::invalid_argument("QuantConfig: alpha out of range (2*alpha must stay < 1)");
    }
    if (window_n < 1) {
        throw std::invalid_argument("QuantConfig: window_n must be >= 1");
    }
    if (!(query_quantile_p > 0.0 && query_quantile_p <= 1.0)) {
        throw std::invalid_argument("QuantConfig: query_quantile_p must be in (0, 1]");
    }
    if (bmin < 1 || bmax < bmin) {
        throw std::invalid_argument("QuantConfig: bit clamps need 1 <= bmin <= bmax");
    }
    if (baseline_bits != 16 && baseline_bits != 32 && baseline_bits != 64) {
        throw std::invalid_argument("QuantConfig: baseline_bits must be 16, 32 or 64");
    }
    if (bmax > baseline_bits) {
        throw std::invalid_argument("QuantConfig: bmax cannot exceed baseline_bits");
    }
    if (fixed_bits_k > baseline_bits || fixed_bits_v > baseline_bits) {
        throw std::invalid_argument("QuantConfig: fixed bits cannot exceed baseline_bits");
    }
    if (fixed_bits_k == 0 || fixed_bits_v == 0) {
        // 0 is the codec's degenerate-range encoding, not a selectable width.
        throw std::invalid_argument("QuantConfig: fixed bits must be >= 1 (or < 0 for adaptive)");
    }
}

void QueryCalibration::add(double q_sq_norm, double p) {
    if (frozen) {
        return;
    }
    samples.push_back(q_sq_norm);
    if (max_samples > 0 && samples.size() > max_samples) {
        samples.erase(samples.begin());
    }
    ++sample_count;

    std::vector<double> sorted(samples);
    std::sort(sorted.begin(), sorted.end());
    size_t rank = static_cast<size_t>(
        std::ceil(p * static_cast<double>(sorted.size()) - 1e-9));
    rank = std::clamp<size_t>(rank, 1, sorted.size());
    quantile_value = sorted[rank - 1];
}

double value_std_bound(double s_t, size_t T, double sigma_x_max) {
    if (T == 0) {
        throw std::invalid_argument("value_std_bound: T must be >= 1");
    }
    double a = std::abs(s_t);
    if (a == 0.0) {
        return kInfBound;
    }
    return sigma_x_max / (std::sqrt(static_cast<double>(T)) * a);
}

double key_var_bound_main(double q_sq_norm, size_t T, double sigma_s_max) {
    if (q_sq_norm <= 0.0) {
        throw std::invalid_argument("key_var_bound_main: q_sq_norm must be positive");
    }
    if (sigma_s_max == 0.0) {
        // Zero budget wins even at T == 1, so a lossless run stays lossless
        // when the entry is read back one step later at a larger T.
        return 0.0;
    }
    if (T <= 1) {
        // One token scores 1 regardless of its key.
        return kInfBound;
    }
    double t = static_cast<double>(T);
    double inflate = t * t * t / (t - 1.0);
    return std::log1p(inflate * sigma_s_max * sigma_s_max) / q_sq_norm;
}

double key_mae_bound_appendix(double e_s_max, size_t D, size_t T, double q_max_abs,
                              const Tensor1D& s, size_t t) {
    if (e_s_max <= 0.0) {
        throw std::invalid_argument("key_mae_bound_appendix: e_s_max must be positive");
    }
    if (t >= s.len() || s.len() != T) {
        throw std::out_of_range("key_mae_bound_appendix: bad token index or score length");
    }
    // Largest |entry| of column t of the score jacobian, evaluated directly;
    // building the full T x T matrix per token would cost O(T^3) per step.
    double j_t = 0.0;
    for (size_t j = 0; j < T; ++j) {
        double delta = j == t ? 1.0 : 0.0;
        j_t = std::max(j_t, std::abs(s[j] * (delta - s[t])));
    }
    if (j_t == 0.0 || q_max_abs == 0.0) {
        return kInfBound;
    }
    return std::sqrt(e_s_max) /
           (std::sqrt(static_cast<double>(D)) * static_cast<double>(T) * q_max_abs * j_t);
}

QueryCalibration calibrate_query_norm(const std::vector<Tensor1D>& queries, double p) {
    if (queries.empty()) {
        throw std::invalid_argument("no calibration data");
    }
    if (!(p > 0.0 && p <= 1.0)) {
        throw std::invalid_argument("calibrate_query_norm: p must be in (0, 1]");
    }
    QueryCalibration calib;
    for (const auto& q : queries) {
        double sq = 0.0;
        for (double x : q.data) {
            sq += x * x;
        }
        calib.add(sq, p);
    }
    calib.freeze();
    return calib;
}

std::vector<TokenBits> allocate_bits(const std::vector<std::pair<double, double>>& k_ranges,
                                     const std::vector<std::pair<double, double>>& v_ranges,
                                     const Tensor1D& predicted_s, const QueryCalibration& calib,
                                     const QuantConfig& cfg, size_t T, size_t D) {
    if (k_ranges.size() != T || v_ranges.size() != T || predicted_s.len() != T) {
        throw std::invalid_argument("allocate_bits: per-token inputs must have length T");
    }

    std::vector<TokenBits> out(T);

    // The fixed override never consults the calibration, so the emptiness
    // check only guards the adaptive route below.
    if (cfg.fixed_bits_k >= 0 || cfg.fixed_bits_v >= 0) {
        for (size_t t = 0; t < T; ++t) {
            out[t].k = cfg.fixed_bits_k >= 0
                           ? BitChoice{cfg.fixed_bits_k, cfg.fixed_bits_k >= cfg.baseline_bits}
                           : BitChoice{cfg.baseline_bits, true};
            out[t].v = cfg.fixed_bits_v >= 0
                           ? BitChoice{cfg.fixed_bits_v, cfg.fixed_bits_v >= cfg.baseline_bits}
                           : BitChoice{cfg.baseline_bits, true};
            if (k_ranges[t].second <= k_ranges[t].first) {
                out[t].k = {0, false};
            }
            if (v_ranges[t].second <= v_ranges[t].first) {
                out[t].v = {0, false};
            }
        }
        return out;
    }

    if (calib.sample_count == 0) {
        throw std::invalid_argument("allocate_bits: empty query calibration");
    }

    // Key budget in main mode does not depend on the token, only its range
    // does; compute it once.
    double key_sigma = 0.0;
    if (cfg.key_mode == KeyMode::main_variance) {
        double var = key_var_bound_main(calib.quantile_value, T, cfg.sigma_s_max);
        key_sigma = std::isinf(var) ? kInfBound : std::sqrt(var);
    }
    double q_max_abs = std::sqrt(calib.quantile_value);

    for (size_t t = 0; t < T; ++t) {
        double k_range = k_ranges[t].second - k_ranges[t].first;
        double v_range = v_ranges[t].second - v_ranges[t].first;

        if (cfg.key_mode == KeyMode::main_variance) {
            out[t].k = bits_for_std(k_range, key_sigma, cfg.bmin, cfg.bmax, cfg.baseline_bits);
        } else {
            double mae =
                key_mae_bound_appendix(cfg.e_s_max, D, T, q_max_abs, predicted_s, t);
            out[t].k =
                bits_for_mae_uniform(k_range, mae, cfg.bmin, cfg.bmax, cfg.baseline_bits);
        }

        double v_sigma = value_std_bound(predicted_s[t], T, cfg.sigma_x_max);
        if (cfg.sigma_x_max == 0.0) {
            v_sigma = 0.0; // zero budget wins over the s == 0 sentinel
        }
        out[t].v = bits_for_std(v_range, v_sigma, cfg.bmin, cfg.bmax, cfg.baseline_bits);
    }
    return out;
}

} // namespace qaq
