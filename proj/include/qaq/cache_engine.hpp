// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qaq/attention_window.hpp"
#include "qaq/bit_allocator.hpp"
#include "qaq/quantizer.hpp"
#include "qaq/tensor.hpp"

namespace qaq {

struct CalibrationPolicy {
    size_t steps = 32;      // freeze after this many queries (ignored when streaming)
    bool streaming = false; // keep a rolling reservoir instead of freezing
    size_t reservoir = 256; // reservoir size in streaming mode
    bool has_fixed_quantile = false;
    double fixed_quantile = 0.0; // preloaded quantile (from the calibrate run)
};

struct CacheStats {
    uint64_t total_quantized_bits = 0;
    uint64_t baseline_bits_total = 0;
    double compression_ratio = 0.0;
    uint64_t backing_fetches = 0;
    // Errors of the most recent step against exact attention over the backing
    // store; the rms forms divide by sqrt(T) resp. sqrt(D).
    double s_error_l2 = 0.0;
    double x_error_l2 = 0.0;
    double s_error_rms = 0.0;
    double x_error_rms = 0.0;
    double mean_bits_k = 0.0; // mean stored width over tokens, 0-bit and
    double mean_bits_v = 0.0; // full-precision entries included
    std::vector<uint64_t> bit_histogram_k; // index = stored width, 0..baseline
    std::vector<uint64_t> bit_histogram_v;
};

struct StepResult {
    Tensor1D x_hat;
    Tensor1D s_hat;
};

// Single-head autoregressive KV cache with per-step quality-adaptive
// requantization. Every stored token has a quantized entry, a full-precision
// backing row (the simulated CPU copy), and a score window feeding the
// importance predictor. Down-requantization reads the current entry or the
// backing store per cfg.requantize_source; up-requantization always reads the
// backing store and counts one backing fetch (down reads never count, even in
// backing_store mode).
class CacheEngine {
public:
    explicit CacheEngine(const QuantConfig& cfg, const CalibrationPolicy& calib = {});

    // One decode step: appends (k, v) at full precision, attends with q over
    // the reconstructed cache (the new token still unquantized), records
    // scores in the windows, then reallocates bits and requantizes. The new
    // token is quantized for the first time in the same pass.
    StepResult step(const Tensor1D& q, const Tensor1D& k, const Tensor1D& v);

    // Applies the monotone requantization rule to one token. Equal target and
    // current width is a bit-exact no-op.
    void requantize_token(size_t t, BitChoice k_bits, BitChoice v_bits);

    CacheStats snapshot_stats() const;

    size_t size() const { return k_entries_.size(); }
    size_t dim() const { return dim_; }
    size_t step_count() const { return step_count_; }
    const QuantConfig& config() const { return cfg_; }
    const QueryCalibration& calibration() const { return calib_; }
    const QuantizedToken& k_entry(size_t t) const { return k_entries_[t]; }
    const QuantizedToken& v_entry(size_t t) const { return v_entries_[t]; }
    const ScoreWindow& window(size_t t) const { return windows_[t]; }
    Tensor1D backing_k_row(size_t t) const { return backing_k_.row(t); }
    Tensor1D backing_v_row(size_t t) const { return backing_v_.row(t); }
    // Exact attention of the most recent step (computed from the backing
    // store for the error metrics).
    const Tensor1D& last_exact_s() const { return last_exact_s_; }
    const Tensor1D& last_exact_x() const { return last_exact_x_; }
    const Tensor1D& last_s_hat() const { return last_s_hat_; }
    const Tensor1D& last_x_hat() const { return last_x_hat_; }
    uint64_t backing_fetches() const { return backing_fetches_; }

    // Self-describing JSON dump of entries, windows, calibration and stats;
    // layout documented in docs/formats.md.
    std::string dump_state_json() const;

private:
    void requantize_one(std::vector<QuantizedToken>& entries, Tensor2D& backing, Tensor2D& recon,
                        size_t t, BitChoice choice);
    static QuantizedToken encode(const Tensor1D& source, BitChoice choice, const QuantConfig& cfg);

    QuantConfig cfg_;
    CalibrationPolicy calib_policy_;
    QueryCalibration calib_;
    size_t dim_ = 0;
    size_t step_count_ = 0;
    uint64_t backing_fetches_ = 0;
    std::vector<QuantizedToken> k_entries_;
    std::vector<QuantizedToken> v_entries_;
    Tensor2D backing_k_;
    Tensor2D backing_v_;
    Tensor2D recon_k_; // cached dequantized rows, updated on requantization
    Tensor2D recon_v_;
    std::vector<ScoreWindow> windows_;
    Tensor1D last_exact_s_, last_exact_x_, last_s_hat_, last_x_hat_;
};

} // namespace qaq
