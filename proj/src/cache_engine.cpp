// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#include "qaq/cache_engine.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "qaq/attention.hpp"
#include "qaq/outlier_filter.hpp"

namespace qaq {

namespace {

void append_row(Tensor2D& m, const Tensor1D& row) {
    if (m.rows == 0) {
        m.cols = row.len();
    }
    m.data.insert(m.data.end(), row.data.begin(), row.data.end());
    ++m.rows;
}

int index_bits_for(size_t dim) {
    return dim <= 1 ? 0 : static_cast<int>(std::bit_width(dim - 1));
}

} // namespace

CacheEngine::CacheEngine(const QuantConfig& cfg, const CalibrationPolicy& calib)
    : cfg_(cfg), calib_policy_(calib) {
    cfg_.validate();
    if (calib_policy_.has_fixed_quantile) {
        calib_.samples = {calib_policy_.fixed_quantile};
        calib_.quantile_value = calib_policy_.fixed_quantile;
        calib_.sample_count = 1;
        calib_.freeze();
    } else if (calib_policy_.streaming) {
        calib_.max_samples = calib_policy_.reservoir;
    }
}

QuantizedToken CacheEngine::encode(const Tensor1D& source, BitChoice choice,
                                   const QuantConfig& cfg) {
    auto ex = extract_outliers(source, cfg.alpha_per_end());
    QuantizedToken qt;
    qt.dim = source.len();
    qt.vmin = ex.vmin;
    qt.vmax = ex.vmax;
    if (choice.full_precision) {
        // Raw storage keeps everything; a sidecar would only double-count.
        qt.bits = cfg.baseline_bits;
        qt.full_precision = true;
        qt.raw = source.data;
        return qt;
    }
    qt.outliers = ex.outliers;
    if (choice.bits == 0 || !(ex.vmin < ex.vmax)) {
        qt.bits = 0; // constant encoding, codes stay empty
        return qt;
    }
    qt.bits = choice.bits;
    qt.codes = uniform_quantize(ex.inliers, choice.bits, ex.vmin, ex.vmax);
    return qt;
}

StepResult CacheEngine::step(const Tensor1D& q, const Tensor1D& k, const Tensor1D& v) {
    if (dim_ == 0) {
        if (q.len() == 0) {
            throw std::invalid_argument("CacheEngine::step: empty query");
        }
        dim_ = q.len();
    }
    if (q.len() != dim_ || k.len() != dim_ || v.len() != dim_) {
        throw std::invalid_argument("CacheEngine::step: q/k/v length must equal head dim " +
                                    std::to_string(dim_));
    }

    append_row(backing_k_, k);
    append_row(backing_v_, v);
    // The new token joins attention at full precision and gets its first real
    // quantization in this step's reallocation pass below.
    k_entries_.push_back(encode(k, {cfg_.baseline_bits, true}, cfg_));
    v_entries_.push_back(encode(v, {cfg_.baseline_bits, true}, cfg_));
    append_row(recon_k_, k);
    append_row(recon_v_, v);
    windows_.emplace_back(static_cast<size_t>(cfg_.window_n));

    const size_t T = k_entries_.size();

    AttentionOutput hat = attention_forward(q, recon_k_, recon_v_, cfg_.scale_logits);
    AttentionOutput exact = attention_forward(q, backing_k_, backing_v_, cfg_.scale_logits);

    for (size_t t = 0; t < T; ++t) {
        windows_[t].push_score(hat.s[t]);
    }

    if (!calib_.frozen) {
        double sq = 0.0;
        for (double x : q.data) {
            sq += x * x;
        }
        // Calibration tracks the effective logit sensitivity, so scaled
        // attention divides the squared norm by D once.
        if (cfg_.scale_logits) {
            sq /= static_cast<double>(dim_);
        }
        calib_.add(sq, cfg_.query_quantile_p);
        if (!calib_policy_.streaming && calib_.sample_count >= calib_policy_.steps) {
            calib_.freeze();
        }
    }

    Tensor1D predicted(T);
    std::vector<std::pair<double, double>> k_ranges(T), v_ranges(T);
    for (size_t t = 0; t < T; ++t) {
        predicted[t] = windows_[t].predicted_score();
        k_ranges[t] = {k_entries_[t].vmin, k_entries_[t].vmax};
        v_ranges[t] = {v_entries_[t].vmin, v_entries_[t].vmax};
    }

    auto bits = allocate_bits(k_ranges, v_ranges, predicted, calib_, cfg_, T, dim_);
    for (size_t t = 0; t < T; ++t) {
        requantize_token(t, bits[t].k, bits[t].v);
    }

    last_s_hat_ = hat.s;
    last_x_hat_ = hat.x;
    last_exact_s_ = exact.s;
    last_exact_x_ = exact.x;
    ++step_count_;
    return {hat.x, hat.s};
}

void CacheEngine::requantize_token(size_t t, BitChoice k_bits, BitChoice v_bits) {
    if (t >= k_entries_.size()) {
        throw std::out_of_range("requantize_token: token " + std::to_string(t) +
                                " out of range");
    }
    requantize_one(k_entries_, backing_k_, recon_k_, t, k_bits);
    requantize_one(v_entries_, backing_v_, recon_v_, t, v_bits);
}

void CacheEngine::requantize_one(std::vector<QuantizedToken>& entries, Tensor2D& backing,
                                 Tensor2D& recon, size_t t, BitChoice choice) {
    QuantizedToken& entry = entries[t];
    const int current = entry.full_precision ? cfg_.baseline_bits : entry.bits;
    const int target = choice.full_precision ? cfg_.baseline_bits : choice.bits;
    if (target == current && choice.full_precision == entry.full_precision) {
        return; // bit-exact no-op
    }

    Tensor1D source;
    if (target > current) {
        // Quantization is irreversible; going up means refetching the
        // unquantized row from the backing store.
        source = backing.row(t);
        ++backing_fetches_;
    } else if (cfg_.requantize_source == RequantSource::in_place) {
        source = dequantize(entry);
    } else {
        source = backing.row(t); // accuracy-study mode, not counted as a fetch
    }

    entry = encode(source, choice, cfg_);
    Tensor1D r = dequantize(entry);
    for (size_t d = 0; d < dim_; ++d) {
        recon.at(t, d) = r[d];
    }
}

CacheStats CacheEngine::snapshot_stats() const {
    CacheStats st;
    st.backing_fetches = backing_fetches_;
    st.bit_histogram_k.assign(static_cast<size_t>(cfg_.baseline_bits) + 1, 0);
    st.bit_histogram_v.assign(static_cast<size_t>(cfg_.baseline_bits) + 1, 0);
    const size_t T = k_entries_.size();
    if (T == 0) {
        return st;
    }

    const int idx_bits = index_bits_for(dim_);
    uint64_t total = 0;
    uint64_t bits_k_sum = 0, bits_v_sum = 0;
    for (size_t t = 0; t < T; ++t) {
        for (const auto* entry : {&k_entries_[t], &v_entries_[t]}) {
            const uint64_t outn = entry->outliers.count();
            const uint64_t width = static_cast<uint64_t>(entry->bits);
            total += width * (dim_ - outn);                  // packed codes
            total += 2ull * cfg_.baseline_bits;              // vmin, vmax
            total += outn * (idx_bits + cfg_.baseline_bits); // sidecar
            total += 8;                                      // bit-width tag
        }
        bits_k_sum += static_cast<uint64_t>(k_entries_[t].bits);
        bits_v_sum += static_cast<uint64_t>(v_entries_[t].bits);
        ++st.bit_histogram_k[static_cast<size_t>(k_entries_[t].bits)];
        ++st.bit_histogram_v[static_cast<size_t>(v_entries_[t].bits)];
    }
    st.total_quantized_bits = total;
    st.baseline_bits_total =
        static_cast<uint64_t>(T) * 2ull * dim_ * static_cast<uint64_t>(cfg_.baseline_bits);
    st.compression_ratio =
        static_cast<double>(st.baseline_bits_total) / static_cast<double>(total);
    st.mean_bits_k = static_cast<double>(bits_k_sum) / static_cast<double>(T);
    st.mean_bits_v = static_cast<double>(bits_v_sum) / static_cast<double>(T);

    st.s_error_l2 = l2_distance(last_s_hat_, last_exact_s_);
    st.x_error_l2 = l2_distance(last_x_hat_, last_exact_x_);
    st.s_error_rms = st.s_error_l2 / std::sqrt(static_cast<double>(last_exact_s_.len()));
    st.x_error_rms = st.x_error_l2 / std::sqrt(static_cast<double>(last_exact_x_.len()));
    return st;
}

std::string CacheEngine::dump_state_json() const {
    nlohmann::json root;
    root["step_count"] = step_count_;
    root["dim"] = dim_;
    root["tokens"] = nlohmann::json::array();

    auto entry_json = [this](const QuantizedToken& e) {
        nlohmann::json j;
        j["bits"] = e.bits;
        j["vmin"] = e.vmin;
        j["vmax"] = e.vmax;
        j["full_precision"] = e.full_precision;
        if (e.full_precision) {
            j["raw"] = e.raw;
        } else {
            auto packed = pack_codes(e.codes, e.bits);
            j["codes_packed"] = nlohmann::json::array();
            for (uint8_t b : packed) {
                j["codes_packed"].push_back(b);
            }
            j["code_count"] = e.codes.size();
            j["outliers"] = nlohmann::json::array();
            for (const auto& [d, val] : e.outliers.entries) {
                j["outliers"].push_back({d, val});
            }
        }
        return j;
    };

    for (size_t t = 0; t < k_entries_.size(); ++t) {
        nlohmann::json tok;
        tok["k"] = entry_json(k_entries_[t]);
        tok["v"] = entry_json(v_entries_[t]);
        tok["window"] = windows_[t].history();
        root["tokens"].push_back(tok);
    }

    root["calibration"] = {{"quantile_value", calib_.quantile_value},
                           {"sample_count", calib_.sample_count},
                           {"frozen", calib_.frozen}};

    CacheStats st = snapshot_stats();
    root["stats"] = {{"total_quantized_bits", st.total_quantized_bits},
                     {"baseline_bits_total", st.baseline_bits_total},
                     {"compression_ratio", st.compression_ratio},
                     {"backing_fetches", st.backing_fetches},
                     {"s_error_l2", st.s_error_l2},
                     {"x_error_l2", st.x_error_l2},
                     {"mean_bits_k", st.mean_bits_k},
                     {"mean_bits_v", st.mean_bits_v}};
    return root.dump(2);
}

} // namespace qaq
