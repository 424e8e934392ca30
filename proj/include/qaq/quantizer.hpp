// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "qaq/outlier_filter.hpp"
#include "qaq/tensor.hpp"

namespace qaq {

// One token's quantized cache row. Codes cover the non-outlier dims in
// original order; outliers live in the sidecar at full precision. bits == 0
// encodes a constant token (vmin == vmax, no codes). full_precision tokens
// keep their raw values verbatim and are accounted at baseline_bits each.
struct QuantizedToken {
    int bits = 0;
    double vmin = 0.0;
    double vmax = 0.0;
    std::vector<uint32_t> codes;
    OutlierSet outliers;
    size_t dim = 0;
    bool full_precision = false;
    std::vector<double> raw; // populated iff full_precision
};

struct BitChoice {
    int bits = 0;
    bool full_precision = false;

    friend bool operator==(const BitChoice&, const BitChoice&) = default;
};

// Uniform midpoint codec: the range splits into 2^bits equal segments,
// half-open except the last, and each value maps to its segment index.
// Out-of-range inputs clamp to [vmin, vmax] first. Throws "degenerate range"
// when vmin >= vmax.
std::vector<uint32_t> uniform_quantize(const Tensor1D& values, int bits, double vmin, double vmax);

// Segment-midpoint reconstruction with outliers reinstated exactly. Throws on
// a corrupted code >= 2^bits.
Tensor1D dequantize(const QuantizedToken& qt);

// ceil(log2(range / (2*sqrt(3)*sigma))) clamped to [bmin, bmax]; reaching
// baseline_bits, or a nonpositive sigma (zero error allowed), flags full
// precision. range == 0 yields the 0-bit constant encoding and sigma ==
// +infinity yields bmin.
BitChoice bits_for_std(double range, double sigma_target, int bmin, int bmax, int baseline_bits);

// Variant with 2^B - 1 segments of width 2*mae: ceil(log2(range / (2*mae) +
// 1)), same clamping and sentinel rules.
BitChoice bits_for_mae_uniform(double range, double mae_target, int bmin, int bmax,
                               int baseline_bits);

// MAE coefficients of the equal-mass normal codec, c_b such that MAE = c_b *
// sigma for b in 1..8. Strictly decreasing in b.
struct NormalCoeffTable {
    std::array<double, 8> coeff{};

    static const NormalCoeffTable& standard();
    double at(int b) const; // throws "unsupported bit width" outside 1..8
};

// standard().at(b); kept as a free function for call-site brevity.
double normal_coeff(int b);

// Smallest b in 1..8 with table.at(b) * sigma <= mae_target; none fits ->
// bmax with the full-precision flag.
BitChoice bits_for_mae_normal(double sigma, double mae_target, int bmax, int baseline_bits,
                              const NormalCoeffTable& table = NormalCoeffTable::standard());

// Equal-mass codec on N(0, sigma): value x gets code i with z_{i/2^b} <= x <
// z_{(i+1)/2^b} where z are the distribution quantiles (z_0 = -inf, z_1 =
// +inf); reconstruction is the segment's mass midpoint z_{(i+0.5)/2^b}.
std::vector<uint32_t> normal_quantize(const Tensor1D& values, int b, double sigma);
Tensor1D normal_dequantize(const std::vector<uint32_t>& codes, int b, double sigma);

// Code packing for storage accounting and dumps: LSB-first within and across
// bytes, each token padded to a whole byte. Documented in docs/formats.md.
std::vector<uint8_t> pack_codes(const std::vector<uint32_t>& codes, int bits);
std::vector<uint32_t> unpack_codes(const std::vector<uint8_t>& bytes, int bits, size_t count);

} // namespace qaq
