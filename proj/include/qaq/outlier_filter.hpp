// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "qaq/tensor.hpp"

namespace qaq {

// Sparse full-precision sidecar of one token: (dim index, value) pairs with
// strictly increasing unique indices.
struct OutlierSet {
    std::vector<std::pair<uint32_t, double>> entries;

    size_t count() const { return entries.size(); }
    bool contains(uint32_t dim) const;
};

struct ExtractResult {
    Tensor1D inliers;                 // surviving values, original order
    std::vector<uint32_t> kept_index; // kept_index[i] = original dim of inliers[i]
    OutlierSet outliers;
    double vmin = 0.0; // range over inliers; 0/0 when no inlier survives
    double vmax = 0.0;
};

// Removes the ceil(alpha_per_end * D) largest and smallest values into the
// sidecar (value ties broken toward the lower index). alpha_per_end = 0 keeps
// everything. An all-identical token yields no outliers regardless of alpha:
// its range is already degenerate and the constant encoding is lossless.
ExtractResult extract_outliers(const Tensor1D& values, double alpha_per_end);

// Inverse placement: scatter reconstructed inliers to their original dims and
// reinstate outliers exactly. Throws on index collisions or size mismatch.
Tensor1D merge_outliers(const Tensor1D& inlier_recon, const std::vector<uint32_t>& kept_index,
                        const OutlierSet& outliers);

// Sidecar wire format: u32 count, then count * (u32 index, value at baseline
// precision: 2/4/8 bytes for baseline_bits 16/32/64, little endian). See
// docs/formats.md.
std::vector<uint8_t> serialize_outliers(const OutlierSet& outliers, int baseline_bits);
OutlierSet deserialize_outliers(const std::vector<uint8_t>& bytes, int baseline_bits);

} // namespace qaq
