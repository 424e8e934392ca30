// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#include "qaq/tensor.hpp"

#include <cmath>

namespace qaq {

bool Tensor1D::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

Tensor1D Tensor2D::row(size_t r) const {
    Tensor1D out(cols);
    for (size_t c = 0; c < cols; ++c) {
        out[c] = at(r, c);
    }
    return out;
}

bool Tensor2D::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

double l2_norm(const Tensor1D& v) {
    double acc = 0.0;
    for (double x : v.data) {
        acc += x * x;
    }
    return std::sqrt(acc);
}

double l2_distance(const Tensor1D& a, const Tensor1D& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.len(); ++i) {
        double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

} // namespace qaq
