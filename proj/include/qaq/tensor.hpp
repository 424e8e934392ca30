// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace qaq {

// Dense 1-D real vector. Holds Q (1xD), A (1xT), S (1xT) or X (1xD) of the
// single-head attention step depending on context.
struct Tensor1D {
    std::vector<double> data;

    Tensor1D() = default;
    explicit Tensor1D(size_t n, double fill = 0.0) : data(n, fill) {}
    Tensor1D(std::initializer_list<double> init) : data(init) {}

    size_t len() const { return data.size(); }
    double& operator[](size_t i) { return data[i]; }
    double operator[](size_t i) const { return data[i]; }

    bool all_finite() const;
};

// Dense row-major 2-D real matrix; rows index tokens (T), cols index the head
// dimension (D) for K and V.
struct Tensor2D {
    std::vector<double> data;
    size_t rows = 0;
    size_t cols = 0;

    Tensor2D() = default;
    Tensor2D(size_t r, size_t c, double fill = 0.0) : data(r * c, fill), rows(r), cols(c) {}

    double& at(size_t r, size_t c) { return data[r * cols + c]; }
    double at(size_t r, size_t c) const { return data[r * cols + c]; }

    // Row r as a copy; convenient for per-token operations.
    Tensor1D row(size_t r) const;

    bool all_finite() const;
};

double l2_norm(const Tensor1D& v);
double l2_distance(const Tensor1D& a, const Tensor1D& b);

} // namespace qaq
