// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#include "qaq/attention.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace qaq {

namespace {

void check_index(size_t idx, size_t bound, const char* name) {
    if (idx >= bound) {
        throw std::out_of_range(std::string(name) + " index " + std::to_string(idx) +
                                " out of range [0, " + std::to_string(bound) + ")");
    }
}

} // namespace

Tensor1D softmax(const Tensor1D& a) {
    if (a.len() == 0) {
        throw std::invalid_argument("empty logits");
    }
    double m = *std::max_element(a.data.begin(), a.data.end());
    Tensor1D out(a.len());
    double denom = 0.0;
    for (size_t i = 0; i < a.len(); ++i) {
        out[i] = std::exp(a[i] - m);
        denom += out[i];
    }
    for (size_t i = 0; i < a.len(); ++i) {
        out[i] /= denom;
    }
    return out;
}

AttentionOutput attention_forward(const Tensor1D& q, const Tensor2D& k, const Tensor2D& v,
                                  bool scale) {
    const size_t T = k.rows;
    const size_t D = q.len();
    if (k.cols != D) {
        throw std::invalid_argument("attention_forward: k.cols (" + std::to_string(k.cols) +
                                    ") != q.len (" + std::to_string(D) + ")");
    }
    if (v.cols != D) {
        throw std::invalid_argument("attention_forward: v.cols (" + std::to_string(v.cols) +
                                    ") != q.len (" + std::to_string(D) + ")");
    }
    if (v.rows != T) {
        throw std::invalid_argument("attention_forward: v.rows (" + std::to_string(v.rows) +
                                    ") != k.rows (" + std::to_string(T) + ")");
    }
    if (T == 0) {
        throw std::invalid_argument("attention_forward: k.rows == 0");
    }

    AttentionOutput out;
    out.a = Tensor1D(T);
    const double factor = scale ? 1.0 / std::sqrt(static_cast<double>(D)) : 1.0;

    // Each logit is an independent serial dot product, so this loop is
    // deterministic at any thread count.
#pragma omp parallel for schedule(static) if (T * D > 4096)
    for (size_t t = 0; t < T; ++t) {
        double acc = 0.0;
        for (size_t d = 0; d < D; ++d) {
            acc += q[d] * k.at(t, d);
        }
        out.a[t] = factor * acc;
    }

    out.s = softmax(out.a);

    out.x = Tensor1D(D);
#pragma omp parallel for schedule(static) if (T * D > 4096)
    for (size_t d = 0; d < D; ++d) {
        double acc = 0.0;
        for (size_t t = 0; t < T; ++t) {
            acc += out.s[t] * v.at(t, d);
        }
        out.x[d] = acc;
    }
    return out;
}

Tensor2D softmax_jacobian(const Tensor1D& s) {
    const size_t T = s.len();
    Tensor2D j(T, T);
    for (size_t row = 0; row < T; ++row) {
        for (size_t col = 0; col < T; ++col) {
            double delta = row == col ? 1.0 : 0.0;
            j.at(row, col) = s[row] * (delta - s[col]);
        }
    }
    return j;
}

double grad_x_wrt_v(const Tensor1D& s, size_t t, size_t i, size_t j) {
    check_index(t, s.len(), "token");
    if (i == j) {
        return s[t];
    }
    return 0.0;
}

double grad_x_wrt_k(const Tensor1D& q, const Tensor1D& s, const Tensor2D& v, const Tensor1D& x,
                    size_t t, size_t i, size_t j) {
    check_index(t, s.len(), "token");
    check_index(i, q.len(), "query dim");
    check_index(j, x.len(), "output dim");
    return s[t] * q[i] * (v.at(t, j) - x[j]);
}

} // namespace qaq
