// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#include "qaq/reference.hpp"

#include <cmath>
#include <stdexcept>

namespace qaq::ref {

qaq::Tensor1D attention_naive(const qaq::Tensor1D& q, const qaq::Tensor2D& k,
                              const qaq::Tensor2D& v, bool scale, qaq::Tensor1D* s_out) {
    if (k.rows == 0 || k.rows != v.rows || k.cols != q.len() || v.cols != q.len()) {
        throw std::invalid_argument("attention_naive: inconsistent shapes");
    }
    size_t T = k.rows;
    size_t D = q.len();

    std::vector<double> logits(T, 0.0);
    for (size_t t = 0; t < T; ++t) {
        for (size_t d = 0; d < D; ++d) {
            logits[t] += q.data[d] * k.data[t * D + d];
        }
        if (scale) {
            logits[t] /= std::sqrt(static_cast<double>(D));
        }
    }

    double biggest = logits[0];
    for (size_t t = 1; t < T; ++t) {
        if (logits[t] > biggest) {
            biggest = logits[t];
        }
    }
    std::vector<double> weights(T);
    double total = 0.0;
    for (size_t t = 0; t < T; ++t) {
        weights[t] = std::exp(logits[t] - biggest);
        total += weights[t];
    }
    for (size_t t = 0; t < T; ++t) {
        weights[t] /= total;
    }
    if (s_out != nullptr) {
        s_out->data.assign(weights.begin(), weights.end());
    }

    qaq::Tensor1D x(D);
    for (size_t t = 0; t < T; ++t) {
        for (size_t d = 0; d < D; ++d) {
            x.data[d] += weights[t] * v.data[t * D + d];
        }
    }
    return x;
}

} // namespace qaq::ref
