// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "qaq/tensor.hpp"

namespace qaq {

struct AttentionOutput {
    Tensor1D a; // pre-softmax logits, length T
    Tensor1D s; // softmax scores, length T
    Tensor1D x; // attended output, length D
};

// Numerically stable softmax (max subtraction). Throws std::invalid_argument
// on empty input.
Tensor1D softmax(const Tensor1D& a);

// Single-head attention: a = q * k^T (times 1/sqrt(D) iff scale), s =
// softmax(a), x = s * v. The default leaves the logits unscaled; all
// derivative formulas below assume the unscaled convention.
AttentionOutput attention_forward(const Tensor1D& q, const Tensor2D& k, const Tensor2D& v,
                                  bool scale = false);

// T x T matrix with entry (j, t) = dS_j/dA_t = s_j * (delta_jt - s_t).
// Columns sum to zero.
Tensor2D softmax_jacobian(const Tensor1D& s);

// dX_j/dV_ti = S_t if i == j else 0. Indices are 0-based.
double grad_x_wrt_v(const Tensor1D& s, size_t t, size_t i, size_t j);

// dX_j/dK_ti = S_t * Q_i * (V_tj - X_j), in the unscaled-logit convention.
double grad_x_wrt_k(const Tensor1D& q, const Tensor1D& s, const Tensor2D& v, const Tensor1D& x,
                    size_t t, size_t i, size_t j);

} // namespace qaq
