// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "qaq/tensor.hpp"

// Serial reference implementations, coded independently of the main kernels
// (plain loops, no OpenMP, no shared helpers beyond the tensor types). Tests
// compare the production kernels against these; the benchmark target measures
// the gap.
namespace qaq::ref {

// Naive triple-loop attention in the unscaled convention. Returns x only;
// s_out, if non-null, receives the score vector.
qaq::Tensor1D attention_naive(const qaq::Tensor1D& q, const qaq::Tensor2D& k,
                              const qaq::Tensor2D& v, bool scale = false,
                              qaq::Tensor1D* s_out = nullptr);

} // namespace qaq::ref
