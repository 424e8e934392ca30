// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#include "qaq/attention_window.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace qaq {

ScoreWindow::ScoreWindow(size_t capacity) : ring_(capacity, 0.0) {
    if (capacity == 0) {
        throw std::invalid_argument("ScoreWindow: capacity must be >= 1");
    }
}

void ScoreWindow::push_score(double s) {
    if (s < -1e-9 || s > 1.0 + 1e-9) {
        throw std::invalid_argument("ScoreWindow: score " + std::to_string(s) +
                                    " outside [0, 1]");
    }
    s = std::clamp(s, 0.0, 1.0);
    ring_[head_] = s;
    head_ = (head_ + 1) % ring_.size();
    if (filled_ < ring_.size()) {
        ++filled_;
    }
}

double ScoreWindow::predicted_score() const {
    if (filled_ == 0) {
        throw std::logic_error("token has no score history");
    }
    double best = 0.0;
    for (size_t i = 0; i < filled_; ++i) {
        // With a partially filled ring the valid entries sit in [0, filled).
        best = std::max(best, ring_[i]);
    }
    return best;
}

std::vector<double> ScoreWindow::history() const {
    std::vector<double> out;
    out.reserve(filled_);
    if (filled_ < ring_.size()) {
        for (size_t i = 0; i < filled_; ++i) {
            out.push_back(ring_[i]);
        }
    } else {
        for (size_t i = 0; i < ring_.size(); ++i) {
            out.push_back(ring_[(head_ + i) % ring_.size()]);
        }
    }
    return out;
}

} // namespace qaq
