// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstddef>
#include <vector>

namespace qaq {

// Ring of the last n attention scores of one token. The predictor takes the
// max over the ring, so with n == 1 it degenerates to pure persistence of the
// latest score. The current step's score is part of the window.
class ScoreWindow {
public:
    explicit ScoreWindow(size_t capacity);

    // Appends s (must lie in [0, 1] up to 1e-9 slack), evicting the oldest
    // entry once full.
    void push_score(double s);

    // Max over the stored scores; throws if no score was pushed yet.
    double predicted_score() const;

    size_t filled() const { return filled_; }
    size_t capacity() const { return ring_.size(); }

    // Stored scores, oldest first; used by the engine state dump.
    std::vector<double> history() const;

private:
    std::vector<double> ring_;
    size_t head_ = 0; // next write position
    size_t filled_ = 0;
};

} // namespace qaq
