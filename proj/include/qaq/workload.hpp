// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <vector>

#include "qaq/rng.hpp"
#include "qaq/tensor.hpp"

namespace qaq {

enum class DistKind { normal, student_t };
enum class PatternKind { persistent, spiky };

struct WorkloadSpec {
    uint64_t seed = 1;
    size_t t_max = 64;
    size_t d = 16;
    size_t heads = 1;
    DistKind dist = DistKind::normal;
    double mu = 0.0;
    double sigma = 1.0;
    int nu = 3;           // student_t dof
    double t_scale = 1.0; // student_t scale
    PatternKind pattern = PatternKind::persistent;
    double spike_rate = 0.1;
    double spike_gain = 5.0;

    void validate() const;
};

struct StepData {
    Tensor1D q, k, v;
};

struct TokenMeta {
    bool spiker = false;
    size_t spike_step = 0; // first step the boost is active (when spiker)
};

// Deterministic synthetic decode stream for one head; head h of seed s draws
// from substream mix(s, h).
//
// Every token carries an affinity along a shared query direction plus a
// private unit tag; the query follows the shared direction with small noise,
// so scores and their ranking stay nearly constant over time. In spiky mode
// some tokens are born unimportant and later get their tag added to the
// query with spike_gain, on a 3-on/2-off duty cycle, which yanks their score
// from the bottom ranks to the top: the exception pattern the window
// predictor has to catch.
class WorkloadStream {
public:
    WorkloadStream(const WorkloadSpec& spec, size_t head);

    StepData next();
    size_t produced() const { return step_; }
    const std::vector<TokenMeta>& tokens() const { return meta_; }
    bool spike_active(size_t token, size_t step) const;

private:
    double dist_draw();

    WorkloadSpec spec_;
    rng::Stream rng_;
    size_t step_ = 0;
    Tensor1D direction_;             // shared unit query direction
    std::vector<Tensor1D> tags_;     // per-token unit tags
    std::vector<double> affinities_; // per-token alignment with direction_
    std::vector<TokenMeta> meta_;
};

// Materialized stream, mostly for tests.
std::vector<StepData> generate_workload(const WorkloadSpec& spec, size_t head);

} // namespace qaq
