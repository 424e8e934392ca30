// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#include "qaq/workload.hpp"

#include <cmath>
#include <stdexcept>

namespace qaq {

namespace {

void normalize(Tensor1D& v) {
    double norm = l2_norm(v);
    if (norm < 1e-300) {
        v[0] = 1.0; // vanishing draw, fall back to a fixed axis
        norm = 1.0;
    }
    for (double& x : v.data) {
        x /= norm;
    }
}

} // namespace

void WorkloadSpec::validate() const {
    if (t_max == 0) {
        throw std::invalid_argument("workload.t_max must be >= 1");
    }
    if (d == 0) {
        throw std::invalid_argument("workload.d must be >= 1");
    }
    if (heads == 0) {
        throw std::invalid_argument("workload.heads must be >= 1");
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw std::invalid_argument("workload.sigma must be positive and finite");
    }
    if (nu < 1) {
        throw std::invalid_argument("workload.nu must be >= 1");
    }
    if (!(t_scale > 0.0) || !std::isfinite(t_scale)) {
        throw std::invalid_argument("workload.t_scale must be positive and finite");
    }
    if (!(spike_rate >= 0.0 && spike_rate <= 1.0)) {
        throw std::invalid_argument("workload.spike_rate must be in [0, 1]");
    }
    if (!(spike_gain >= 0.0) || !std::isfinite(spike_gain)) {
        throw std::invalid_argument("workload.spike_gain must be nonnegative and finite");
    }
    if (!std::isfinite(mu)) {
        throw std::invalid_argument("workload.mu must be finite");
    }
}

WorkloadStream::WorkloadStream(const WorkloadSpec& spec, size_t head)
    : spec_(spec), rng_(spec.seed, head), direction_(spec.d) {
    spec_.validate();
    if (head >= spec_.heads) {
        throw std::out_of_range("workload head index out of range");
    }
    for (size_t i = 0; i < spec_.d; ++i) {
        direction_[i] = rng_.normal();
    }
    normalize(direction_);
}

double WorkloadStream::dist_draw() {
    if (spec_.dist == DistKind::student_t) {
        return spec_.mu + spec_.t_scale * rng_.student_t(spec_.nu);
    }
    return rng_.normal(spec_.mu, spec_.sigma);
}

bool WorkloadStream::spike_active(size_t token, size_t step) const {
    if (token >= meta_.size() || !meta_[token].spiker) {
        return false;
    }
    const TokenMeta& m = meta_[token];
    if (step < m.spike_step) {
        return false;
    }
    return (step - m.spike_step) % 5 < 3; // 3-on/2-off duty cycle
}

StepData WorkloadStream::next() {
    const size_t d = spec_.d;
    const size_t s = step_;

    // Birth of token s. Draw order is part of the stream contract: tag, key
    // noise, affinity, value entries, then the spike lottery.
    Tensor1D tag(d);
    for (size_t i = 0; i < d; ++i) {
        tag[i] = rng_.normal();
    }
    normalize(tag);

    Tensor1D k(d);
    for (size_t i = 0; i < d; ++i) {
        k[i] = 0.15 * rng_.normal();
    }

    TokenMeta meta;
    double affinity = rng_.normal();
    if (spec_.pattern == PatternKind::spiky) {
        meta.spiker = rng_.bernoulli(spec_.spike_rate);
        if (meta.spiker) {
            // Spikers are born near the bottom of the ranking and wake up a
            // few steps later.
            affinity = -2.0 + 0.5 * rng_.normal();
            const uint64_t hi = std::max<uint64_t>(4, spec_.t_max / 3);
            meta.spike_step = s + 3 + rng_.below(hi - 3 + 1);
        }
    }
    for (size_t i = 0; i < d; ++i) {
        k[i] += affinity * direction_[i] + tag[i];
    }

    Tensor1D v(d);
    for (size_t i = 0; i < d; ++i) {
        v[i] = dist_draw();
    }

    tags_.push_back(tag);
    affinities_.push_back(affinity);
    meta_.push_back(meta);

    Tensor1D q(d);
    for (size_t i = 0; i < d; ++i) {
        q[i] = direction_[i] + 0.02 * rng_.normal();
    }
    for (size_t j = 0; j < meta_.size(); ++j) {
        if (spike_active(j, s)) {
            for (size_t i = 0; i < d; ++i) {
                q[i] += spec_.spike_gain * tags_[j][i];
            }
        }
    }

    ++step_;
    return {q, k, v};
}

std::vector<StepData> generate_workload(const WorkloadSpec& spec, size_t head) {
    WorkloadStream stream(spec, head);
    std::vector<StepData> out;
    out.reserve(spec.t_max);
    for (size_t s = 0; s < spec.t_max; ++s) {
        out.push_back(stream.next());
    }
    return out;
}

} // namespace qaq
