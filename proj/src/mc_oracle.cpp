// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#include "qaq/mc_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "qaq/normal.hpp"
#include "qaq/quantizer.hpp"
#include "qaq/rng.hpp"

namespace qaq {

namespace {

constexpr uint64_t kChunk = uint64_t{1} << 14;

struct MomentSums {
    double sum = 0.0;
    double sumsq = 0.0;
    double sumabs = 0.0;
};

// Runs sample(stream) n times split into fixed chunks, one rng substream per
// chunk. Chunks may execute on any thread; the reduction below walks them in
// index order, so the totals are bit-identical for every thread count.
template <typename Sampler>
MomentSums chunked_moments(uint64_t n, uint64_t seed, Sampler&& sample) {
    const uint64_t nchunks = (n + kChunk - 1) / kChunk;
    std::vector<MomentSums> parts(nchunks);
#pragma omp parallel for schedule(static)
    for (int64_t c = 0; c < static_cast<int64_t>(nchunks); ++c) {
        rng::Stream stream(seed, static_cast<uint64_t>(c));
        const uint64_t count = std::min(kChunk, n - static_cast<uint64_t>(c) * kChunk);
        MomentSums part;
        for (uint64_t i = 0; i < count; ++i) {
            const double v = sample(stream);
            part.sum += v;
            part.sumsq += v * v;
            part.sumabs += std::abs(v);
        }
        parts[static_cast<size_t>(c)] = part;
    }
    MomentSums total;
    for (const MomentSums& p : parts) {
        total.sum += p.sum;
        total.sumsq += p.sumsq;
        total.sumabs += p.sumabs;
    }
    return total;
}

double sample_variance(const MomentSums& m, uint64_t n) {
    const double nn = static_cast<double>(n);
    return (m.sumsq - m.sum * m.sum / nn) / (nn - 1.0);
}

McReport make_report(std::string claim, double analytic, double empirical, uint64_t samples,
                     double tolerance, std::string metric, std::string note = "") {
    McReport r;
    r.claim = std::move(claim);
    r.analytic = analytic;
    r.empirical = empirical;
    r.samples = samples;
    r.tolerance = tolerance;
    r.metric = std::move(metric);
    r.note = std::move(note);
    const double scale = std::max(std::abs(analytic), 1e-12);
    r.rel_error = std::abs(empirical - analytic) / scale;
    if (r.metric == "rel") {
        r.pass = r.rel_error <= tolerance;
    } else if (r.metric == "abs") {
        r.pass = std::abs(empirical - analytic) <= tolerance;
    } else if (r.metric == "upper") {
        r.pass = empirical <= analytic + tolerance * scale;
    } else {
        throw std::invalid_argument("unknown report metric: " + r.metric);
    }
    return r;
}

} // namespace

McReport mc_variance_x(const Tensor1D& s, const std::vector<double>& sigma_v, uint64_t n,
                       uint64_t seed) {
    if (s.len() != sigma_v.size()) {
        throw std::invalid_argument("mc_variance_x: s and sigma_v length mismatch");
    }
    if (n < 2) {
        throw std::invalid_argument("mc_variance_x: need at least 2 samples");
    }
    double analytic = 0.0;
    for (size_t t = 0; t < s.len(); ++t) {
        analytic += s[t] * s[t] * sigma_v[t] * sigma_v[t];
    }
    auto sums = chunked_moments(n, seed, [&](rng::Stream& stream) {
        double x = 0.0;
        for (size_t t = 0; t < s.len(); ++t) {
            x += s[t] * stream.normal(0.0, sigma_v[t]);
        }
        return x;
    });
    return make_report("variance_x", analytic, sample_variance(sums, n), n, 0.03, "rel",
                       "T=" + std::to_string(s.len()));
}

std::vector<McReport> mc_lognormal_moments(double mu, double sigma, uint64_t n, uint64_t seed,
                                           double tolerance) {
    if (n < 2) {
        throw std::invalid_argument("mc_lognormal_moments: need at least 2 samples");
    }
    auto sums = chunked_moments(n, seed, [&](rng::Stream& stream) {
        return std::exp(stream.normal(mu, sigma));
    });
    const double s2 = sigma * sigma;
    const double mean_analytic = std::exp(mu + 0.5 * s2);
    const double var_analytic = std::exp(2.0 * mu + s2) * (std::exp(s2) - 1.0);
    const std::string note =
        "mu=" + std::to_string(mu) + " sigma=" + std::to_string(sigma);
    std::vector<McReport> out;
    out.push_back(make_report("lognormal_mean", mean_analytic, sums.sum / static_cast<double>(n),
                              n, tolerance, "rel", note));
    out.push_back(make_report("lognormal_variance", var_analytic, sample_variance(sums, n), n,
                              tolerance, "rel", note));
    return out;
}

McReport mc_ratio_variance(size_t T, double q_sq_sigma_k, uint64_t n, uint64_t seed) {
    if (T < 2) {
        throw std::invalid_argument("mc_ratio_variance: need T >= 2");
    }
    if (n < 2) {
        throw std::invalid_argument("mc_ratio_variance: need at least 2 samples");
    }
    const double Td = static_cast<double>(T);
    const double analytic =
        (1.0 / (Td * Td)) * (1.0 - 1.0 / Td) * (std::exp(q_sq_sigma_k) - 1.0);
    const double logit_sigma = std::sqrt(q_sq_sigma_k);
    auto sums = chunked_moments(n, seed, [&](rng::Stream& stream) {
        double maxv = -1e300;
        std::vector<double> logits(T);
        for (size_t i = 0; i < T; ++i) {
            logits[i] = stream.normal(0.0, logit_sigma);
            maxv = std::max(maxv, logits[i]);
        }
        double denom = 0.0;
        for (size_t i = 0; i < T; ++i) {
            denom += std::exp(logits[i] - maxv);
        }
        return std::exp(logits[0] - maxv) / denom;
    });
    return make_report("ratio_variance", analytic, sample_variance(sums, n), n, 0.20, "rel",
                       "T=" + std::to_string(T) + " var=" + std::to_string(q_sq_sigma_k));
}

namespace {

double simpson(double fa, double fm, double fb, double a, double b) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <typename Fn>
double adaptive_simpson(const Fn& f, double a, double b, double fa, double fm, double fb,
                        double whole, double eps, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = simpson(fa, flm, fm, a, m);
    const double right = simpson(fm, frm, fb, m, b);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * eps) {
        return left + right + delta / 15.0;
    }
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1);
}

template <typename Fn>
double integrate(const Fn& f, double a, double b, double eps) {
    if (!(a < b)) {
        return 0.0;
    }
    const double m = 0.5 * (a + b);
    const double fa = f(a);
    const double fm = f(m);
    const double fb = f(b);
    return adaptive_simpson(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), eps, 48);
}

} // namespace

double integrate_normal_coeff(int b) {
    if (b < 1 || b > 12) {
        throw std::invalid_argument("integrate_normal_coeff: bit width outside 1..12");
    }
    constexpr double kTwoPi = 6.283185307179586;
    // phi drops below 1e-18 past this point; the discarded tail mass is far
    // under the 1e-8 tolerance.
    const double tail = std::sqrt(-2.0 * (std::log(1e-18) + 0.5 * std::log(kTwoPi)));
    auto phi = [&](double x) { return std::exp(-0.5 * x * x) / std::sqrt(kTwoPi); };

    const uint64_t segments = uint64_t{1} << b;
    double total = 0.0;
    for (uint64_t i = 0; i < segments; ++i) {
        const double p_lo = static_cast<double>(i) / static_cast<double>(segments);
        const double p_hi = static_cast<double>(i + 1) / static_cast<double>(segments);
        const double lo = i == 0 ? -tail : normal::inverse_cdf(p_lo);
        const double hi = i + 1 == segments ? tail : normal::inverse_cdf(p_hi);
        const double mid = normal::inverse_cdf(0.5 * (p_lo + p_hi));
        auto integrand = [&](double x) { return std::abs(x - mid) * phi(x); };
        // The kink at the reconstruction point would stall Simpson, so each
        // segment integrates as two smooth halves.
        total += integrate(integrand, lo, mid, 1e-8 / static_cast<double>(2 * segments));
        total += integrate(integrand, mid, hi, 1e-8 / static_cast<double>(2 * segments));
    }
    return total;
}

Tensor2D finite_diff_jacobian(const std::function<Tensor1D(const Tensor1D&)>& f, const Tensor1D& x,
                              double h) {
    if (!(h > 0.0)) {
        throw std::invalid_argument("finite_diff_jacobian: step must be positive");
    }
    const size_t n = x.len();
    Tensor1D base = f(x);
    const size_t m = base.len();
    Tensor2D jac(m, n);
    for (size_t i = 0; i < n; ++i) {
        Tensor1D xp = x;
        Tensor1D xm = x;
        xp[i] += h;
        xm[i] -= h;
        Tensor1D fp = f(xp);
        Tensor1D fm = f(xm);
        if (fp.len() != m || fm.len() != m) {
            throw std::runtime_error("finite_diff_jacobian: f output length changed");
        }
        for (size_t j = 0; j < m; ++j) {
            jac.at(j, i) = (fp[j] - fm[j]) / (2.0 * h);
        }
    }
    return jac;
}

McReport mc_normal_quantize_mae(int b, double sigma, uint64_t n, uint64_t seed) {
    if (n == 0) {
        throw std::invalid_argument("mc_normal_quantize_mae: need at least 1 sample");
    }
    const double analytic = normal_coeff(b) * sigma;
    auto sums = chunked_moments(n, seed, [&](rng::Stream& stream) {
        const double x = stream.normal(0.0, sigma);
        Tensor1D one(1);
        one[0] = x;
        auto codes = normal_quantize(one, b, sigma);
        return normal_dequantize(codes, b, sigma)[0] - x;
    });
    return make_report("normal_quantize_mae_b" + std::to_string(b), analytic,
                       sums.sumabs / static_cast<double>(n), n, 0.01, "rel",
                       "sigma=" + std::to_string(sigma));
}

} // namespace qaq
