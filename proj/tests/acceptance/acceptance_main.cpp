// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
// Release gate: one line per criterion, exit code = number of failures.
// Thresholds and sample counts are pinned here on purpose; loosening them is
// a release decision, not a refactor.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "qaq/attention.hpp"
#include "qaq/cache_engine.hpp"
#include "qaq/mc_oracle.hpp"
#include "qaq/quantizer.hpp"
#include "qaq/rng.hpp"
#include "qaq/runner.hpp"
#include "qaq/workload.hpp"

using namespace qaq;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

std::string fmt(const char* pattern, ...) {
    char buf[512];
    va_list args;
    va_start(args, pattern);
    std::vsnprintf(buf, sizeof(buf), pattern, args);
    va_end(args);
    return buf;
}

void report(int index, const char* label, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", index, label,
                detail.c_str());
    std::fflush(stdout);
    if (!pass) {
        ++g_failures;
    }
}

Tensor1D random_vec(rng::Stream& gen, size_t n) {
    Tensor1D v(n);
    for (double& x : v.data) {
        x = gen.uniform(-1.0, 1.0);
    }
    return v;
}

Tensor2D random_mat(rng::Stream& gen, size_t rows, size_t cols) {
    Tensor2D m(rows, cols);
    for (double& x : m.data) {
        x = gen.uniform(-1.0, 1.0);
    }
    return m;
}

// ---- criterion 1: analytic derivatives vs central differences ----

void criterion_1() {
    Timer timer;
    double worst = 0.0;
    for (int inst = 0; inst < 100; ++inst) {
        rng::Stream gen(101, static_cast<uint64_t>(inst));
        const size_t T = 2 + gen.below(15);
        const size_t D = 1 + gen.below(16);
        Tensor1D q = random_vec(gen, D);
        Tensor2D k = random_mat(gen, T, D);
        Tensor2D v = random_mat(gen, T, D);
        AttentionOutput base = attention_forward(q, k, v);

        Tensor2D jac = softmax_jacobian(base.s);
        Tensor2D jac_fd = finite_diff_jacobian(
            [](const Tensor1D& a) { return softmax(a); }, base.a, 1e-5);
        for (size_t j = 0; j < T; ++j) {
            for (size_t t = 0; t < T; ++t) {
                worst = std::max(worst, std::abs(jac.at(j, t) - jac_fd.at(j, t)));
            }
        }

        auto flatten = [](const Tensor2D& m) {
            Tensor1D out(m.data.size());
            out.data = m.data;
            return out;
        };
        auto unflatten = [T, D](const Tensor1D& flat) {
            Tensor2D m(T, D);
            m.data = flat.data;
            return m;
        };

        Tensor2D fd_v = finite_diff_jacobian(
            [&](const Tensor1D& flat) { return attention_forward(q, k, unflatten(flat)).x; },
            flatten(v), 1e-5);
        Tensor2D fd_k = finite_diff_jacobian(
            [&](const Tensor1D& flat) { return attention_forward(q, unflatten(flat), v).x; },
            flatten(k), 1e-5);
        for (size_t j = 0; j < D; ++j) {
            for (size_t t = 0; t < T; ++t) {
                for (size_t i = 0; i < D; ++i) {
                    const size_t col = t * D + i;
                    worst = std::max(worst, std::abs(fd_v.at(j, col) -
                                                     grad_x_wrt_v(base.s, t, i, j)));
                    worst = std::max(
                        worst, std::abs(fd_k.at(j, col) -
                                        grad_x_wrt_k(q, base.s, v, base.x, t, i, j)));
                }
            }
        }
    }
    const double secs = timer.seconds();
    report(1, "derivative oracles vs finite differences", worst <= 1e-6 && secs < 5.0,
           fmt("max abs error %.3g over 100 instances, %.1f s", worst, secs));
}

// ---- criterion 2: uniform codec error bound and spread ----

void criterion_2() {
    Timer timer;
    const double vmin = -1.3, vmax = 2.1;
    const size_t n = 100000;
    bool bound_ok = true;
    double worst_std_dev = 0.0;
    for (int bits = 1; bits <= 8; ++bits) {
        rng::Stream gen(102, static_cast<uint64_t>(bits));
        Tensor1D values(n);
        for (double& x : values.data) {
            x = gen.uniform(vmin, vmax);
        }
        auto codes = uniform_quantize(values, bits, vmin, vmax);
        QuantizedToken qt;
        qt.bits = bits;
        qt.vmin = vmin;
        qt.vmax = vmax;
        qt.codes = codes;
        qt.dim = n;
        Tensor1D recon = dequantize(qt);
        const double delta = (vmax - vmin) / std::pow(2.0, bits + 1);
        double sumsq = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double err = recon[i] - values[i];
            bound_ok = bound_ok && std::abs(err) <= delta + 1e-12;
            sumsq += err * err;
        }
        const double stddev = std::sqrt(sumsq / static_cast<double>(n - 1));
        const double target = delta / std::sqrt(3.0);
        worst_std_dev = std::max(worst_std_dev, std::abs(stddev - target) / target);
    }
    const double secs = timer.seconds();
    report(2, "uniform codec error bound and spread",
           bound_ok && worst_std_dev <= 0.05 && secs < 10.0,
           fmt("bound %s, worst std deviation %.2f%%, %.1f s", bound_ok ? "held" : "violated",
               100.0 * worst_std_dev, secs));
}

// ---- criterion 3: normal codec coefficients, quadrature and monte carlo ----

void criterion_3() {
    Timer timer;
    const auto& table = NormalCoeffTable::standard();
    double worst_quad = 0.0;
    double worst_mc = 0.0;
    bool mc_ok = true;
    for (int b = 1; b <= 8; ++b) {
        worst_quad = std::max(worst_quad, std::abs(integrate_normal_coeff(b) - table.at(b)));
        McReport r = mc_normal_quantize_mae(b, 1.0, 1000000, 103 + static_cast<uint64_t>(b));
        worst_mc = std::max(worst_mc, r.rel_error);
        mc_ok = mc_ok && r.pass;
    }
    const double secs = timer.seconds();
    report(3, "normal codec coefficient table, dual route",
           worst_quad <= 1e-4 && mc_ok && secs < 30.0,
           fmt("quadrature gap %.2g, monte carlo gap %.2f%% at n=1e6, %.1f s", worst_quad,
               100.0 * worst_mc, secs));
}

// ---- criterion 4: output variance propagation ----

void criterion_4() {
    Timer timer;
    bool all_pass = true;
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        rng::Stream gen(104, static_cast<uint64_t>(i));
        const size_t T = 2 + gen.below(15);
        Tensor1D logits(T);
        for (double& x : logits.data) {
            x = gen.uniform(-2.0, 2.0);
        }
        Tensor1D s = softmax(logits);
        std::vector<double> sigma_v(T);
        for (double& x : sigma_v) {
            x = gen.uniform(0.05, 0.3);
        }
        McReport r = mc_variance_x(s, sigma_v, 100000, 1040 + static_cast<uint64_t>(i));
        all_pass = all_pass && r.pass;
        worst = std::max(worst, r.rel_error);
    }
    const double secs = timer.seconds();
    report(4, "output variance propagation", all_pass && secs < 20.0,
           fmt("worst relative gap %.2f%% over 20 vectors at n=1e5, %.1f s", 100.0 * worst,
               secs));
}

// ---- criterion 5: lognormal moment formulas ----

void criterion_5() {
    Timer timer;
    bool all_pass = true;
    double worst = 0.0;
    for (const auto& [sigma, tol] : {std::pair{0.5, 0.01}, std::pair{1.0, 0.02}}) {
        auto reports = mc_lognormal_moments(0.0, sigma, 1000000, 105, tol);
        for (const McReport& r : reports) {
            all_pass = all_pass && r.pass;
            worst = std::max(worst, r.rel_error / r.tolerance);
        }
    }
    const double secs = timer.seconds();
    report(5, "lognormal moment formulas", all_pass && secs < 20.0,
           fmt("worst gap at %.0f%% of tolerance, n=1e6, %.1f s", 100.0 * worst, secs));
}

// ---- criterion 6: softmax ratio variance approximation ----

void criterion_6() {
    Timer timer;
    bool all_pass = true;
    double worst = 0.0;
    for (size_t T : {2, 4, 8, 16}) {
        McReport r = mc_ratio_variance(T, 0.05, 1000000, 106 + T);
        all_pass = all_pass && r.pass;
        worst = std::max(worst, r.rel_error);
    }
    const double secs = timer.seconds();
    report(6, "softmax ratio variance approximation", all_pass && secs < 60.0,
           fmt("worst relative gap %.1f%% (tolerance 20%%) at n=1e6, %.1f s", 100.0 * worst,
               secs));
}

// ---- criterion 7: score budget compliance over long runs ----

void criterion_7() {
    Timer timer;
    const double sigma_s = 3e-4;
    double min_fraction = 1.0;
    for (uint64_t seed = 701; seed <= 705; ++seed) {
        RunConfig cfg;
        cfg.workload.seed = seed;
        cfg.workload.t_max = 1000;
        // Wide heads with scaled logits: the budget chain models key noise as
        // value independent, and the deterministic midpoint codec only
        // approaches that once segments are coarse relative to the per
        // component score signal. Narrow unscaled heads flatten the softmax
        // systematically and sit outside the model.
        cfg.workload.d = 128;
        cfg.quant.scale_logits = true;
        cfg.quant.sigma_s_max = sigma_s;
        cfg.quant.sigma_x_max = 0.02;
        cfg.quant.query_quantile_p = 0.9;
        RunResult res = run_workload(cfg);
        size_t compliant = 0;
        for (const StepRow& row : res.rows) {
            const double rms =
                row.s_error_l2 / std::sqrt(static_cast<double>(row.step + 1));
            if (rms <= sigma_s) {
                ++compliant;
            }
        }
        min_fraction = std::min(
            min_fraction, static_cast<double>(compliant) / static_cast<double>(res.rows.size()));
    }
    const double secs = timer.seconds();
    report(7, "score budget compliance rate", min_fraction >= 0.9 && secs < 60.0,
           fmt("min compliant fraction %.1f%% across 5 seeds of 1000 steps, %.1f s",
               100.0 * min_fraction, secs));
}

// ---- criterion 8: adaptive allocation vs matched uniform bits ----

void criterion_8() {
    Timer timer;
    int wins = 0;
    const int trials = 50;
    for (int i = 0; i < trials; ++i) {
        RunConfig cfg;
        cfg.workload.t_max = 40;
        cfg.workload.d = 16;
        cfg.quant.alpha = 0.01;
        // Tight score budget so both arms keep accurate keys; the comparison
        // then isolates the value side, where per token allocation is the
        // whole point of the scheme.
        auto [qaq_row, uni_row] =
            sweep_point(cfg, 1e-4, 0.05, 800 + static_cast<uint64_t>(i), 0);
        if (qaq_row.avg_x_error_l2 <= uni_row.avg_x_error_l2) {
            ++wins;
        }
    }
    const double secs = timer.seconds();
    report(8, "adaptive allocation vs matched uniform bits",
           wins >= (trials * 8) / 10 && secs < 120.0,
           fmt("%d/%d trials at or below the matched baseline, %.1f s", wins, trials, secs));
}

// ---- criterion 9: outlier side storage on heavy tailed values ----

void criterion_9() {
    Timer timer;
    int wins = 0;
    for (uint64_t seed = 901; seed <= 920; ++seed) {
        RunConfig cfg;
        cfg.workload.seed = seed;
        cfg.workload.t_max = 80;
        // Wide rows so the one percent budget strips several extremes per
        // end, and a value budget tight enough that the heavy tailed rows
        // clamp at bmax: exactly the regime the side storage exists for.
        cfg.workload.d = 512;
        cfg.workload.dist = DistKind::student_t;
        cfg.workload.nu = 3;
        cfg.workload.t_scale = 0.5;
        cfg.quant.sigma_s_max = 1e-5;
        cfg.quant.sigma_x_max = 5e-4;
        cfg.quant.bmax = 8;

        cfg.quant.alpha = 0.0;
        const double base = run_workload(cfg).heads[0].mean_x_error_l2;
        cfg.quant.alpha = 0.01;
        const double with_outliers = run_workload(cfg).heads[0].mean_x_error_l2;
        if (with_outliers <= 0.7 * base) {
            ++wins;
        }
    }
    const double secs = timer.seconds();
    report(9, "outlier side storage on heavy tails", wins >= 18 && secs < 60.0,
           fmt("%d/20 seeds with >= 30%% error reduction, %.1f s", wins, secs));
}

// ---- criterion 10: score window length on spiky streams ----

struct SpikyOutcome {
    double spiker_error = 0.0;
    uint64_t fetches = 0;
};

SpikyOutcome run_spiky(uint64_t seed, int window_n) {
    WorkloadSpec spec;
    spec.seed = seed;
    spec.t_max = 60;
    spec.d = 32;
    spec.pattern = PatternKind::spiky;
    spec.spike_rate = 0.12;

    QuantConfig cfg;
    cfg.key_mode = KeyMode::appendix_mae;
    cfg.window_n = window_n;
    cfg.alpha = 0.01;

    WorkloadStream stream(spec, 0);
    CacheEngine engine(cfg);
    SpikyOutcome out;
    for (size_t s = 0; s < spec.t_max; ++s) {
        StepData step = stream.next();
        engine.step(step.q, step.k, step.v);
        for (size_t j = 0; j < stream.tokens().size(); ++j) {
            const TokenMeta& m = stream.tokens()[j];
            if (m.spiker && s >= m.spike_step && s < m.spike_step + 10) {
                out.spiker_error +=
                    std::abs(engine.last_s_hat()[j] - engine.last_exact_s()[j]);
            }
        }
    }
    out.fetches = engine.backing_fetches();
    return out;
}

void criterion_10() {
    Timer timer;
    int error_wins = 0;
    int fetch_ok = 0;
    for (uint64_t seed = 1001; seed <= 1020; ++seed) {
        SpikyOutcome wide = run_spiky(seed, 5);
        SpikyOutcome narrow = run_spiky(seed, 1);
        if (wide.spiker_error < narrow.spiker_error) {
            ++error_wins;
        }
        if (wide.fetches <= narrow.fetches) {
            ++fetch_ok;
        }
    }
    const double secs = timer.seconds();
    report(10, "score window length on spiky streams",
           error_wins >= 14 && fetch_ok >= 19 && secs < 60.0,
           fmt("%d/20 seeds with lower post-spike error, %d/20 without extra fetches, %.1f s",
               error_wins, fetch_ok, secs));
}

// ---- criterion 11: storage accounting exactness ----

void criterion_11() {
    QuantConfig cfg;
    cfg.fixed_bits_k = 2;
    cfg.fixed_bits_v = 2;
    cfg.alpha = 0.0;

    bool ok = true;
    std::string detail;
    for (const auto& [dim, total, baseline] :
         {std::tuple<size_t, uint64_t, uint64_t>{4, 96, 128},
          std::tuple<size_t, uint64_t, uint64_t>{128, 592, 4096}}) {
        CacheEngine engine(cfg);
        rng::Stream gen(111, dim);
        engine.step(random_vec(gen, dim), random_vec(gen, dim), random_vec(gen, dim));
        CacheStats st = engine.snapshot_stats();
        const bool match = st.total_quantized_bits == total &&
                           st.baseline_bits_total == baseline &&
                           st.compression_ratio ==
                               static_cast<double>(baseline) / static_cast<double>(total);
        ok = ok && match;
        detail += fmt("d=%zu: %llu/%llu bits%s ", dim,
                      static_cast<unsigned long long>(st.total_quantized_bits),
                      static_cast<unsigned long long>(st.baseline_bits_total),
                      match ? "" : " MISMATCH");
    }
    report(11, "storage accounting exactness", ok, detail);
}

// ---- criterion 12: cli byte determinism ----

int run_cmd(const std::string& cmd) {
    const int status = std::system(cmd.c_str());
    if (status == -1) {
        return -1;
    }
    return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in.good()) {
        return "<unreadable:" + p.string() + ">";
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion_12() {
    Timer timer;
    const std::string cli = QAQ_CLI_PATH;
    const fs::path dir = "acceptance_tmp";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "cfg.json") << R"({
  "workload": {"seed": 11, "t_max": 25, "d": 8, "heads": 2},
  "quant": {"sigma_s_max": 0.02, "sigma_x_max": 0.02, "alpha": 0.05},
  "sweep": {"sigma_x_grid": [0.01, 0.05]}
})";

    struct Sub {
        const char* name;
        std::string args;
        std::vector<const char*> files;
    };
    const std::string cfg = " --config " + (dir / "cfg.json").string();
    const std::vector<Sub> subs = {
        {"run", cfg, {"run.csv", "summary.json"}},
        {"sweep", cfg, {"sweep.csv"}},
        {"verify", " --seed 1", {"verify.json"}},
        {"calibrate", cfg, {"calibration.json"}},
    };

    bool ok = true;
    std::string detail;
    for (const Sub& sub : subs) {
        const fs::path a = dir / (std::string(sub.name) + "_a");
        const fs::path b = dir / (std::string(sub.name) + "_b");
        const std::string base = "\"" + cli + "\" " + sub.name + sub.args;
        const int rc_a = run_cmd("QAQ_THREADS=1 " + base + " --out " + a.string() +
                                 " > /dev/null 2>&1");
        const int rc_b = run_cmd("QAQ_THREADS=4 " + base + " --out " + b.string() +
                                 " > /dev/null 2>&1");
        bool sub_ok = rc_a == 0 && rc_b == 0;
        for (const char* file : sub.files) {
            sub_ok = sub_ok && read_file(a / file) == read_file(b / file);
        }
        ok = ok && sub_ok;
        detail += fmt("%s %s ", sub.name, sub_ok ? "ok" : "DIFFERS");
    }
    const double secs = timer.seconds();
    report(12, "cli byte determinism", ok, detail + fmt("%.1f s", secs));
}

} // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    criterion_11();
    criterion_12();
    std::printf("%d/12 criteria passed\n", 12 - g_failures);
    return g_failures;
}
