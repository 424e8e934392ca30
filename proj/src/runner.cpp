// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#include "qaq/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "qaq/attention.hpp"
#include "qaq/normal.hpp"
#include "qaq/rng.hpp"

namespace qaq {

namespace {

using nlohmann::json;

[[noreturn]] void bad_field(const std::string& name, const std::string& why) {
    throw std::runtime_error("config field " + name + " " + why);
}

double get_double(const json& v, const std::string& name) {
    if (!v.is_number()) {
        bad_field(name, "must be a number");
    }
    return v.get<double>();
}

uint64_t get_u64(const json& v, const std::string& name) {
    if (!v.is_number_unsigned()) {
        bad_field(name, "must be a nonnegative integer");
    }
    return v.get<uint64_t>();
}

int get_int(const json& v, const std::string& name) {
    if (!v.is_number_integer()) {
        bad_field(name, "must be an integer");
    }
    const int64_t x = v.get<int64_t>();
    if (x < -1000000 || x > 1000000) {
        bad_field(name, "is out of range");
    }
    return static_cast<int>(x);
}

bool get_bool(const json& v, const std::string& name) {
    if (!v.is_boolean()) {
        bad_field(name, "must be a boolean");
    }
    return v.get<bool>();
}

std::string get_string(const json& v, const std::string& name) {
    if (!v.is_string()) {
        bad_field(name, "must be a string");
    }
    return v.get<std::string>();
}

void parse_workload(const json& obj, WorkloadSpec& w) {
    for (const auto& [key, value] : obj.items()) {
        const std::string name = "workload." + key;
        if (key == "seed") {
            w.seed = get_u64(value, name);
        } else if (key == "t_max") {
            w.t_max = get_u64(value, name);
        } else if (key == "d") {
            w.d = get_u64(value, name);
        } else if (key == "heads") {
            w.heads = get_u64(value, name);
        } else if (key == "dist") {
            const std::string s = get_string(value, name);
            if (s == "normal") {
                w.dist = DistKind::normal;
            } else if (s == "student_t") {
                w.dist = DistKind::student_t;
            } else {
                bad_field(name, "must be \"normal\" or \"student_t\"");
            }
        } else if (key == "mu") {
            w.mu = get_double(value, name);
        } else if (key == "sigma") {
            w.sigma = get_double(value, name);
        } else if (key == "nu") {
            w.nu = get_int(value, name);
        } else if (key == "t_scale") {
            w.t_scale = get_double(value, name);
        } else if (key == "pattern") {
            const std::string s = get_string(value, name);
            if (s == "persistent") {
                w.pattern = PatternKind::persistent;
            } else if (s == "spiky") {
                w.pattern = PatternKind::spiky;
            } else {
                bad_field(name, "must be \"persistent\" or \"spiky\"");
            }
        } else if (key == "spike_rate") {
            w.spike_rate = get_double(value, name);
        } else if (key == "spike_gain") {
            w.spike_gain = get_double(value, name);
        } else {
            throw std::runtime_error("unknown config key: workload." + key);
        }
    }
}

void parse_quant(const json& obj, QuantConfig& q) {
    for (const auto& [key, value] : obj.items()) {
        const std::string name = "quant." + key;
        if (key == "sigma_s_max") {
            q.sigma_s_max = get_double(value, name);
        } else if (key == "sigma_x_max") {
            q.sigma_x_max = get_double(value, name);
        } else if (key == "e_s_max") {
            q.e_s_max = get_double(value, name);
        } else if (key == "alpha") {
            q.alpha = get_double(value, name);
        } else if (key == "alpha_total_budget") {
            q.alpha_total_budget = get_bool(value, name);
        } else if (key == "window_n") {
            q.window_n = get_int(value, name);
        } else if (key == "query_quantile_p") {
            q.query_quantile_p = get_double(value, name);
        } else if (key == "bmin") {
            q.bmin = get_int(value, name);
        } else if (key == "bmax") {
            q.bmax = get_int(value, name);
        } else if (key == "baseline_bits") {
            q.baseline_bits = get_int(value, name);
        } else if (key == "key_mode") {
            const std::string s = get_string(value, name);
            if (s == "main_variance") {
                q.key_mode = KeyMode::main_variance;
            } else if (s == "appendix_mae") {
                q.key_mode = KeyMode::appendix_mae;
            } else {
                bad_field(name, "must be \"main_variance\" or \"appendix_mae\"");
            }
        } else if (key == "requantize_source") {
            const std::string s = get_string(value, name);
            if (s == "in_place") {
                q.requantize_source = RequantSource::in_place;
            } else if (s == "backing_store") {
                q.requantize_source = RequantSource::backing_store;
            } else {
                bad_field(name, "must be \"in_place\" or \"backing_store\"");
            }
        } else if (key == "scale_logits") {
            q.scale_logits = get_bool(value, name);
        } else if (key == "fixed_bits_k") {
            q.fixed_bits_k = get_int(value, name);
        } else if (key == "fixed_bits_v") {
            q.fixed_bits_v = get_int(value, name);
        } else {
            throw std::runtime_error("unknown config key: quant." + key);
        }
    }
}

void parse_calibration(const json& obj, CalibrationPolicy& c) {
    for (const auto& [key, value] : obj.items()) {
        const std::string name = "calibration." + key;
        if (key == "steps") {
            c.steps = get_u64(value, name);
        } else if (key == "streaming") {
            c.streaming = get_bool(value, name);
        } else if (key == "reservoir") {
            c.reservoir = get_u64(value, name);
        } else if (key == "fixed_quantile") {
            c.fixed_quantile = get_double(value, name);
            c.has_fixed_quantile = true;
        } else {
            throw std::runtime_error("unknown config key: calibration." + key);
        }
    }
}

void parse_sweep(const json& obj, SweepConfig& s) {
    for (const auto& [key, value] : obj.items()) {
        const std::string name = "sweep." + key;
        if (key == "sigma_s_grid" || key == "sigma_x_grid") {
            if (!value.is_array()) {
                bad_field(name, "must be an array of numbers");
            }
            std::vector<double> grid;
            for (const auto& item : value) {
                grid.push_back(get_double(item, name + "[]"));
            }
            (key == "sigma_s_grid" ? s.sigma_s_grid : s.sigma_x_grid) = grid;
        } else if (key == "seeds") {
            if (!value.is_array()) {
                bad_field(name, "must be an array of nonnegative integers");
            }
            s.seeds.clear();
            for (const auto& item : value) {
                s.seeds.push_back(get_u64(item, name + "[]"));
            }
        } else {
            throw std::runtime_error("unknown config key: sweep." + key);
        }
    }
}

size_t thread_pool_size(size_t jobs) {
    size_t n = std::thread::hardware_concurrency();
    if (n == 0) {
        n = 1;
    }
    if (const char* env = std::getenv("QAQ_THREADS")) {
        char* end = nullptr;
        const long parsed = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && parsed >= 1) {
            n = static_cast<size_t>(parsed);
        }
    }
    return std::clamp<size_t>(n, 1, std::max<size_t>(jobs, 1));
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path.string());
    }
    out << content;
    if (!out) {
        throw std::runtime_error("write failed: " + path.string());
    }
}

} // namespace

RunConfig parse_config_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("config parse error: ") + e.what());
    }
    if (!root.is_object()) {
        throw std::runtime_error("config root must be a JSON object");
    }
    RunConfig cfg;
    try {
        for (const auto& [key, value] : root.items()) {
            if (!value.is_object()) {
                throw std::runtime_error("config section " + key + " must be an object");
            }
            if (key == "workload") {
                parse_workload(value, cfg.workload);
            } else if (key == "quant") {
                parse_quant(value, cfg.quant);
            } else if (key == "calibration") {
                parse_calibration(value, cfg.calibration);
            } else if (key == "sweep") {
                parse_sweep(value, cfg.sweep);
            } else {
                throw std::runtime_error("unknown config key: " + key);
            }
        }
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("config parse error: ") + e.what());
    }
    cfg.workload.validate();
    cfg.quant.validate();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open config: " + path);
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return parse_config_json(text);
    } catch (const std::invalid_argument& e) {
        // Validation failures surface as config errors with the file name.
        throw std::runtime_error(path + ": " + e.what());
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

RunResult run_workload(const RunConfig& cfg) {
    cfg.workload.validate();
    cfg.quant.validate();
    const size_t heads = cfg.workload.heads;
    std::vector<std::vector<StepRow>> head_rows(heads);
    std::vector<HeadSummary> summaries(heads);

    auto run_head = [&](size_t h) {
        WorkloadStream stream(cfg.workload, h);
        CacheEngine engine(cfg.quant, cfg.calibration);
        std::vector<StepRow>& rows = head_rows[h];
        rows.reserve(cfg.workload.t_max);
        double s_err = 0.0, x_err = 0.0, bits_k = 0.0, bits_v = 0.0;
        CacheStats st;
        for (size_t s = 0; s < cfg.workload.t_max; ++s) {
            StepData data = stream.next();
            engine.step(data.q, data.k, data.v);
            st = engine.snapshot_stats();
            rows.push_back({s, h, st.compression_ratio, st.s_error_l2, st.x_error_l2,
                            st.backing_fetches, st.mean_bits_k, st.mean_bits_v});
            s_err += st.s_error_l2;
            x_err += st.x_error_l2;
            bits_k += st.mean_bits_k;
            bits_v += st.mean_bits_v;
        }
        const double steps = static_cast<double>(cfg.workload.t_max);
        summaries[h] = {h,
                        cfg.workload.t_max,
                        st.compression_ratio,
                        s_err / steps,
                        x_err / steps,
                        st.backing_fetches,
                        bits_k / steps,
                        bits_v / steps};
    };

    const size_t pool = thread_pool_size(heads);
    if (pool <= 1 || heads <= 1) {
        for (size_t h = 0; h < heads; ++h) {
            run_head(h);
        }
    } else {
        std::atomic<size_t> next{0};
        std::exception_ptr first_error;
        std::mutex error_mutex;
        auto worker = [&] {
            for (;;) {
                const size_t h = next.fetch_add(1);
                if (h >= heads) {
                    return;
                }
                try {
                    run_head(h);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) {
                        first_error = std::current_exception();
                    }
                }
            }
        };
        std::vector<std::thread> workers;
        workers.reserve(pool);
        for (size_t i = 0; i < pool; ++i) {
            workers.emplace_back(worker);
        }
        for (std::thread& t : workers) {
            t.join();
        }
        if (first_error) {
            std::rethrow_exception(first_error);
        }
    }

    RunResult result;
    result.heads = std::move(summaries);
    for (size_t h = 0; h < heads; ++h) {
        result.rows.insert(result.rows.end(), head_rows[h].begin(), head_rows[h].end());
    }
    return result;
}

namespace {

struct SweepAggregate {
    double ratio = 0.0;
    double s_err = 0.0;
    double x_err = 0.0;
    double bits_k = 0.0;
    double bits_v = 0.0;
};

SweepAggregate aggregate_heads(const RunResult& res) {
    SweepAggregate agg;
    for (const HeadSummary& h : res.heads) {
        agg.ratio += h.final_compression_ratio;
        agg.s_err += h.mean_s_error_l2;
        agg.x_err += h.mean_x_error_l2;
        agg.bits_k += h.mean_bits_k;
        agg.bits_v += h.mean_bits_v;
    }
    const double n = static_cast<double>(res.heads.size());
    agg.ratio /= n;
    agg.s_err /= n;
    agg.x_err /= n;
    agg.bits_k /= n;
    agg.bits_v /= n;
    return agg;
}

int matched_width(double mean_bits, int baseline_bits) {
    const long r = std::lround(mean_bits);
    return static_cast<int>(std::clamp<long>(r, 1, baseline_bits));
}

} // namespace

std::pair<SweepRow, SweepRow> sweep_point(const RunConfig& cfg, double sigma_s, double sigma_x,
                                          uint64_t seed, size_t grid_index) {
    RunConfig adaptive = cfg;
    adaptive.workload.seed = seed;
    adaptive.quant.sigma_s_max = sigma_s;
    adaptive.quant.sigma_x_max = sigma_x;
    adaptive.quant.fixed_bits_k = -1;
    adaptive.quant.fixed_bits_v = -1;
    RunResult qaq_res = run_workload(adaptive);
    SweepAggregate qaq_agg = aggregate_heads(qaq_res);

    // The baseline spends the same budget everywhere: every token pinned to
    // the rounded time-averaged adaptive width, outlier handling identical.
    RunConfig uniform = adaptive;
    uniform.quant.fixed_bits_k = matched_width(qaq_agg.bits_k, cfg.quant.baseline_bits);
    uniform.quant.fixed_bits_v = matched_width(qaq_agg.bits_v, cfg.quant.baseline_bits);
    RunResult uni_res = run_workload(uniform);
    SweepAggregate uni_agg = aggregate_heads(uni_res);

    SweepRow qaq_row{grid_index, sigma_s,          sigma_x,       seed,
                     "qaq",      qaq_agg.ratio,    qaq_agg.s_err, qaq_agg.x_err,
                     qaq_agg.bits_k, qaq_agg.bits_v, uniform.quant.fixed_bits_k,
                     uniform.quant.fixed_bits_v};
    SweepRow uni_row{grid_index, sigma_s,          sigma_x,       seed,
                     "uniform",  uni_agg.ratio,    uni_agg.s_err, uni_agg.x_err,
                     uni_agg.bits_k, uni_agg.bits_v, uniform.quant.fixed_bits_k,
                     uniform.quant.fixed_bits_v};
    return {qaq_row, uni_row};
}

namespace {

bool glob_match(const char* pattern, const char* text) {
    for (; *pattern; ++pattern) {
        if (*pattern == '*') {
            while (*pattern == '*') {
                ++pattern;
            }
            if (*pattern == '\0') {
                return true;
            }
            do {
                if (glob_match(pattern, text)) {
                    return true;
                }
            } while (*text++ != '\0');
            return false;
        }
        if (*text == '\0') {
            return false;
        }
        if (*pattern != '?' && *pattern != *text) {
            return false;
        }
        ++text;
    }
    return *text == '\0';
}

bool claim_selected(const std::string& filter, const std::string& id) {
    if (filter.empty()) {
        return true;
    }
    if (filter.find('*') != std::string::npos || filter.find('?') != std::string::npos) {
        return glob_match(filter.c_str(), id.c_str());
    }
    return id.find(filter) != std::string::npos;
}

void finish_report(McReport& r) {
    const double scale = std::max(std::abs(r.analytic), 1e-12);
    r.rel_error = std::abs(r.empirical - r.analytic) / scale;
    if (r.metric == "rel") {
        r.pass = r.rel_error <= r.tolerance;
    } else if (r.metric == "abs") {
        r.pass = std::abs(r.empirical - r.analytic) <= r.tolerance;
    } else {
        r.pass = r.empirical <= r.analytic + r.tolerance * scale;
    }
}

McReport max_abs_diff_report(std::string claim, double max_diff, double tol, std::string note) {
    McReport r;
    r.claim = std::move(claim);
    r.analytic = 0.0;
    r.empirical = max_diff;
    r.tolerance = tol;
    r.metric = "abs";
    r.note = std::move(note);
    finish_report(r);
    return r;
}

} // namespace

std::vector<McReport> run_verification(const std::string& filter, uint64_t seed,
                                       const NormalCoeffTable& table) {
    struct Entry {
        std::string id;
        std::function<McReport(uint64_t)> run;
    };
    std::vector<Entry> registry;

    for (int b = 1; b <= 8; ++b) {
        registry.push_back({"coeff_quadrature_b" + std::to_string(b), [b, &table](uint64_t) {
                                McReport r;
                                r.claim = "coeff_quadrature_b" + std::to_string(b);
                                r.analytic = table.at(b);
                                r.empirical = integrate_normal_coeff(b);
                                r.tolerance = 1e-4;
                                r.metric = "abs";
                                r.note = "adaptive Simpson per segment";
                                finish_report(r);
                                return r;
                            }});
    }
    for (int b = 1; b <= 8; ++b) {
        registry.push_back({"coeff_mc_b" + std::to_string(b), [b, &table](uint64_t s) {
                                McReport r = mc_normal_quantize_mae(b, 1.0, 1000000, s);
                                r.claim = "coeff_mc_b" + std::to_string(b);
                                r.analytic = table.at(b);
                                r.tolerance = 0.01;
                                finish_report(r);
                                return r;
                            }});
    }

    registry.push_back({"variance_x_t4", [](uint64_t s) {
                            Tensor1D sc{0.4, 0.3, 0.2, 0.1};
                            std::vector<double> sv{0.1, 0.2, 0.05, 0.15};
                            McReport r = mc_variance_x(sc, sv, 200000, s);
                            r.claim = "variance_x_t4";
                            return r;
                        }});
    registry.push_back({"variance_x_t8", [](uint64_t s) {
                            rng::Stream gen(s, 9999);
                            Tensor1D logits(8);
                            for (size_t i = 0; i < 8; ++i) {
                                logits[i] = gen.uniform(-1.0, 1.0);
                            }
                            Tensor1D sc = softmax(logits);
                            std::vector<double> sv(8);
                            for (size_t i = 0; i < 8; ++i) {
                                sv[i] = 0.05 + 0.1 * gen.uniform01();
                            }
                            McReport r = mc_variance_x(sc, sv, 200000, s);
                            r.claim = "variance_x_t8";
                            return r;
                        }});

    auto lognormal_entry = [&registry](const std::string& suffix, double sigma, double tol,
                                       size_t which) {
        registry.push_back({(which == 0 ? "lognormal_mean_" : "lognormal_var_") + suffix,
                            [sigma, tol, which, suffix](uint64_t s) {
                                auto reports = mc_lognormal_moments(0.0, sigma, 1000000, s, tol);
                                McReport r = reports[which];
                                r.claim = (which == 0 ? "lognormal_mean_" : "lognormal_var_") +
                                          suffix;
                                return r;
                            }});
    };
    lognormal_entry("s05", 0.5, 0.01, 0);
    lognormal_entry("s05", 0.5, 0.01, 1);
    lognormal_entry("s1", 1.0, 0.02, 0);
    lognormal_entry("s1", 1.0, 0.02, 1);

    for (size_t T : {2, 4, 8, 16}) {
        registry.push_back({"ratio_variance_t" + std::to_string(T), [T](uint64_t s) {
                                McReport r = mc_ratio_variance(T, 0.05, 200000, s);
                                r.claim = "ratio_variance_t" + std::to_string(T);
                                return r;
                            }});
    }

    registry.push_back({"softmax_jacobian_fd", [](uint64_t s) {
                            rng::Stream gen(s, 1);
                            Tensor1D logits(6);
                            for (size_t i = 0; i < 6; ++i) {
                                logits[i] = gen.uniform(-2.0, 2.0);
                            }
                            Tensor2D jac = softmax_jacobian(softmax(logits));
                            Tensor2D fd = finite_diff_jacobian(
                                [](const Tensor1D& a) { return softmax(a); }, logits, 1e-5);
                            double diff = 0.0;
                            for (size_t i = 0; i < jac.data.size(); ++i) {
                                diff = std::max(diff, std::abs(jac.data[i] - fd.data[i]));
                            }
                            return max_abs_diff_report("softmax_jacobian_fd", diff, 1e-6,
                                                       "T=6, h=1e-5");
                        }});

    auto attention_instance = [](uint64_t s, Tensor1D& q, Tensor2D& k, Tensor2D& v) {
        rng::Stream gen(s, 2);
        const size_t T = 5, D = 4;
        q = Tensor1D(D);
        k = Tensor2D(T, D);
        v = Tensor2D(T, D);
        for (size_t i = 0; i < D; ++i) {
            q[i] = gen.uniform(-1.0, 1.0);
        }
        for (size_t t = 0; t < T; ++t) {
            for (size_t i = 0; i < D; ++i) {
                k.at(t, i) = gen.uniform(-1.0, 1.0);
                v.at(t, i) = gen.uniform(-1.0, 1.0);
            }
        }
    };

    registry.push_back({"grad_x_v_fd", [&attention_instance](uint64_t s) {
                            Tensor1D q;
                            Tensor2D k, v;
                            attention_instance(s, q, k, v);
                            AttentionOutput out = attention_forward(q, k, v);
                            const size_t t = 2, D = 4;
                            auto f = [&](const Tensor1D& row) {
                                Tensor2D vm = v;
                                for (size_t i = 0; i < D; ++i) {
                                    vm.at(t, i) = row[i];
                                }
                                return attention_forward(q, k, vm).x;
                            };
                            Tensor2D fd = finite_diff_jacobian(f, v.row(t), 1e-5);
                            double diff = 0.0;
                            for (size_t j = 0; j < D; ++j) {
                                for (size_t i = 0; i < D; ++i) {
                                    diff = std::max(diff, std::abs(fd.at(j, i) -
                                                                   grad_x_wrt_v(out.s, t, i, j)));
                                }
                            }
                            return max_abs_diff_report("grad_x_v_fd", diff, 1e-6,
                                                       "T=5 D=4 t=2, h=1e-5");
                        }});
    registry.push_back({"grad_x_k_fd", [&attention_instance](uint64_t s) {
                            Tensor1D q;
                            Tensor2D k, v;
                            attention_instance(s, q, k, v);
                            AttentionOutput out = attention_forward(q, k, v);
                            const size_t t = 1, D = 4;
                            auto f = [&](const Tensor1D& row) {
                                Tensor2D km = k;
                                for (size_t i = 0; i < D; ++i) {
                                    km.at(t, i) = row[i];
                                }
                                return attention_forward(q, km, v).x;
                            };
                            Tensor2D fd = finite_diff_jacobian(f, k.row(t), 1e-5);
                            double diff = 0.0;
                            for (size_t j = 0; j < D; ++j) {
                                for (size_t i = 0; i < D; ++i) {
                                    diff = std::max(
                                        diff, std::abs(fd.at(j, i) - grad_x_wrt_k(q, out.s, v,
                                                                                  out.x, t, i, j)));
                                }
                            }
                            return max_abs_diff_report("grad_x_k_fd", diff, 1e-6,
                                                       "T=5 D=4 t=1, h=1e-5");
                        }});

    registry.push_back({"inverse_cdf_roundtrip", [](uint64_t) {
                            // Lower-half grid mirrored by construction; the
                            // reported value is the worst relative p error.
                            double worst = 0.0;
                            const double lo = std::log(1e-8), hi = std::log(0.5);
                            for (int j = 0; j <= 400; ++j) {
                                const double p =
                                    std::exp(lo + (hi - lo) * static_cast<double>(j) / 400.0);
                                const double x = normal::inverse_cdf(p);
                                worst = std::max(worst, std::abs(normal::cdf(x) - p) / p);
                            }
                            return max_abs_diff_report("inverse_cdf_roundtrip", worst, 1e-12,
                                                       "401 log-spaced p in [1e-8, 0.5]");
                        }});

    std::vector<McReport> reports;
    for (size_t i = 0; i < registry.size(); ++i) {
        if (!claim_selected(filter, registry[i].id)) {
            continue;
        }
        reports.push_back(registry[i].run(rng::mix(seed, i)));
    }
    return reports;
}

namespace {

json summary_to_json(const RunConfig& cfg, const RunResult& res) {
    json heads = json::array();
    for (const HeadSummary& h : res.heads) {
        heads.push_back({{"head", h.head},
                         {"steps", h.steps},
                         {"final_compression_ratio", h.final_compression_ratio},
                         {"mean_s_error_l2", h.mean_s_error_l2},
                         {"mean_x_error_l2", h.mean_x_error_l2},
                         {"backing_fetches", h.backing_fetches},
                         {"mean_bits_k", h.mean_bits_k},
                         {"mean_bits_v", h.mean_bits_v}});
    }
    return json{{"workload",
                 {{"seed", cfg.workload.seed},
                  {"t_max", cfg.workload.t_max},
                  {"d", cfg.workload.d},
                  {"heads", cfg.workload.heads}}},
                {"heads", heads}};
}

std::string rows_to_csv(const std::vector<StepRow>& rows) {
    std::string csv =
        "step,head,compression_ratio,s_error_l2,x_error_l2,backing_fetches,mean_bits_k,"
        "mean_bits_v\n";
    for (const StepRow& r : rows) {
        csv += std::to_string(r.step) + "," + std::to_string(r.head) + "," +
               fmt_double(r.compression_ratio) + "," + fmt_double(r.s_error_l2) + "," +
               fmt_double(r.x_error_l2) + "," + std::to_string(r.backing_fetches) + "," +
               fmt_double(r.mean_bits_k) + "," + fmt_double(r.mean_bits_v) + "\n";
    }
    return csv;
}

json report_to_json(const McReport& r) {
    return {{"claim", r.claim},       {"analytic", r.analytic}, {"empirical", r.empirical},
            {"samples", r.samples},   {"rel_error", r.rel_error}, {"tolerance", r.tolerance},
            {"pass", r.pass},         {"metric", r.metric},     {"note", r.note}};
}

struct StderrTimer {
    const char* label;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    explicit StderrTimer(const char* l) : label(l) {}
    ~StderrTimer() {
        const double dt =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::fprintf(stderr, "%s finished in %.3f s\n", label, dt);
    }
};

} // namespace

int cmd_run(const RunConfig& cfg, const std::string& out_dir) {
    StderrTimer timer("run");
    std::filesystem::create_directories(out_dir);
    RunResult res = run_workload(cfg);
    write_text_file(std::filesystem::path(out_dir) / "run.csv", rows_to_csv(res.rows));
    write_text_file(std::filesystem::path(out_dir) / "summary.json",
                    summary_to_json(cfg, res).dump(2) + "\n");
    return 0;
}

int cmd_sweep(const RunConfig& cfg, const std::string& out_dir) {
    StderrTimer timer("sweep");
    std::filesystem::create_directories(out_dir);
    std::vector<double> s_grid = cfg.sweep.sigma_s_grid;
    std::vector<double> x_grid = cfg.sweep.sigma_x_grid;
    std::vector<uint64_t> seeds = cfg.sweep.seeds;
    if (s_grid.empty()) {
        s_grid = {cfg.quant.sigma_s_max};
    }
    if (x_grid.empty()) {
        x_grid = {cfg.quant.sigma_x_max};
    }
    if (seeds.empty()) {
        seeds = {cfg.workload.seed};
    }

    std::string csv =
        "grid_index,sigma_s_max,sigma_x_max,seed,method,avg_compression_ratio,avg_s_error_l2,"
        "avg_x_error_l2,mean_bits_k,mean_bits_v,matched_bits_k,matched_bits_v\n";
    auto append = [&csv](const SweepRow& r) {
        csv += std::to_string(r.grid_index) + "," + fmt_double(r.sigma_s_max) + "," +
               fmt_double(r.sigma_x_max) + "," + std::to_string(r.seed) + "," + r.method + "," +
               fmt_double(r.avg_compression_ratio) + "," + fmt_double(r.avg_s_error_l2) + "," +
               fmt_double(r.avg_x_error_l2) + "," + fmt_double(r.mean_bits_k) + "," +
               fmt_double(r.mean_bits_v) + "," + std::to_string(r.matched_bits_k) + "," +
               std::to_string(r.matched_bits_v) + "\n";
    };

    size_t grid_index = 0;
    for (double ss : s_grid) {
        for (double sx : x_grid) {
            for (uint64_t seed : seeds) {
                auto [qaq_row, uni_row] = sweep_point(cfg, ss, sx, seed, grid_index);
                append(qaq_row);
                append(uni_row);
            }
            ++grid_index;
        }
    }
    write_text_file(std::filesystem::path(out_dir) / "sweep.csv", csv);
    return 0;
}

int cmd_verify(const std::string& filter, uint64_t seed, const std::string& out_dir) {
    StderrTimer timer("verify");
    std::filesystem::create_directories(out_dir);
    std::vector<McReport> reports = run_verification(filter, seed);
    json out = json::array();
    bool all_pass = true;
    for (const McReport& r : reports) {
        out.push_back(report_to_json(r));
        all_pass = all_pass && r.pass;
        std::printf("[%s] %-24s analytic=%-14.8g empirical=%-14.8g rel=%.3g tol=%g %s\n",
                    r.pass ? "PASS" : "FAIL", r.claim.c_str(), r.analytic, r.empirical,
                    r.rel_error, r.tolerance, r.metric.c_str());
    }
    std::printf("%zu/%zu claims passed\n",
                static_cast<size_t>(std::count_if(reports.begin(), reports.end(),
                                                  [](const McReport& r) { return r.pass; })),
                reports.size());
    write_text_file(std::filesystem::path(out_dir) / "verify.json", out.dump(2) + "\n");
    return all_pass ? 0 : 1;
}

int cmd_calibrate(const RunConfig& cfg, const std::string& out_dir) {
    StderrTimer timer("calibrate");
    std::filesystem::create_directories(out_dir);
    std::vector<Tensor1D> queries;
    for (size_t h = 0; h < cfg.workload.heads; ++h) {
        for (const StepData& step : generate_workload(cfg.workload, h)) {
            queries.push_back(step.q);
        }
    }
    if (cfg.quant.scale_logits) {
        // Match the engine convention: the calibration quantile describes the
        // effective logit sensitivity, which includes the 1/sqrt(D) factor.
        const double inv = 1.0 / std::sqrt(static_cast<double>(cfg.workload.d));
        for (Tensor1D& q : queries) {
            for (double& x : q.data) {
                x *= inv;
            }
        }
    }
    QueryCalibration calib = calibrate_query_norm(queries, cfg.quant.query_quantile_p);
    json out = {{"quantile_value", calib.quantile_value},
                {"sample_count", calib.sample_count},
                {"p", cfg.quant.query_quantile_p}};
    write_text_file(std::filesystem::path(out_dir) / "calibration.json", out.dump(2) + "\n");
    std::printf("calibrated quantile %.17g over %zu queries\n", calib.quantile_value,
                calib.sample_count);
    return 0;
}

} // namespace qaq
