// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "qaq/runner.hpp"

namespace {

void apply_thread_env() {
#ifdef _OPENMP
    if (const char* env = std::getenv("QAQ_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && n >= 1) {
            omp_set_num_threads(static_cast<int>(n));
        }
    }
#endif
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"quality-adaptive kv-cache quantization engine"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::string filter;
    uint64_t seed = 0;
    bool seed_given = false;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* opt = sub->add_option("--config", config_path, "json config file");
        if (needs_config) {
            opt->required();
        }
        sub->add_option("--out", out_dir, "output directory")->capture_default_str();
        sub->add_option("--seed", seed, "seed override")
            ->each([&](const std::string&) { seed_given = true; });
    };

    CLI::App* run = app.add_subcommand("run", "execute one workload, write run.csv and summary.json");
    add_common(run, true);
    CLI::App* sweep = app.add_subcommand("sweep", "budget grid with matched-bit baseline, write sweep.csv");
    add_common(sweep, true);
    CLI::App* verify = app.add_subcommand("verify", "statistical oracle suite, write verify.json");
    add_common(verify, false);
    verify->add_option("--filter", filter, "claim id filter: substring, or glob with * and ?");
    CLI::App* calibrate = app.add_subcommand("calibrate", "query-norm quantile, write calibration.json");
    add_common(calibrate, true);

    CLI11_PARSE(app, argc, argv);
    apply_thread_env();

    try {
        if (verify->parsed()) {
            return qaq::cmd_verify(filter, seed, out_dir);
        }
        qaq::RunConfig cfg = qaq::load_config(config_path);
        if (seed_given) {
            cfg.workload.seed = seed;
        }
        if (run->parsed()) {
            return qaq::cmd_run(cfg, out_dir);
        }
        if (sweep->parsed()) {
            return qaq::cmd_sweep(cfg, out_dir);
        }
        return qaq::cmd_calibrate(cfg, out_dir);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
