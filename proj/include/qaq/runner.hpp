// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qaq/cache_engine.hpp"
#include "qaq/mc_oracle.hpp"
#include "qaq/workload.hpp"

namespace qaq {

struct SweepConfig {
    std::vector<double> sigma_s_grid;
    std::vector<double> sigma_x_grid;
    std::vector<uint64_t> seeds; // empty -> {workload.seed}
};

struct RunConfig {
    WorkloadSpec workload;
    QuantConfig quant;
    CalibrationPolicy calibration;
    SweepConfig sweep;
};

// Strict JSON config: sections {workload, quant, calibration, sweep}, every
// field optional, unknown keys rejected by name. Schema in docs/formats.md.
RunConfig parse_config_json(const std::string& text);
RunConfig load_config(const std::string& path); // throws std::runtime_error

// One CSV row of a run; written in (head, step) order.
struct StepRow {
    size_t step = 0;
    size_t head = 0;
    double compression_ratio = 0.0;
    double s_error_l2 = 0.0;
    double x_error_l2 = 0.0;
    uint64_t backing_fetches = 0;
    double mean_bits_k = 0.0;
    double mean_bits_v = 0.0;
};

struct HeadSummary {
    size_t head = 0;
    size_t steps = 0;
    double final_compression_ratio = 0.0;
    double mean_s_error_l2 = 0.0;
    double mean_x_error_l2 = 0.0;
    uint64_t backing_fetches = 0;
    double mean_bits_k = 0.0; // time averaged
    double mean_bits_v = 0.0;
};

struct RunResult {
    std::vector<StepRow> rows;
    std::vector<HeadSummary> heads;
};

// Executes the configured workload, one engine per head. Heads run on a
// worker pool capped by QAQ_THREADS (default: hardware concurrency); results
// merge in head order, so the output is identical at any pool size.
RunResult run_workload(const RunConfig& cfg);

struct SweepRow {
    size_t grid_index = 0;
    double sigma_s_max = 0.0;
    double sigma_x_max = 0.0;
    uint64_t seed = 0;
    std::string method; // "qaq" or "uniform"
    double avg_compression_ratio = 0.0;
    double avg_s_error_l2 = 0.0;
    double avg_x_error_l2 = 0.0;
    double mean_bits_k = 0.0;
    double mean_bits_v = 0.0;
    int matched_bits_k = 0; // uniform baseline widths, echoed on both rows
    int matched_bits_v = 0;
};

// One grid point: a QAQ run, then a uniform-bit baseline at
// round(time-averaged QAQ bits) per cache with identical outlier handling.
std::pair<SweepRow, SweepRow> sweep_point(const RunConfig& cfg, double sigma_s, double sigma_x,
                                          uint64_t seed, size_t grid_index);

// The full oracle suite under fixed per-claim seeds (offset by seed). filter:
// empty = all; a pattern with * or ? = glob over claim ids; otherwise
// substring. The table parameter exists for the corrupted-table negative
// control in tests.
std::vector<McReport> run_verification(const std::string& filter, uint64_t seed,
                                       const NormalCoeffTable& table = NormalCoeffTable::standard());

// CLI entry points. Result files land under out_dir; deterministic content
// only (timings go to stderr). Each returns a process exit code.
int cmd_run(const RunConfig& cfg, const std::string& out_dir);
int cmd_sweep(const RunConfig& cfg, const std::string& out_dir);
int cmd_verify(const std::string& filter, uint64_t seed, const std::string& out_dir);
int cmd_calibrate(const RunConfig& cfg, const std::string& out_dir);

} // namespace qaq
