// Copyright (C) 2026 qaq authors
// SPDX-License-Identifier: Apache-2.0
//
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "qaq/attention.hpp"
#include "qaq/bit_allocator.hpp"

using namespace qaq;

TEST_CASE("value std bound, hand numbers") {
    // sigma_x_max / (sqrt(T) |s_t|): with T = 4 and s = 0.5 the factors
    // cancel and the budget passes through.
    CHECK(value_std_bound(0.5, 4, 0.02) == doctest::Approx(0.02).epsilon(1e-15));
    CHECK(value_std_bound(0.1, 16, 0.02) == doctest::Approx(0.05).epsilon(1e-14));
    CHECK(value_std_bound(0.0, 4, 0.02) == kInfBound);
    CHECK(value_std_bound(-0.5, 4, 0.02) == doctest::Approx(0.02).epsilon(1e-15));
}

TEST_CASE("key variance bound, hand numbers") {
    // T^3/(T-1) sigma^2 = 27/2 * 0.01 = 0.135, so the bound is ln(1.135).
    CHECK(key_var_bound_main(1.0, 3, 0.1) ==
          doctest::Approx(0.126632650933366).epsilon(1e-12));
    CHECK(key_var_bound_main(2.0, 3, 0.1) ==
          doctest::Approx(0.126632650933366 / 2.0).epsilon(1e-12));
    CHECK(key_var_bound_main(1.0, 1, 0.1) == kInfBound);
    CHECK(key_var_bound_main(1.0, 8, 0.0) == 0.0);
}

TEST_CASE("key variance bound grows with context length") {
    // The log argument scales with T^3/(T-1), which increases in T.
    const double b4 = key_var_bound_main(1.0, 4, 0.001);
    const double b8 = key_var_bound_main(1.0, 8, 0.001);
    const double b64 = key_var_bound_main(1.0, 64, 0.001);
    CHECK(b8 > b4);
    CHECK(b64 > b8);
}

TEST_CASE("appendix mae bound, hand numbers") {
    // Uniform two-token scores: J_t = max |s_j (delta - s_t)| = 0.25.
    Tensor1D s{0.5, 0.5};
    const double expect = std::sqrt(4e-4) / (std::sqrt(4.0) * 2.0 * 0.04 * 0.25);
    CHECK(key_mae_bound_appendix(4e-4, 4, 2, 0.04, s, 0) ==
          doctest::Approx(expect).epsilon(1e-13));
    CHECK(expect == doctest::Approx(0.5).epsilon(1e-13));

    // Zero jacobian column or zero query scale lifts the budget entirely.
    Tensor1D one{1.0};
    CHECK(key_mae_bound_appendix(4e-4, 4, 1, 0.04, one, 0) == kInfBound);
    CHECK(key_mae_bound_appendix(4e-4, 4, 2, 0.0, s, 0) == kInfBound);
}

TEST_CASE("appendix bound agrees with the dense jacobian column max") {
    Tensor1D s = softmax(Tensor1D{0.3, -1.0, 0.8, 0.1, -0.4});
    Tensor2D jac = softmax_jacobian(s);
    for (size_t t = 0; t < 5; ++t) {
        double col_max = 0.0;
        for (size_t j = 0; j < 5; ++j) {
            col_max = std::max(col_max, std::abs(jac.at(j, t)));
        }
        const double expect = std::sqrt(4e-4) / (std::sqrt(8.0) * 5.0 * 1.3 * col_max);
        CHECK(key_mae_bound_appendix(4e-4, 8, 5, 1.3, s, t) ==
              doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("query calibration takes the nearest-rank quantile") {
    std::vector<Tensor1D> queries;
    for (int i = 1; i <= 10; ++i) {
        queries.push_back(Tensor1D{std::sqrt(static_cast<double>(i))});
    }
    // ceil(0.9 * 10) = 9 even though the product floats to 9.000000000000002.
    CHECK(calibrate_query_norm(queries, 0.9).quantile_value ==
          doctest::Approx(9.0).epsilon(1e-12));
    CHECK(calibrate_query_norm(queries, 1.0).quantile_value ==
          doctest::Approx(10.0).epsilon(1e-12));
    CHECK(calibrate_query_norm(queries, 1e-9).quantile_value ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(calibrate_query_norm({}, 0.9), std::invalid_argument);
}

TEST_CASE("streaming calibration keeps a rolling reservoir") {
    QueryCalibration calib;
    calib.max_samples = 3;
    for (double v : {1.0, 2.0, 3.0, 4.0, 5.0}) {
        calib.add(v, 0.5);
    }
    CHECK(calib.samples.size() == 3);
    CHECK(calib.sample_count == 5);
    // Survivors are {3, 4, 5}; the 0.5 nearest-rank is the 2nd smallest.
    CHECK(calib.quantile_value == 4.0);
}

TEST_CASE("config validation names the offending field") {
    QuantConfig cfg;
    cfg.sigma_s_max = -1.0;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("sigma_s_max"),
                         std::invalid_argument);
    cfg = QuantConfig{};
    cfg.bmax = cfg.baseline_bits + 1;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("bmax"), std::invalid_argument);
    cfg = QuantConfig{};
    cfg.bmin = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = QuantConfig{};
    cfg.fixed_bits_k = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = QuantConfig{};
    cfg.fixed_bits_v = cfg.baseline_bits + 4;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = QuantConfig{};
    cfg.alpha = 0.6;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = QuantConfig{};
    cfg.query_quantile_p = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = QuantConfig{};
    cfg.window_n = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = QuantConfig{};
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("alpha splits across ends only in total-budget mode") {
    QuantConfig cfg;
    cfg.alpha = 0.02;
    CHECK(cfg.alpha_per_end() == 0.02);
    cfg.alpha_total_budget = true;
    CHECK(cfg.alpha_per_end() == 0.01);
}

namespace {

QueryCalibration frozen_calibration(double value) {
    QueryCalibration calib;
    calib.samples = {value};
    calib.quantile_value = value;
    calib.sample_count = 1;
    calib.freeze();
    return calib;
}

} // namespace

TEST_CASE("allocator uses stored ranges and the main variance route") {
    QuantConfig cfg;
    cfg.sigma_s_max = 0.01;
    cfg.sigma_x_max = 0.02;
    cfg.bmin = 1;
    cfg.bmax = 16;
    cfg.baseline_bits = 16;
    QueryCalibration calib = frozen_calibration(4.0);

    std::vector<std::pair<double, double>> k_ranges{{-1.0, 1.0}, {-2.0, 2.0}};
    std::vector<std::pair<double, double>> v_ranges{{-1.0, 1.0}, {-1.0, 1.0}};
    Tensor1D predicted{0.6, 0.05};
    auto bits = allocate_bits(k_ranges, v_ranges, predicted, calib, cfg, 2, 8);
    REQUIRE(bits.size() == 2);

    // Key budget is shared: sigma = sqrt(ln(8 * 1e-4 + 1) / 4), same for both
    // tokens, so the wider range gets exactly one more bit.
    const double key_sigma = std::sqrt(std::log(8.0 / 1.0 * 1e-4 + 1.0) / 4.0);
    const int expect_k0 =
        static_cast<int>(std::ceil(std::log2(2.0 / (2.0 * std::sqrt(3.0) * key_sigma))));
    CHECK(bits[0].k.bits == expect_k0);
    CHECK(bits[1].k.bits == expect_k0 + 1);

    // Value budget scales with 1 / |s|: the low-score token needs fewer bits.
    CHECK(bits[0].v.bits > bits[1].v.bits);
}

TEST_CASE("allocator appendix route varies per token") {
    QuantConfig cfg;
    cfg.key_mode = KeyMode::appendix_mae;
    cfg.e_s_max = 4e-4;
    QueryCalibration calib = frozen_calibration(1.69);

    std::vector<std::pair<double, double>> ranges{{-1.0, 1.0}, {-1.0, 1.0}, {-1.0, 1.0}};
    Tensor1D predicted{0.8, 0.15, 0.05};
    auto bits = allocate_bits(ranges, ranges, predicted, calib, cfg, 3, 8);
    // Higher predicted score -> larger jacobian column -> tighter budget.
    CHECK(bits[0].k.bits >= bits[2].k.bits);
}

TEST_CASE("fixed-bit override pins every token") {
    QuantConfig cfg;
    cfg.fixed_bits_k = 3;
    cfg.fixed_bits_v = 5;
    QueryCalibration calib; // never consulted on the fixed path
    std::vector<std::pair<double, double>> ranges{{-1.0, 1.0}, {0.0, 0.0}};
    Tensor1D predicted{0.5, 0.5};
    auto bits = allocate_bits(ranges, ranges, predicted, calib, cfg, 2, 4);
    CHECK(bits[0].k == BitChoice{3, false});
    CHECK(bits[0].v == BitChoice{5, false});
    // Degenerate ranges still collapse to the constant encoding.
    CHECK(bits[1].k == BitChoice{0, false});
    CHECK(bits[1].v == BitChoice{0, false});
}

TEST_CASE("zero output budget forces full precision values") {
    QuantConfig cfg;
    cfg.sigma_x_max = 0.0;
    cfg.sigma_s_max = 0.01;
    QueryCalibration calib = frozen_calibration(1.0);
    std::vector<std::pair<double, double>> ranges{{-1.0, 1.0}};
    Tensor1D predicted{0.0}; // even a zero score must not escape the budget
    auto bits = allocate_bits(ranges, ranges, predicted, calib, cfg, 1, 4);
    CHECK(bits[0].v.full_precision);
}

TEST_CASE("allocator validates argument lengths") {
    QuantConfig cfg;
    QueryCalibration calib = frozen_calibration(1.0);
    std::vector<std::pair<double, double>> two{{-1.0, 1.0}, {-1.0, 1.0}};
    std::vector<std::pair<double, double>> one{{-1.0, 1.0}};
    Tensor1D predicted{0.5, 0.5};
    CHECK_THROWS_AS(allocate_bits(two, one, predicted, calib, cfg, 2, 4),
                    std::invalid_argument);
}
