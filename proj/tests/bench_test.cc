// Copyright 2026 The qopt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qopt/bench.hpp"

#include <cmath>

#include "gtest/gtest.h"

using namespace qopt;

namespace {

const LognormalModel kEightPointModel{2.0, 0.10, 0.04, 300.0 / 365.0};

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

}  // namespace

TEST(mc, normal_quantile) {
    EXPECT_NEAR(normal_two_sided_quantile(0.95), 1.959963985, 1e-8);
    EXPECT_NEAR(normal_two_sided_quantile(kAeConfidence), 1.31227, 1e-4);
    EXPECT_THROW(normal_two_sided_quantile(1.0), std::invalid_argument);
}

TEST(mc, symmetric_sqrt_squares_back) {
    auto model = MultivariateLognormalModel::identical_assets(3, kEightPointModel, 0.8);
    const auto cov = model.covariance();
    const auto root = symmetric_sqrt(cov);
    EXPECT_LT((root * root - cov).norm(), 1e-14);
    EXPECT_LT((root - root.transpose()).norm(), 1e-15);
}

TEST(mc, empirical_quantile_order_statistic) {
    std::vector<double> v{5, 1, 4, 2, 3};
    EXPECT_EQ(empirical_quantile(v, 0.81), 5.0);
    EXPECT_EQ(empirical_quantile(v, 0.8), 4.0);
    EXPECT_EQ(empirical_quantile(v, 0.2), 1.0);
}

TEST(mc, deterministic_path) {
    LognormalModel flat{2.0, 1e-9, 0.04, 0.5};
    auto model = MultivariateLognormalModel::path(flat, 3);
    std::vector<int> n{1, 1, 1};
    auto r = ContinuousMonteCarlo(model, Asian{1.9}).run(1000, 3);
    double avg = 0;
    for (int k = 1; k <= 3; ++k) {
        avg += 2.0 * std::exp((0.04 - 0.5e-18) * 0.5 * k / 3) / 3;
    }
    EXPECT_NEAR(r.estimate, avg - 1.9, 1e-6);
    EXPECT_LT(r.std_error, 1e-6);
}

TEST(mc, barrier_instance_grid_mode) {
    auto model = MultivariateLognormalModel::path(kEightPointModel, 2);
    std::vector<int> n{2, 2};
    auto d = discretize_multivariate(model, n);
    Barrier spec{1.9, 2.0, BarrierKind::kKnockIn};
    double exact = 0;
    for (uint64_t i = 0; i < 4; ++i) {
        for (uint64_t j = 0; j < 4; ++j) {
            const double s1 = d.value(0, i);
            const double s2 = d.value(1, j);
            const bool hit = s1 >= 2.0 || s2 >= 2.0;
            exact += d.probabilities[i + 4 * j] * (hit ? std::max(0.0, s2 - 1.9) : 0.0);
        }
    }
    auto r = mc_price(spec, model, d, 100000, 17, McMode::kGrid);
    EXPECT_NEAR(r.estimate, exact, 4 * r.std_error);
    EXPECT_NEAR(grid_expectation(d, spec), exact, 1e-15);
}

TEST(mc, european_grid_mode_converges) {
    auto d = discretize_lognormal(kEightPointModel, 3);
    auto model = single_asset(kEightPointModel);
    auto r = mc_price(EuropeanCall{2.0}, model, d, 1000000, 5, McMode::kGrid);
    EXPECT_NEAR(r.estimate, grid_expectation(d, EuropeanCall{2.0}), 3 * r.std_error);
}

TEST(mc, european_continuous_matches_closed_form) {
    auto model = single_asset(kEightPointModel);
    auto d = discretize_lognormal(kEightPointModel, 3);
    auto r = mc_price(EuropeanCall{2.0}, model, d, 400000, 6, McMode::kContinuous);
    const double s = 0.1 * std::sqrt(300.0 / 365.0);
    const double fwd = 2.0 * std::exp(0.04 * 300.0 / 365.0);
    const double d1 = (std::log(fwd / 2.0) + 0.5 * s * s) / s;
    const double bs = fwd * normal_cdf(d1) - 2.0 * normal_cdf(d1 - s);
    EXPECT_NEAR(r.estimate, bs, 4 * r.std_error);
}

TEST(mc, correlated_basket_continuous_vs_grid) {
    auto model = MultivariateLognormalModel::identical_assets(2, kEightPointModel, 0.8);
    std::vector<int> n{4, 4};
    auto d = discretize_multivariate(model, n);
    Basket spec{{0.5, 0.5}, 2.0};
    auto cont = mc_price(spec, model, d, 200000, 7, McMode::kContinuous);
    // Discretization gap on a 16-point grid per asset is small but nonzero.
    EXPECT_NEAR(cont.estimate, grid_expectation(d, spec), 0.01);
}

TEST(mc, reproducible) {
    auto d = discretize_lognormal(kEightPointModel, 3);
    auto model = single_asset(kEightPointModel);
    for (auto mode : {McMode::kGrid, McMode::kContinuous}) {
        auto a = mc_price(EuropeanCall{2.0}, model, d, 5000, 42, mode);
        auto b = mc_price(EuropeanCall{2.0}, model, d, 5000, 42, mode);
        EXPECT_EQ(a.estimate, b.estimate);
        EXPECT_EQ(a.std_error, b.std_error);
    }
    EXPECT_THROW(mc_price(EuropeanCall{2.0}, model, d, 0, 1, McMode::kGrid), std::invalid_argument);
}

TEST(mc_error, quadrupling_paths_halves_error) {
    auto d = discretize_lognormal(kEightPointModel, 3);
    const double e1 = mc_error_at_confidence(EuropeanCall{2.0}, d, 256, 2000, kAeConfidence, 1);
    const double e4 = mc_error_at_confidence(EuropeanCall{2.0}, d, 1024, 2000, kAeConfidence, 2);
    EXPECT_GE(e4 / e1, 0.4);
    EXPECT_LE(e4 / e1, 0.6);
    EXPECT_THROW(mc_error_at_confidence(EuropeanCall{2.0}, d, 8, 99, 0.8, 1), std::invalid_argument);
}

TEST(mc_error, loglog_slope_near_half) {
    auto d = discretize_lognormal(kEightPointModel, 3);
    std::vector<double> paths, err;
    for (int m = 3; m <= 12; ++m) {
        paths.push_back(std::pow(2.0, m));
        err.push_back(mc_error_at_confidence(EuropeanCall{2.0}, d, uint64_t{1} << m, 1000, kAeConfidence, 30 + m));
    }
    const double slope = loglog_slope(paths, err);
    EXPECT_GE(slope, -0.6);
    EXPECT_LE(slope, -0.4);
}

TEST(mc_properties, interval_coverage) {
    auto d = discretize_lognormal(kEightPointModel, 3);
    const double exact = grid_expectation(d, EuropeanCall{2.0});
    GridMonteCarlo mc(d, EuropeanCall{2.0});
    constexpr int kTrials = 10000;
    int covered = 0;
    for (int t = 0; t < kTrials; ++t) {
        auto r = mc.run(500, derive_seed(9, t), 0.9);
        covered += std::abs(r.estimate - exact) <= r.half_width;
    }
    EXPECT_NEAR(covered / double(kTrials), 0.9, 0.05);
}

TEST(loglog, exact_power_law) {
    std::vector<double> x{1, 2, 4, 8};
    std::vector<double> y{3, 1.5, 0.75, 0.375};
    EXPECT_NEAR(loglog_slope(x, y), -1.0, 1e-14);
}

TEST(convergence, small_study_shapes_and_slopes) {
    auto model = MultivariateLognormalModel::identical_assets(3, kEightPointModel, 0.8);
    std::vector<int> n{2, 2, 2};
    auto a = build_basket_A(discretize_multivariate(model, n), Basket{{1.0 / 3, 1.0 / 3, 1.0 / 3}, 2.0}, {0.25});
    ConvergenceOptions opt;
    opt.m_min = 3;
    opt.m_max = 10;
    opt.trials = 1000;
    auto s = run_convergence_study(a, opt, 11);
    ASSERT_EQ(s.rows.size(), 8u);
    EXPECT_GE(s.ae_slope, -1.15);
    EXPECT_LE(s.ae_slope, -0.85);
    EXPECT_GE(s.mc_slope, -0.6);
    EXPECT_LE(s.mc_slope, -0.4);
    for (const auto &r : s.rows) {
        EXPECT_GE(r.ae_within_bound, kAeConfidence - 0.03) << "M=" << r.M;
    }
    EXPECT_GT(s.crossover, 0u);
    auto again = run_convergence_study(a, opt, 11);
    EXPECT_EQ(again.ae_slope, s.ae_slope);
    EXPECT_EQ(again.rows.back().mc_error, s.rows.back().mc_error);
}

TEST(mitigation_sweep, default_sweep_has_eight_rows) {
    MitigationSweepConfig cfg;
    MitigationOptions opt;
    opt.shots = 2000;
    auto rows = run_mitigation_sweep(cfg, NoiseModel{}, opt, 3);
    ASSERT_EQ(rows.size(), 8u);
    const double first = fixed_grid_call(cfg, 1.8).grid_value();
    const double last = fixed_grid_call(cfg, 2.5).grid_value();
    EXPECT_LT(first, last);
}
