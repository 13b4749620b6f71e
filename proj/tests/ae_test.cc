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

#include "qopt/ae.hpp"

#include <cmath>
#include <numbers>

#include "gtest/gtest.h"

using namespace qopt;

namespace {

const LognormalModel kSmallModel{2.0, 0.40, 0.05, 40.0 / 365.0};
const LognormalModel kEightPointModel{2.0, 0.10, 0.04, 300.0 / 365.0};
constexpr double kC = 0.25;

double band(uint64_t M) {
    const double Md = static_cast<double>(M);
    return std::numbers::pi / Md + std::numbers::pi * std::numbers::pi / (Md * Md);
}

AOperator european_call() {
    return build_european_A(discretize_lognormal(kEightPointModel, 3), EuropeanCall{2.0}, {kC});
}

AOperator basket_two() {
    auto model = MultivariateLognormalModel::identical_assets(2, kEightPointModel, 0.8);
    std::vector<int> n{2, 2};
    return build_basket_A(discretize_multivariate(model, n), Basket{{0.5, 0.5}, 2.0}, {kC});
}

AOperator barrier_two() {
    auto model = MultivariateLognormalModel::path(kEightPointModel, 2);
    std::vector<int> n{2, 2};
    return build_barrier_A(discretize_multivariate(model, n), Barrier{1.9, 2.0, BarrierKind::kKnockIn}, {kC});
}

Circuit single_ry(double theta) {
    Circuit c(1);
    c.append(Gate::ry(0, 2 * theta));
    return c;
}

double mass_within(const std::vector<double> &py, double a, double width) {
    double mass = 0;
    for (uint64_t y = 0; y < py.size(); ++y) {
        if (std::abs(qpe_amplitude(y, py.size()) - a) <= width) {
            mass += py[y];
        }
    }
    return mass;
}

}  // namespace

TEST(grover, half_instance_squares_to_identity_up_to_phase) {
    Circuit a(1);
    a.append(Gate::h(0));
    auto q = build_grover(a, 0);
    // Two quarter turns make a half turn, which is -1 on the plane.
    for (uint64_t b = 0; b < 2; ++b) {
        auto s = run_circuit(q.circuit, run_circuit(q.circuit, StateVector::basis(1, b)));
        for (uint64_t k = 0; k < 2; ++k) {
            EXPECT_NEAR(std::abs(s[k] - Complex(k == b ? -1.0 : 0.0)), 0.0, 1e-10);
        }
    }
}

TEST(grover, rotation_in_two_plane) {
    auto a = european_call();
    auto q = build_grover(a);
    auto psi = simulate(a.circuit);
    const double theta = grover_angle(a.exact_P1());
    const uint64_t bit = uint64_t{1} << a.payoff_qubit;
    auto s = run_circuit(q.circuit, run_circuit(q.circuit, psi));
    // Q^2 A|0> = cos(5 theta)|psi0>|0> + sin(5 theta)|psi1>|1>.
    for (uint64_t k = 0; k < psi.size(); ++k) {
        const double scale = (k & bit) ? std::sin(5 * theta) / std::sin(theta) : std::cos(5 * theta) / std::cos(theta);
        EXPECT_NEAR(std::abs(s[k] - psi[k] * scale), 0.0, 1e-9);
    }
}

TEST(grover, fragments) {
    Circuit a(2);
    a.append(Gate::h(0));
    a.append(Gate::cnot(0, 1));
    auto q = build_grover(a, 1);
    EXPECT_EQ(q.objective_qubit, 1);
    EXPECT_EQ(q.s_psi0.gates().size(), 1u);
    // S0 = 1 - 2|0><0| up to the sign convention.
    auto s = simulate(q.s0);
    EXPECT_NEAR(s[0].real(), -1.0, 1e-12);
    auto t = run_circuit(q.s0, StateVector::basis(2, 3));
    EXPECT_NEAR(t[3].real(), 1.0, 1e-12);
    EXPECT_THROW(build_grover(a, 2), std::out_of_range);
}

TEST(grover_properties, amplification_identity_all_families) {
    for (const auto &a : {european_call(), basket_two(), barrier_two()}) {
        const double theta = grover_angle(a.exact_P1());
        std::vector<uint64_t> powers{0, 1, 2, 3, 4, 5, 6, 7, 8};
        auto p = grover_power_probabilities(a.circuit, a.payoff_qubit, powers);
        for (size_t k = 0; k < powers.size(); ++k) {
            const double s = std::sin((2.0 * powers[k] + 1) * theta);
            EXPECT_NEAR(p[k], s * s, 1e-9) << "k=" << powers[k];
        }
    }
}

TEST(qpe, zero_amplitude_gives_zero) {
    Circuit a(1);
    auto py = qpe_circuit_distribution(a, 0, 3);
    EXPECT_NEAR(py[0], 1.0, 1e-10);
    auto r = qpe_result_from_distribution(py, 3, 100, 1, AEMethod::kQpeCircuit);
    EXPECT_EQ(r.a_hat, 0.0);
    EXPECT_EQ(r.y_histogram.size(), 1u);
}

TEST(qpe, on_grid_phase_is_exact) {
    const double theta = std::numbers::pi / 8;
    auto circuit = qpe_circuit_distribution(single_ry(theta), 0, 3);
    auto analytic = qpe_analytic_distribution(theta, 3);
    EXPECT_NEAR(circuit[1] + circuit[7], 1.0, 1e-10);
    EXPECT_NEAR(analytic[1] + analytic[7], 1.0, 1e-12);
    auto r = run_qpe_ae_analytic(theta, 3, 50, 9);
    EXPECT_NEAR(r.a_hat, std::sin(theta) * std::sin(theta), 1e-15);
    for (const auto &[y, count] : r.y_histogram) {
        EXPECT_TRUE(y == 1 || y == 7);
    }
}

TEST(qpe, circuit_matches_analytic_distribution) {
    auto a = european_call();
    const double theta = grover_angle(a.exact_P1());
    for (int m = 1; m <= 4; ++m) {
        auto circuit = qpe_circuit_distribution(a.circuit, a.payoff_qubit, m);
        auto analytic = qpe_analytic_distribution(theta, m);
        double tv = 0;
        for (size_t y = 0; y < circuit.size(); ++y) {
            tv += 0.5 * std::abs(circuit[y] - analytic[y]);
        }
        EXPECT_LT(tv, 1e-9) << "m=" << m;
    }
}

TEST(qpe, sampled_histograms_close) {
    auto a = european_call();
    auto circuit = run_qpe_ae_circuit(a, 3, 100000, 4);
    auto analytic = run_qpe_ae_analytic(grover_angle(a.exact_P1()), 3, 100000, 5, &a.scaling);
    double tv = 0;
    for (uint64_t y = 0; y < 8; ++y) {
        const double p = circuit.y_histogram.contains(y) ? circuit.y_histogram.at(y) : 0;
        const double q = analytic.y_histogram.contains(y) ? analytic.y_histogram.at(y) : 0;
        tv += 0.5 * std::abs(p - q) / 100000.0;
    }
    EXPECT_LT(tv, 0.02);
    EXPECT_EQ(circuit.a_hat, analytic.a_hat);
    EXPECT_EQ(circuit.method, AEMethod::kQpeCircuit);
    EXPECT_EQ(analytic.method, AEMethod::kQpeAnalytic);
}

TEST(qpe, call_instance_concentrates_in_band) {
    auto a = european_call();
    const double exact = a.exact_P1();
    for (int m : {3, 5}) {
        auto py = qpe_circuit_distribution(a.circuit, a.payoff_qubit, m);
        EXPECT_GE(mass_within(py, exact, band(uint64_t{1} << m)), 8 / (std::numbers::pi * std::numbers::pi));
    }
    for (int m : {3, 5, 7, 9}) {
        auto py = qpe_analytic_distribution(grover_angle(exact), m);
        EXPECT_GE(mass_within(py, exact, band(uint64_t{1} << m)), 8 / (std::numbers::pi * std::numbers::pi));
    }
}

TEST(qpe, qubit_budget) {
    Circuit big(20);
    EXPECT_THROW(qpe_circuit_distribution(big, 0, 9), ResourceError);
    EXPECT_THROW(qpe_analytic_distribution(2.0, 3), std::invalid_argument);
    EXPECT_THROW(qpe_analytic_distribution(0.3, 0), std::invalid_argument);
}

TEST(qpe, tie_goes_to_smaller_y) {
    std::vector<double> py{0.0, 0.5, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0};
    // Pooled counts: y=1 and y=3 share the shots; with equal counts y=1 wins.
    auto r = qpe_result_from_distribution(py, 3, 2, 0, AEMethod::kQpeAnalytic);
    if (r.y_histogram.size() == 2) {
        EXPECT_DOUBLE_EQ(r.a_hat, qpe_amplitude(1, 8));
    }
}

TEST(qpe_properties, estimator_grid_and_payoff) {
    auto a = european_call();
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const int m = 1 + static_cast<int>(rng.below(10));
        const double theta = rng.uniform() * std::numbers::pi / 2;
        auto r = run_qpe_ae_analytic(theta, m, 1 + rng.below(20), rng.next_u64(), &a.scaling);
        const double y = r.theta_hat * static_cast<double>(r.M) / std::numbers::pi;
        EXPECT_NEAR(y, std::round(y), 1e-9);
        EXPECT_DOUBLE_EQ(r.a_hat, qpe_amplitude(static_cast<uint64_t>(std::round(y)), r.M));
        EXPECT_NEAR(r.a_hat, std::sin(r.theta_hat) * std::sin(r.theta_hat), 1e-15);
        EXPECT_NEAR(r.expected_payoff, a.post_map(r.a_hat), 1e-12);
    }
}

TEST(qpe_properties, coverage_off_grid) {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    for (int m = 2; m <= 12; ++m) {
        const uint64_t M = uint64_t{1} << m;
        const double theta = 0.713 + 0.37 * std::numbers::pi / static_cast<double>(M);
        const double a = std::sin(theta) * std::sin(theta);
        const auto py = qpe_analytic_distribution(theta, m);
        int hits = 0;
        constexpr int kRuns = 1000;
        for (int run = 0; run < kRuns; ++run) {
            auto r = qpe_result_from_distribution(py, m, 1, derive_seed(77, run), AEMethod::kQpeAnalytic);
            hits += std::abs(r.a_hat - a) <= band(M);
        }
        EXPECT_GE(hits / double(kRuns), 8 / pi2 - 0.03) << "m=" << m;
    }
}

TEST(mle, exact_hits_at_half) {
    auto s = MLESchedule::exponential(4, 1000000);
    std::vector<uint64_t> hits;
    for (auto k : s.powers) {
        const double p = std::pow(std::sin((2.0 * k + 1) * std::numbers::pi / 4), 2);
        hits.push_back(static_cast<uint64_t>(std::llround(p * s.shots)));
    }
    auto fit = mle_fit(s.powers, hits, s.shots);
    EXPECT_NEAR(fit.theta, std::numbers::pi / 4, 1e-5);
}

TEST(mle, schedule) {
    auto s = MLESchedule::exponential(3, 10);
    EXPECT_EQ(s.powers, (std::vector<uint64_t>{0, 1, 2, 4}));
    EXPECT_EQ(s.total_applications(), 7u);
    MLESchedule bad{{0, 2, 2}, 10};
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    MLESchedule none{{0}, 0};
    EXPECT_THROW(none.validate(), std::invalid_argument);
}

TEST(mle, degenerate_flag) {
    std::vector<uint64_t> powers{0, 1};
    std::vector<uint64_t> hits{0, 0};
    auto fit = mle_fit(powers, hits, 10);
    EXPECT_TRUE(fit.degenerate);
    EXPECT_NEAR(fit.theta, 0.0, 1e-4);
    hits = {3, 10};
    EXPECT_FALSE(mle_fit(powers, hits, 10).degenerate);
}

TEST(mle, small_instance_within_bootstrap) {
    auto a = build_european_A(discretize_lognormal(kSmallModel, 2), EuropeanCall{1.9}, {kC});
    auto s = MLESchedule::exponential(1, 100);
    auto p = grover_power_probabilities(a.circuit, a.payoff_qubit, s.powers);
    double sum = 0, sq = 0;
    constexpr int kSeeds = 300;
    for (int seed = 0; seed < kSeeds; ++seed) {
        auto r = run_mle_ae_from_probabilities(p, s, seed, &a.scaling);
        sum += r.a_hat;
        sq += r.a_hat * r.a_hat;
    }
    const double mean = sum / kSeeds;
    const double sd = std::sqrt(sq / kSeeds - mean * mean);
    EXPECT_LE(std::abs(a.exact_P1() - mean), 3 * sd);
    auto one = run_mle_ae(a, s, 11);
    EXPECT_LE(std::abs(one.a_hat - mean), 3 * sd);
    EXPECT_EQ(one.hits.size(), 2u);
    EXPECT_EQ(one.M, 1u);
    EXPECT_NEAR(one.expected_payoff, a.post_map(one.a_hat), 1e-12);
}

TEST(mle, deterministic_given_seed) {
    auto a = european_call();
    auto s = MLESchedule::exponential(3, 50);
    auto r1 = run_mle_ae(a, s, 5);
    auto r2 = run_mle_ae(a, s, 5);
    EXPECT_EQ(r1.hits, r2.hits);
    EXPECT_EQ(r1.a_hat, r2.a_hat);
}

TEST(mle_properties, exact_hits_recover_theta) {
    auto s = MLESchedule::exponential(5, 1000000000ULL);
    for (double theta : {0.05, 0.31, 0.62, 0.9, 1.2, 1.5}) {
        std::vector<uint64_t> hits;
        for (auto k : s.powers) {
            const double p = std::pow(std::sin((2.0 * k + 1) * theta), 2);
            hits.push_back(static_cast<uint64_t>(std::llround(p * s.shots)));
        }
        auto fit = mle_fit(s.powers, hits, s.shots);
        EXPECT_NEAR(fit.theta, theta, 1e-5) << theta;
    }
}

TEST(error_bound, scaling_in_M) {
    auto a = european_call();
    double prev = ae_error_bound(2, a.scaling);
    for (double M = 4; M <= 4096; M *= 2) {
        const double b = ae_error_bound(M, a.scaling);
        EXPECT_LT(b, prev);
        EXPECT_NEAR(b, prev / 2, 1e-15);
        prev = b;
    }
    EXPECT_NEAR(ae_error_bound(8, 0.25, 5.0, 2.0, 0.1), std::numbers::pi / 8 / 0.5 * 3 * 0.1, 1e-15);
    EXPECT_THROW(ae_error_bound(1, 0.25, 5, 2), std::invalid_argument);
}
