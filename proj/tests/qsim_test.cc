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

#include "qopt/qsim.hpp"

#include <cmath>
#include <numbers>

#include "gtest/gtest.h"

using namespace qopt;

namespace {

StateVector random_state(int n, uint64_t seed) {
    Rng rng(seed);
    std::vector<Complex> amps(size_t{1} << n);
    double norm = 0.0;
    for (auto &a : amps) {
        a = Complex(rng.normal(), rng.normal());
        norm += std::norm(a);
    }
    for (auto &a : amps) {
        a /= std::sqrt(norm);
    }
    return StateVector::from_amplitudes(std::move(amps));
}

std::vector<Gate> random_gates(int n, size_t count, uint64_t seed) {
    Rng rng(seed);
    std::vector<Gate> out;
    for (size_t k = 0; k < count; ++k) {
        Gate g;
        g.kind = static_cast<GateKind>(rng.below(7));
        g.target = static_cast<int>(rng.below(n));
        g.angle = (rng.uniform() - 0.5) * 7.0;
        for (int q = 0; q < n; ++q) {
            if (q != g.target && rng.bernoulli(0.3)) {
                g.controls.push_back(q);
            }
        }
        out.push_back(g);
    }
    return out;
}

}  // namespace

TEST(qsim, x_on_qubit_zero_sets_low_bit) {
    StateVector s(2);
    apply_gate_inplace(s, Gate::x(0));
    EXPECT_EQ(s[1], Complex(1.0));
    EXPECT_EQ(s[0], Complex(0.0));
}

TEST(qsim, hadamard_twice_is_identity) {
    StateVector s(1);
    apply_gate_inplace(s, Gate::h(0));
    apply_gate_inplace(s, Gate::h(0));
    EXPECT_NEAR(std::abs(s[0] - Complex(1.0)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(s[1]), 0.0, 1e-12);
}

TEST(qsim, ry_half_angle_amplitudes) {
    StateVector s(1);
    apply_gate_inplace(s, Gate::ry(0, 2 * 1.1781));
    EXPECT_NEAR(s[0].real(), std::cos(1.1781), 1e-12);
    EXPECT_NEAR(s[1].real(), std::sin(1.1781), 1e-12);
}

TEST(qsim, gate_errors) {
    StateVector s(2);
    EXPECT_THROW(apply_gate_inplace(s, Gate::x(2)), std::out_of_range);
    EXPECT_THROW(apply_gate_inplace(s, Gate::cnot(0, 0)), std::invalid_argument);
    EXPECT_THROW(apply_gate_inplace(s, Gate::cnot(-1, 0)), std::out_of_range);
    EXPECT_THROW(apply_gate_inplace(s, Gate::toffoli(1, 1, 0)), std::invalid_argument);
}

TEST(qsim, run_circuit_basics) {
    Circuit empty(3);
    auto init = random_state(3, 5);
    auto out = run_circuit(empty, init);
    for (size_t k = 0; k < init.size(); ++k) {
        EXPECT_EQ(out[k], init[k]);
    }

    Circuit xx(1);
    xx.append(Gate::x(0));
    xx.append(Gate::x(0));
    auto z = run_circuit(xx, StateVector(1));
    EXPECT_EQ(z[0], Complex(1.0));

    EXPECT_THROW(run_circuit(xx, StateVector(2)), std::invalid_argument);
}

TEST(qsim, probability_of_one) {
    StateVector one = StateVector::basis(1, 1);
    EXPECT_EQ(probability_of_one(one, 0), 1.0);
    StateVector plus(1);
    apply_gate_inplace(plus, Gate::h(0));
    EXPECT_NEAR(probability_of_one(plus, 0), 0.5, 1e-12);
    EXPECT_THROW(probability_of_one(plus, 1), std::out_of_range);
}

TEST(qsim, sample_basis_state_is_deterministic) {
    auto s = StateVector::basis(3, 5);
    auto shots = sample_shots(s, 1000, 7);
    ASSERT_EQ(shots.counts.size(), 1u);
    EXPECT_EQ(shots.counts.at(5), 1000u);
    EXPECT_EQ(bitstring(5, 3), "101");
}

TEST(qsim, sample_plus_state_concentrates) {
    StateVector s(1);
    apply_gate_inplace(s, Gate::h(0));
    auto shots = sample_shots(s, 1000000, 11);
    EXPECT_NEAR(shots.frequency_of_one(0), 0.5, 0.002);
    EXPECT_THROW(sample_shots(s, 0, 1), std::invalid_argument);
}

TEST(qsim, sampling_is_reproducible) {
    auto s = random_state(3, 1);
    auto a = sample_shots(s, 5000, 99);
    auto b = sample_shots(s, 5000, 99);
    EXPECT_EQ(a.counts, b.counts);
    uint64_t total = 0;
    for (const auto &[k, v] : a.counts) {
        total += v;
    }
    EXPECT_EQ(total, a.shots);
}

TEST(qsim_properties, norm_preserved) {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        auto s = random_state(4, seed);
        for (const auto &g : random_gates(4, 60, seed + 100)) {
            apply_gate_inplace(s, g);
        }
        EXPECT_LT(std::abs(s.norm_squared() - 1.0), 1e-10);
    }
}

TEST(qsim_properties, gate_then_inverse_is_identity) {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        auto s = random_state(4, seed);
        auto gates = random_gates(4, 30, seed + 200);
        auto t = s;
        for (const auto &g : gates) {
            apply_gate_inplace(t, g);
        }
        for (auto it = gates.rbegin(); it != gates.rend(); ++it) {
            apply_gate_inplace(t, it->inverse());
        }
        for (size_t k = 0; k < s.size(); ++k) {
            EXPECT_LT(std::abs(s[k] - t[k]), 1e-10);
        }
    }
}

TEST(qsim_properties, x_flips_bit_k_exhaustively) {
    for (int n = 1; n <= 4; ++n) {
        for (int q = 0; q < n; ++q) {
            for (uint64_t i = 0; i < (uint64_t{1} << n); ++i) {
                auto s = apply_gate(StateVector::basis(n, i), Gate::x(q));
                EXPECT_EQ(s[i ^ (uint64_t{1} << q)], Complex(1.0));
            }
        }
    }
}

TEST(qsim_properties, controlled_gate_acts_only_on_control_subspace) {
    auto s = random_state(3, 3);
    auto t = apply_gate(s, Gate::controlled_ry({2}, 0, 0.7));
    for (uint64_t k = 0; k < 4; ++k) {
        EXPECT_EQ(s[k], t[k]);
    }
}

TEST(qsim_properties, sampling_chi_square) {
    const double critical_7dof_1pct = 18.475;
    int failures = 0;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        auto s = random_state(3, seed + 40);
        auto p = s.probabilities();
        const uint64_t shots = 100000;
        auto out = sample_shots(s, shots, seed);
        double chi2 = 0.0;
        for (uint64_t k = 0; k < 8; ++k) {
            double expected = p[k] * shots;
            double seen = out.counts.count(k) ? static_cast<double>(out.counts.at(k)) : 0.0;
            chi2 += (seen - expected) * (seen - expected) / expected;
        }
        failures += chi2 > critical_7dof_1pct;
    }
    EXPECT_LE(failures, 1);
}

TEST(qsim, marginal_probabilities_order) {
    auto s = StateVector::basis(3, 0b110);
    auto m = marginal_probabilities(s, std::vector<int>{2, 1});
    EXPECT_EQ(m[3], 1.0);
    auto m2 = marginal_probabilities(s, std::vector<int>{0, 2});
    EXPECT_EQ(m2[2], 1.0);
}

TEST(qsim, global_phase_under_control) {
    StateVector s(1);
    apply_gate_inplace(s, Gate::h(0));
    Gate g = Gate::global_phase(std::numbers::pi);
    g.controls = {0};
    apply_gate_inplace(s, g);
    EXPECT_NEAR(s[1].real(), -std::numbers::sqrt2 / 2, 1e-12);
    EXPECT_NEAR(s[0].real(), std::numbers::sqrt2 / 2, 1e-12);
}
