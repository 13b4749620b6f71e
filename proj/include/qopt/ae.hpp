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

/**
 * @file
 * Amplitude estimation: the Grover operator, phase-estimation AE (full
 * circuit and a closed-form outcome sampler) and maximum-likelihood AE.
 *
 * Two sample counts are in play. Phase estimation with m sampling qubits uses
 * M = 2^m. The maximum-likelihood schedule {0, 1, 2, ..., 2^{m-1}} uses
 * M = 2^m - 1 Grover applications in total.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qopt/blocks.hpp"
#include "qopt/payoff.hpp"
#include "qopt/qsim.hpp"
#include "qopt/rng.hpp"

namespace qopt {

/// Q = A S0 A^dagger S_psi0 times a global phase of -1, so that on the
/// plane spanned by the good and bad components it is a rotation by
/// 2 theta_a with a = sin^2(theta_a).
struct GroverOperator {
    Circuit circuit;
    Circuit a;
    Circuit a_inverse;
    /// 1 - 2|0><0| over every qubit of A.
    Circuit s0;
    /// Z on the objective qubit.
    Circuit s_psi0;
    int objective_qubit = -1;
    double global_phase = std::numbers::pi;
};

inline GroverOperator build_grover(const Circuit &a, int objective_qubit) {
    const int n = a.num_qubits();
    if (objective_qubit < 0 || objective_qubit >= n) {
        throw std::out_of_range("build_grover: objective qubit outside circuit");
    }
    GroverOperator g;
    g.objective_qubit = objective_qubit;
    g.a = a;
    g.a_inverse = a.inverse();
    g.s_psi0 = Circuit(n);
    g.s_psi0.append(Gate::z(objective_qubit));
    g.s0 = Circuit(n);
    for (int q = 0; q < n; ++q) {
        g.s0.append(Gate::x(q));
    }
    Gate mcz = Gate::z(n - 1);
    for (int q = 0; q < n - 1; ++q) {
        mcz.controls.push_back(q);
    }
    g.s0.append(mcz);
    for (int q = 0; q < n; ++q) {
        g.s0.append(Gate::x(q));
    }
    g.circuit = Circuit(n);
    g.circuit.append(g.s_psi0);
    g.circuit.append(g.a_inverse);
    g.circuit.append(g.s0);
    g.circuit.append(g.a);
    g.circuit.append(Gate::global_phase(g.global_phase));
    return g;
}

inline GroverOperator build_grover(const AOperator &a) {
    return build_grover(a.circuit, a.payoff_qubit);
}

enum class AEMethod { kQpeCircuit, kQpeAnalytic, kMle };

inline const char *ae_method_name(AEMethod m) {
    switch (m) {
        case AEMethod::kQpeCircuit:
            return "qpe-circuit";
        case AEMethod::kQpeAnalytic:
            return "qpe-analytic";
        case AEMethod::kMle:
            return "mle";
    }
    return "?";
}

struct AEResult {
    AEMethod method = AEMethod::kQpeAnalytic;
    double a_hat = 0.0;
    double theta_hat = 0.0;
    /// Post-mapped estimate in price units (NaN without a payoff scaling).
    double expected_payoff = std::numeric_limits<double>::quiet_NaN();
    /// Phase estimation: pi/M + pi^2/M^2. MLE: one standard error from the
    /// Fisher information at theta_hat.
    double amplitude_error_bound = 0.0;
    /// amplitude_error_bound carried to price units (NaN without scaling).
    double error_bound = std::numeric_limits<double>::quiet_NaN();
    uint64_t M = 0;
    uint64_t shots = 0;
    uint64_t seed = 0;
    /// Phase estimation outcomes y -> count.
    std::map<uint64_t, uint64_t> y_histogram;
    /// MLE powers and hit counts.
    std::vector<uint64_t> powers;
    std::vector<uint64_t> hits;
    /// MLE with every h_k in {0, N}.
    bool degenerate = false;
};

namespace detail {

inline void attach_payoff(AEResult &r, const PayoffScaling *scaling) {
    if (scaling == nullptr) {
        return;
    }
    const PostMap pm = make_post_map(*scaling);
    r.expected_payoff = pm(r.a_hat);
    r.error_bound = pm.slope * r.amplitude_error_bound;
}

inline void check_sampling_qubits(int m) {
    if (m < 1 || m > 24) {
        throw std::invalid_argument("sampling qubits must be in [1, 24]");
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Phase estimation.

/// Full phase-estimation circuit: A on the first qubits, m sampling qubits
/// after them, controlled Q^(2^j) on sampling qubit j, inverse QFT.
inline Circuit qpe_circuit(const Circuit &a, int objective_qubit, int m) {
    detail::check_sampling_qubits(m);
    const int n = a.num_qubits();
    const auto q = build_grover(a, objective_qubit);
    Circuit full(n + m);
    full.append(a);
    std::vector<int> sampling(m);
    for (int j = 0; j < m; ++j) {
        sampling[j] = n + j;
        full.append(Gate::h(n + j));
    }
    Circuit wide_q = q.circuit;
    wide_q.grow(m);
    for (int j = 0; j < m; ++j) {
        const Circuit cq = wide_q.controlled_on(n + j);
        for (uint64_t r = 0; r < (uint64_t{1} << j); ++r) {
            full.append(cq);
        }
    }
    full.append(build_inverse_qft(m), sampling);
    return full;
}

/// Exact distribution of y read from the sampling qubits of qpe_circuit.
inline std::vector<double> qpe_circuit_distribution(const Circuit &a, int objective_qubit, int m) {
    detail::check_sampling_qubits(m);
    const int n = a.num_qubits();
    if (n + m > kMaxSimulatedQubits) {
        throw ResourceError("phase estimation needs " + std::to_string(n + m) + " qubits, limit is " +
                            std::to_string(kMaxSimulatedQubits));
    }
    std::vector<int> sampling(m);
    for (int j = 0; j < m; ++j) {
        sampling[j] = n + j;
    }
    return marginal_probabilities(simulate(qpe_circuit(a, objective_qubit, m)), sampling);
}

/// Closed-form y distribution for Grover angle theta:
/// P(y) = (F(y - M theta/pi) + F(y + M theta/pi)) / 2 with the Fejer kernel
/// F(d) = sin^2(pi d) / (M^2 sin^2(pi d / M)).
inline std::vector<double> qpe_analytic_distribution(double theta, int m) {
    detail::check_sampling_qubits(m);
    if (!(theta >= 0.0 && theta <= std::numbers::pi / 2)) {
        throw std::invalid_argument("theta must lie in [0, pi/2]");
    }
    const uint64_t M = uint64_t{1} << m;
    const double Md = static_cast<double>(M);
    auto fejer = [&](double d) {
        const double den = std::sin(std::numbers::pi * d / Md);
        if (std::abs(den) < 1e-14) {
            return 1.0;
        }
        const double num = std::sin(std::numbers::pi * d);
        return num * num / (Md * Md * den * den);
    };
    const double shift = Md * theta / std::numbers::pi;
    std::vector<double> p(M);
    double total = 0.0;
    for (uint64_t y = 0; y < M; ++y) {
        const double yd = static_cast<double>(y);
        p[y] = 0.5 * (fejer(yd - shift) + fejer(yd + shift));
        total += p[y];
    }
    for (double &v : p) {
        v /= total;
    }
    return p;
}

inline double qpe_amplitude(uint64_t y, uint64_t M) {
    const double s = std::sin(static_cast<double>(y) * std::numbers::pi / static_cast<double>(M));
    return s * s;
}

/// Samples `shots` outcomes and reports the most frequent estimate. y and
/// M - y give the same estimate and are pooled; ties go to the smaller y.
inline AEResult qpe_result_from_distribution(std::span<const double> py, int m, uint64_t shots, uint64_t seed,
                                             AEMethod method, const PayoffScaling *scaling = nullptr) {
    const uint64_t M = uint64_t{1} << m;
    if (py.size() != M) {
        throw std::invalid_argument("outcome distribution size must be 2^m");
    }
    if (shots == 0) {
        throw std::invalid_argument("shots must be >= 1");
    }
    AEResult r;
    r.method = method;
    r.M = M;
    r.shots = shots;
    r.seed = seed;
    r.y_histogram = sample_distribution(py, shots, seed).counts;
    std::map<uint64_t, uint64_t> pooled;
    for (const auto &[y, count] : r.y_histogram) {
        pooled[std::min(y, M - y)] += count;
    }
    uint64_t best_y = 0;
    uint64_t best_count = 0;
    for (const auto &[y, count] : pooled) {
        if (count > best_count) {
            best_count = count;
            best_y = y;
        }
    }
    r.theta_hat = static_cast<double>(best_y) * std::numbers::pi / static_cast<double>(M);
    r.a_hat = qpe_amplitude(best_y, M);
    const double Md = static_cast<double>(M);
    r.amplitude_error_bound = std::numbers::pi / Md + std::numbers::pi * std::numbers::pi / (Md * Md);
    detail::attach_payoff(r, scaling);
    return r;
}

inline AEResult run_qpe_ae_circuit(const AOperator &a, int m, uint64_t shots, uint64_t seed) {
    const auto py = qpe_circuit_distribution(a.circuit, a.payoff_qubit, m);
    return qpe_result_from_distribution(py, m, shots, seed, AEMethod::kQpeCircuit, &a.scaling);
}

inline AEResult run_qpe_ae_analytic(double theta, int m, uint64_t shots, uint64_t seed,
                                    const PayoffScaling *scaling = nullptr) {
    const auto py = qpe_analytic_distribution(theta, m);
    return qpe_result_from_distribution(py, m, shots, seed, AEMethod::kQpeAnalytic, scaling);
}

/// theta_a = arcsin(sqrt(a)).
inline double grover_angle(double a) {
    return std::asin(std::sqrt(std::clamp(a, 0.0, 1.0)));
}

// ---------------------------------------------------------------------------
// Maximum-likelihood AE.

struct MLESchedule {
    std::vector<uint64_t> powers;
    uint64_t shots = 100;

    /// {0, 1, 2, 4, ..., 2^(m-1)}.
    static MLESchedule exponential(int m, uint64_t shots) {
        if (m < 0 || m > 30) {
            throw std::invalid_argument("MLE schedule exponent must be in [0, 30]");
        }
        MLESchedule s;
        s.shots = shots;
        s.powers.push_back(0);
        for (int j = 0; j < m; ++j) {
            s.powers.push_back(uint64_t{1} << j);
        }
        s.validate();
        return s;
    }

    void validate() const {
        if (powers.empty()) {
            throw std::invalid_argument("MLE schedule needs at least one power");
        }
        for (size_t k = 1; k < powers.size(); ++k) {
            if (powers[k] <= powers[k - 1]) {
                throw std::invalid_argument("MLE powers must be strictly increasing");
            }
        }
        if (shots == 0) {
            throw std::invalid_argument("MLE shots must be >= 1");
        }
    }

    /// Total Grover applications, sum of powers.
    uint64_t total_applications() const {
        uint64_t t = 0;
        for (auto k : powers) {
            t += k;
        }
        return t;
    }
};

/// Q^k A as one circuit.
inline Circuit grover_power_circuit(const Circuit &a, int objective_qubit, uint64_t k) {
    const auto q = build_grover(a, objective_qubit);
    Circuit out = a;
    for (uint64_t j = 0; j < k; ++j) {
        out.append(q.circuit);
    }
    return out;
}

/// P(objective = 1) after Q^k A|0> for each power, from the statevector.
inline std::vector<double> grover_power_probabilities(const Circuit &a, int objective_qubit,
                                                      std::span<const uint64_t> powers) {
    const auto q = build_grover(a, objective_qubit);
    StateVector s = simulate(a);
    std::vector<double> out;
    uint64_t applied = 0;
    for (uint64_t k : powers) {
        if (k < applied) {
            throw std::invalid_argument("powers must be nondecreasing");
        }
        for (; applied < k; ++applied) {
            run_circuit_inplace(q.circuit, s);
        }
        out.push_back(probability_of_one(s, objective_qubit));
    }
    return out;
}

/// Log-likelihood of theta for hits h_k out of N at powers k.
inline double mle_log_likelihood(double theta, std::span<const uint64_t> powers, std::span<const uint64_t> hits,
                                 uint64_t shots) {
    constexpr double kFloor = 1e-300;
    double ll = 0.0;
    for (size_t j = 0; j < powers.size(); ++j) {
        const double angle = static_cast<double>(2 * powers[j] + 1) * theta;
        const double s = std::sin(angle);
        const double c = std::cos(angle);
        const double h = static_cast<double>(hits[j]);
        const double miss = static_cast<double>(shots) - h;
        if (h > 0) {
            ll += h * std::log(std::max(s * s, kFloor));
        }
        if (miss > 0) {
            ll += miss * std::log(std::max(c * c, kFloor));
        }
    }
    return ll;
}

struct MLEFit {
    double theta = 0.0;
    bool degenerate = false;
};

/// Dense grid over [0, pi/2] (spacing below pi / (8 max(2k+1))) followed by
/// golden-section refinement around the best grid point.
inline MLEFit mle_fit(std::span<const uint64_t> powers, std::span<const uint64_t> hits, uint64_t shots,
                      size_t min_grid = 100001) {
    if (powers.size() != hits.size() || powers.empty()) {
        throw std::invalid_argument("mle_fit: one hit count per power required");
    }
    MLEFit fit;
    fit.degenerate = true;
    for (auto h : hits) {
        if (h != 0 && h != shots) {
            fit.degenerate = false;
        }
    }
    const double top = std::numbers::pi / 2;
    const double kmax = static_cast<double>(2 * powers.back() + 1);
    const size_t grid = std::max<size_t>(min_grid, static_cast<size_t>(std::ceil(8.0 * kmax * 4.0)) + 1);
    const double step = top / static_cast<double>(grid - 1);
    size_t best = 0;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < grid; ++i) {
        const double ll = mle_log_likelihood(step * static_cast<double>(i), powers, hits, shots);
        if (ll > best_ll) {
            best_ll = ll;
            best = i;
        }
    }
    double lo = step * static_cast<double>(best == 0 ? 0 : best - 1);
    double hi = std::min(top, step * static_cast<double>(best + 1));
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = mle_log_likelihood(x1, powers, hits, shots);
    double f2 = mle_log_likelihood(x2, powers, hits, shots);
    for (int it = 0; it < 80 && hi - lo > 1e-15; ++it) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = mle_log_likelihood(x2, powers, hits, shots);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = mle_log_likelihood(x1, powers, hits, shots);
        }
    }
    const double refined = 0.5 * (lo + hi);
    fit.theta = mle_log_likelihood(refined, powers, hits, shots) >= best_ll ? refined : step * static_cast<double>(best);
    return fit;
}

/// MLE from known per-power probabilities: draws h_k ~ Binomial(N, p_k) with
/// one derived stream per power.
inline AEResult run_mle_ae_from_probabilities(std::span<const double> p_k, const MLESchedule &schedule, uint64_t seed,
                                              const PayoffScaling *scaling = nullptr) {
    schedule.validate();
    if (p_k.size() != schedule.powers.size()) {
        throw std::invalid_argument("one probability per power required");
    }
    AEResult r;
    r.method = AEMethod::kMle;
    r.powers = schedule.powers;
    r.shots = schedule.shots;
    r.seed = seed;
    r.M = schedule.total_applications();
    for (size_t j = 0; j < p_k.size(); ++j) {
        Rng rng(derive_seed(seed, j));
        r.hits.push_back(rng.binomial(schedule.shots, p_k[j]));
    }
    const auto fit = mle_fit(r.powers, r.hits, r.shots);
    r.degenerate = fit.degenerate;
    r.theta_hat = fit.theta;
    r.a_hat = std::sin(fit.theta) * std::sin(fit.theta);
    double info = 0.0;
    for (auto k : r.powers) {
        const double w = static_cast<double>(2 * k + 1);
        info += 4.0 * w * w * static_cast<double>(r.shots);
    }
    r.amplitude_error_bound = std::abs(std::sin(2.0 * fit.theta)) / std::sqrt(info);
    detail::attach_payoff(r, scaling);
    return r;
}

inline AEResult run_mle_ae(const AOperator &a, const MLESchedule &schedule, uint64_t seed) {
    const auto p = grover_power_probabilities(a.circuit, a.payoff_qubit, schedule.powers);
    return run_mle_ae_from_probabilities(p, schedule, seed, &a.scaling);
}

}  // namespace qopt
