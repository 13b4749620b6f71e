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
 * Synthetic gate and readout noise, readout calibration and correction,
 * CNOT folding and Richardson zero-noise extrapolation.
 */

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qopt/parallel.hpp"
#include "qopt/qsim.hpp"
#include "qopt/resources.hpp"
#include "qopt/rng.hpp"

namespace qopt {

/// Depolarizing probability whose average gate fidelity is `fidelity`, for
/// a channel that applies one of the d^2 - 1 non-identity Paulis uniformly:
/// F = 1 - p d / (d + 1).
inline double depolarizing_from_fidelity(double fidelity, int qubits) {
    if (!(fidelity >= 0.0 && fidelity <= 1.0) || qubits < 1) {
        throw std::invalid_argument("fidelity must be in [0, 1]");
    }
    const double d = std::pow(2.0, qubits);
    return (1.0 - fidelity) * (d + 1.0) / d;
}

/// 99.7% single-qubit and 97.8% CNOT average fidelities.
inline constexpr double kDeviceSingleQubitFidelity = 0.997;
inline constexpr double kDeviceCnotFidelity = 0.978;

struct NoiseModel {
    /// Depolarizing probability after each single-qubit gate.
    double p1 = 0.0;
    /// Depolarizing probability after each CNOT (Toffolis are lowered first).
    double p2 = 0.0;
    /// Per measured qubit symmetric flip probability. Ignored when
    /// `readout_matrix` is set.
    std::vector<double> readout_flips;
    /// Row-stochastic 2^n x 2^n, row = prepared state, row-major.
    std::vector<double> readout_matrix;

    /// p2 ~ 0.0275, p1 ~ 0.0045.
    static NoiseModel device_like() {
        NoiseModel m;
        m.p1 = depolarizing_from_fidelity(kDeviceSingleQubitFidelity, 1);
        m.p2 = depolarizing_from_fidelity(kDeviceCnotFidelity, 2);
        return m;
    }

    bool gates_noiseless() const {
        return p1 == 0.0 && p2 == 0.0;
    }

    bool has_readout() const {
        if (!readout_matrix.empty()) {
            return true;
        }
        return std::any_of(readout_flips.begin(), readout_flips.end(), [](double f) { return f != 0.0; });
    }

    void validate() const {
        auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
        if (!in_unit(p1) || !in_unit(p2)) {
            throw std::invalid_argument("noise probabilities must lie in [0, 1]");
        }
        for (double f : readout_flips) {
            if (!in_unit(f)) {
                throw std::invalid_argument("readout flip probabilities must lie in [0, 1]");
            }
        }
        if (!readout_matrix.empty()) {
            const size_t dim = static_cast<size_t>(std::llround(std::sqrt(static_cast<double>(readout_matrix.size()))));
            if (dim * dim != readout_matrix.size() || !std::has_single_bit(dim)) {
                throw std::invalid_argument("readout matrix must be 2^n x 2^n");
            }
            for (size_t i = 0; i < dim; ++i) {
                double row = 0.0;
                for (size_t j = 0; j < dim; ++j) {
                    const double v = readout_matrix[i * dim + j];
                    if (!in_unit(v)) {
                        throw std::invalid_argument("readout matrix entries must lie in [0, 1]");
                    }
                    row += v;
                }
                if (std::abs(row - 1.0) > 1e-12) {
                    throw std::invalid_argument("readout matrix rows must sum to 1");
                }
            }
        }
    }

    /// Full readout matrix over n measured qubits; per-qubit flips are
    /// expanded as a tensor product.
    std::vector<double> readout_for(int n) const {
        const size_t dim = size_t{1} << n;
        if (!readout_matrix.empty()) {
            if (readout_matrix.size() != dim * dim) {
                throw std::invalid_argument("readout matrix does not match " + std::to_string(n) + " measured qubits");
            }
            return readout_matrix;
        }
        if (!readout_flips.empty() && static_cast<int>(readout_flips.size()) != n) {
            throw std::invalid_argument("readout flips do not match " + std::to_string(n) + " measured qubits");
        }
        std::vector<double> r(dim * dim);
        for (size_t i = 0; i < dim; ++i) {
            for (size_t j = 0; j < dim; ++j) {
                double v = 1.0;
                for (int q = 0; q < n; ++q) {
                    const double f = readout_flips.empty() ? 0.0 : readout_flips[q];
                    v *= (((i ^ j) >> q) & 1) ? f : 1.0 - f;
                }
                r[i * dim + j] = v;
            }
        }
        return r;
    }
};

namespace detail {

/// gate << 16 | qubit << 2 | pauli, pauli 1 = X, 2 = Y, 3 = Z.
inline uint64_t encode_event(size_t gate, int qubit, int pauli) {
    return (static_cast<uint64_t>(gate) << 16) | (static_cast<uint64_t>(qubit) << 2) | static_cast<uint64_t>(pauli);
}

inline void apply_pauli(StateVector &s, int qubit, int pauli) {
    if (pauli == 3 || pauli == 2) {
        apply_gate_inplace(s, Gate::z(qubit));
    }
    if (pauli == 1 || pauli == 2) {
        apply_gate_inplace(s, Gate::x(qubit));
    }
}

inline std::vector<int> default_measured(int n) {
    std::vector<int> q(n);
    std::iota(q.begin(), q.end(), 0);
    return q;
}

/// Passes each recorded outcome through the readout channel, in key order.
inline ShotOutcomes apply_readout(const ShotOutcomes &in, const NoiseModel &noise, int n, uint64_t seed) {
    if (!noise.has_readout()) {
        return in;
    }
    ShotOutcomes out;
    out.shots = in.shots;
    out.seed = in.seed;
    Rng rng(derive_seed(seed, 0x5EAD0u));
    if (noise.readout_matrix.empty()) {
        if (static_cast<int>(noise.readout_flips.size()) != n) {
            throw std::invalid_argument("readout flips do not match " + std::to_string(n) + " measured qubits");
        }
        for (const auto &[index, count] : in.counts) {
            for (uint64_t s = 0; s < count; ++s) {
                uint64_t v = index;
                for (int q = 0; q < n; ++q) {
                    if (rng.bernoulli(noise.readout_flips[q])) {
                        v ^= uint64_t{1} << q;
                    }
                }
                out.counts[v] += 1;
            }
        }
        return out;
    }
    const size_t dim = size_t{1} << n;
    const auto r = noise.readout_for(n);
    std::vector<DiscreteSampler> rows;
    rows.reserve(dim);
    for (size_t i = 0; i < dim; ++i) {
        rows.emplace_back(std::span<const double>(r.data() + i * dim, dim));
    }
    for (const auto &[index, count] : in.counts) {
        for (uint64_t s = 0; s < count; ++s) {
            out.counts[rows[index].sample(rng)] += 1;
        }
    }
    return out;
}

}  // namespace detail

/// Pauli-trajectory sampling. The circuit is lowered to {single-qubit, CNOT}
/// first; after each CNOT one of the 15 non-identity two-qubit Paulis is
/// applied with probability p2, after each single-qubit gate one of X, Y, Z
/// with probability p1. Outcomes are keyed by the integer read from
/// `measured` (measured[0] least significant; default: every circuit qubit)
/// and then passed through the readout channel.
///
/// With noiseless gates the ideal outcomes are drawn exactly as
/// sample_distribution(marginal, shots, seed) does. Otherwise trajectories
/// are drawn in fixed chunks of 4096, chunk c from Rng(derive_seed(seed, c)),
/// so results do not depend on the worker count. Readout uses its own
/// derived stream.
inline ShotOutcomes run_noisy(const Circuit &circuit, const NoiseModel &noise, uint64_t shots, uint64_t seed,
                              std::vector<int> measured = {}) {
    noise.validate();
    if (shots == 0) {
        throw std::invalid_argument("run_noisy: shots must be >= 1");
    }
    if (measured.empty()) {
        measured = detail::default_measured(circuit.num_qubits());
    }
    const Circuit lowered = decompose(circuit, GateBasis::kCnot).circuit;
    const int n_meas = static_cast<int>(measured.size());
    const StateVector ideal = simulate(lowered);
    const auto ideal_probs = marginal_probabilities(ideal, measured);
    if (noise.gates_noiseless()) {
        ShotOutcomes out = sample_distribution(ideal_probs, shots, seed);
        return detail::apply_readout(out, noise, n_meas, seed);
    }
    const auto &gates = lowered.gates();
    std::vector<size_t> cnot_sites;
    std::vector<size_t> single_sites;
    for (size_t i = 0; i < gates.size(); ++i) {
        if (gates[i].is_cnot()) {
            cnot_sites.push_back(i);
        } else if (gates[i].kind != GateKind::kGlobalPhase) {
            single_sites.push_back(i);
        }
    }
    // Ideal state before each gate, so a trajectory restarts at its first error.
    std::vector<StateVector> prefix;
    if ((gates.size() + 1) * ideal.size() <= (size_t{1} << 22)) {
        StateVector s(lowered.num_qubits());
        prefix.reserve(gates.size() + 1);
        for (const Gate &g : gates) {
            prefix.push_back(s);
            apply_gate_inplace(s, g);
        }
    }
    // Pass 1: error pattern and one uniform per trajectory, one stream per chunk.
    constexpr uint64_t kChunk = 4096;
    std::vector<std::vector<uint64_t>> pattern(shots);
    std::vector<double> draw(shots);
    parallel_for((shots + kChunk - 1) / kChunk, [&](size_t chunk) {
        Rng rng(derive_seed(seed, chunk));
        // Gaps between faulty gates are geometric.
        auto gap = [&](double p) -> size_t {
            if (p >= 1.0) {
                return 0;
            }
            const double g = std::floor(std::log1p(-rng.uniform()) / std::log1p(-p));
            return g >= 1e18 ? std::numeric_limits<size_t>::max() / 2 : static_cast<size_t>(g);
        };
        const uint64_t end = std::min<uint64_t>(shots, (chunk + 1) * kChunk);
        for (uint64_t t = chunk * kChunk; t < end; ++t) {
            std::vector<uint64_t> &events = pattern[t];
            if (noise.p2 > 0.0) {
                for (size_t j = gap(noise.p2); j < cnot_sites.size(); j += 1 + gap(noise.p2)) {
                    const Gate &g = gates[cnot_sites[j]];
                    const int which = 1 + static_cast<int>(rng.below(15));
                    if (which % 4 != 0) {
                        events.push_back(detail::encode_event(cnot_sites[j], g.controls[0], which % 4));
                    }
                    if (which / 4 != 0) {
                        events.push_back(detail::encode_event(cnot_sites[j], g.target, which / 4));
                    }
                }
            }
            if (noise.p1 > 0.0) {
                for (size_t j = gap(noise.p1); j < single_sites.size(); j += 1 + gap(noise.p1)) {
                    events.push_back(detail::encode_event(single_sites[j], gates[single_sites[j]].target,
                                                          1 + static_cast<int>(rng.below(3))));
                }
            }
            std::stable_sort(events.begin(), events.end(),
                             [](uint64_t a, uint64_t b) { return (a >> 16) < (b >> 16); });
            draw[t] = rng.uniform();
        }
    });
    // Pass 2: one simulation per distinct pattern.
    std::map<std::vector<uint64_t>, size_t> unique;
    std::vector<size_t> which(shots);
    for (uint64_t t = 0; t < shots; ++t) {
        which[t] = unique.emplace(pattern[t], unique.size()).first->second;
    }
    std::vector<const std::vector<uint64_t> *> keys(unique.size());
    for (const auto &[key, idx] : unique) {
        keys[idx] = &key;
    }
    std::vector<std::vector<double>> cumulative(unique.size());
    parallel_for(unique.size(), [&](size_t u) {
        const auto &events = *keys[u];
        std::vector<double> probs;
        if (events.empty()) {
            probs = ideal_probs;
        } else {
            const size_t first = prefix.empty() ? 0 : static_cast<size_t>(events.front() >> 16);
            StateVector s = prefix.empty() ? StateVector(lowered.num_qubits()) : prefix[first];
            size_t next = 0;
            for (size_t i = first; i < gates.size(); ++i) {
                apply_gate_inplace(s, gates[i]);
                while (next < events.size() && (events[next] >> 16) == i) {
                    detail::apply_pauli(s, static_cast<int>((events[next] >> 2) & 0x3FFF),
                                        static_cast<int>(events[next] & 3));
                    ++next;
                }
            }
            probs = marginal_probabilities(s, measured);
        }
        double total = 0.0;
        for (double &p : probs) {
            total += p;
            p = total;
        }
        for (double &p : probs) {
            p /= total;
        }
        probs.back() = 1.0;
        cumulative[u] = std::move(probs);
    });
    std::vector<uint64_t> outcome(shots);
    for (uint64_t t = 0; t < shots; ++t) {
        const auto &c = cumulative[which[t]];
        auto it = std::upper_bound(c.begin(), c.end(), draw[t]);
        outcome[t] = static_cast<uint64_t>(std::min<ptrdiff_t>(it - c.begin(), static_cast<ptrdiff_t>(c.size()) - 1));
    }
    ShotOutcomes out;
    out.shots = shots;
    out.seed = seed;
    for (uint64_t v : outcome) {
        out.counts[v] += 1;
    }
    return detail::apply_readout(out, noise, n_meas, seed);
}

/// Prepares each basis state with X gates and measures it under `noise`.
/// Row i of the result is the measured distribution for prepared state i.
inline std::vector<double> calibrate_readout(int n_qubits, const NoiseModel &noise, uint64_t shots, uint64_t seed) {
    if (n_qubits < 1 || n_qubits > 10) {
        throw std::invalid_argument("calibrate_readout: 1..10 qubits");
    }
    if (shots == 0) {
        throw std::invalid_argument("calibrate_readout: shots must be >= 1");
    }
    const size_t dim = size_t{1} << n_qubits;
    std::vector<double> r(dim * dim, 0.0);
    for (size_t i = 0; i < dim; ++i) {
        Circuit prep(n_qubits);
        for (int q = 0; q < n_qubits; ++q) {
            if ((i >> q) & 1) {
                prep.append(Gate::x(q));
            }
        }
        const auto out = run_noisy(prep, noise, shots, derive_seed(seed, i));
        for (const auto &[j, count] : out.counts) {
            r[i * dim + j] = static_cast<double>(count) / static_cast<double>(shots);
        }
    }
    return r;
}

/// Least-squares solution of R^T p = measured, negatives clipped, renormalized.
inline std::vector<double> correct_readout(std::span<const double> measured, std::span<const double> r) {
    const size_t dim = measured.size();
    if (r.size() != dim * dim) {
        throw std::invalid_argument("correct_readout: readout matrix size does not match distribution");
    }
    Eigen::MatrixXd rt(dim, dim);
    for (size_t i = 0; i < dim; ++i) {
        for (size_t j = 0; j < dim; ++j) {
            rt(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = r[i * dim + j];
        }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(rt);
    lu.setThreshold(1e-12);
    if (lu.rank() < static_cast<Eigen::Index>(dim)) {
        throw std::invalid_argument("correct_readout: readout matrix is singular");
    }
    Eigen::VectorXd b(dim);
    for (size_t k = 0; k < dim; ++k) {
        b(static_cast<Eigen::Index>(k)) = measured[k];
    }
    const Eigen::VectorXd p = rt.colPivHouseholderQr().solve(b);
    std::vector<double> out(dim);
    double total = 0.0;
    for (size_t k = 0; k < dim; ++k) {
        out[k] = std::max(0.0, p(static_cast<Eigen::Index>(k)));
        total += out[k];
    }
    if (!(total > 0.0)) {
        throw std::invalid_argument("correct_readout: corrected distribution vanished");
    }
    for (double &v : out) {
        v /= total;
    }
    return out;
}

inline double l1_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("l1_distance: size mismatch");
    }
    double d = 0.0;
    for (size_t k = 0; k < a.size(); ++k) {
        d += std::abs(a[k] - b[k]);
    }
    return d;
}

/// Every CNOT replaced by `factor` consecutive copies.
inline Circuit fold_cnots(const Circuit &circuit, int factor) {
    if (factor < 1 || factor % 2 == 0) {
        throw std::invalid_argument("fold factor must be an odd integer >= 1");
    }
    Circuit out = circuit.empty_copy();
    for (const Gate &g : circuit.gates()) {
        const int copies = g.is_cnot() ? factor : 1;
        for (int c = 0; c < copies; ++c) {
            out.append(g);
        }
    }
    return out;
}

inline uint64_t cnot_count(const Circuit &circuit) {
    uint64_t n = 0;
    for (const Gate &g : circuit.gates()) {
        n += g.is_cnot() ? 1 : 0;
    }
    return n;
}

struct Extrapolation {
    double value = 0.0;
    double unclipped = 0.0;
    bool clipped = false;
};

/// Lagrange weights at zero for the given nodes.
inline std::vector<double> richardson_weights(std::span<const double> factors) {
    std::vector<double> w(factors.size(), 1.0);
    for (size_t i = 0; i < factors.size(); ++i) {
        for (size_t j = 0; j < factors.size(); ++j) {
            if (i != j) {
                if (factors[i] == factors[j]) {
                    throw std::invalid_argument("richardson: factors must be distinct");
                }
                w[i] *= factors[j] / (factors[j] - factors[i]);
            }
        }
    }
    return w;
}

/// Quadratic through (s_k, v_k) evaluated at 0, clipped to [0, 1]. For
/// factors {1, 3, 5}: (15 v1 - 10 v3 + 3 v5) / 8.
inline Extrapolation richardson_extrapolate(std::span<const double> values,
                                            std::span<const double> factors = std::vector<double>{1.0, 3.0, 5.0}) {
    if (values.size() != 3 || factors.size() != 3) {
        throw std::invalid_argument("richardson: exactly three values and three factors");
    }
    const auto w = richardson_weights(factors);
    Extrapolation e;
    for (size_t k = 0; k < 3; ++k) {
        e.unclipped += w[k] * values[k];
    }
    e.value = std::clamp(e.unclipped, 0.0, 1.0);
    e.clipped = e.value != e.unclipped;
    return e;
}

struct MitigationOptions {
    std::vector<int> factors{1, 3, 5};
    uint64_t shots = 8192;
    uint64_t calibration_shots = 8192;
    bool readout_correction = true;
};

struct MitigationReport {
    std::vector<int> factors;
    std::vector<uint64_t> cnots;
    /// P(objective = 1) per fold before readout correction.
    std::vector<double> raw_p1;
    /// Per fold after readout correction (equal to raw_p1 when disabled).
    std::vector<double> corrected_p1;
    Extrapolation extrapolated;
    double noiseless_p1 = 0.0;
    std::vector<double> readout_estimate;
    std::vector<double> noiseless_distribution;
    /// Unfolded run.
    std::vector<double> raw_distribution;
    std::vector<double> corrected_distribution;

    double raw_error() const {
        return std::abs(raw_p1.front() - noiseless_p1);
    }
    double mitigated_error() const {
        return std::abs(extrapolated.value - noiseless_p1);
    }
};

/// Folded noisy runs of `circuit` measuring every qubit, optional readout
/// calibration and correction, and extrapolation of P(objective = 1).
inline MitigationReport run_mitigation(const Circuit &circuit, int objective_qubit, const NoiseModel &noise,
                                       const MitigationOptions &opt, uint64_t seed) {
    noise.validate();
    const int n = circuit.num_qubits();
    if (objective_qubit < 0 || objective_qubit >= n) {
        throw std::out_of_range("run_mitigation: objective qubit outside circuit");
    }
    if (n > 10) {
        throw ResourceError("run_mitigation measures every qubit; at most 10 supported");
    }
    if (opt.factors.size() != 3) {
        throw std::invalid_argument("run_mitigation: exactly three fold factors");
    }
    const DecomposedCircuit lowered = decompose(circuit, GateBasis::kCnot);
    std::vector<int> measured = detail::default_measured(n);
    const size_t dim = size_t{1} << n;
    auto p1_of = [&](std::span<const double> dist) {
        double p = 0.0;
        for (size_t k = 0; k < dim; ++k) {
            if ((k >> objective_qubit) & 1) {
                p += dist[k];
            }
        }
        return p;
    };
    MitigationReport rep;
    rep.factors = opt.factors;
    rep.noiseless_distribution = marginal_probabilities(simulate(lowered.circuit), measured);
    rep.noiseless_p1 = p1_of(rep.noiseless_distribution);
    const bool correct = opt.readout_correction && noise.has_readout();
    if (correct) {
        rep.readout_estimate = calibrate_readout(n, noise, opt.calibration_shots, derive_seed(seed, 1000));
    }
    std::vector<double> factors;
    for (size_t i = 0; i < opt.factors.size(); ++i) {
        const Circuit folded = fold_cnots(lowered.circuit, opt.factors[i]);
        rep.cnots.push_back(cnot_count(folded));
        const auto out = run_noisy(folded, noise, opt.shots, derive_seed(seed, i), measured);
        const auto raw = out.empirical_distribution(n);
        const auto fixed = correct ? correct_readout(raw, rep.readout_estimate) : raw;
        rep.raw_p1.push_back(p1_of(raw));
        rep.corrected_p1.push_back(p1_of(fixed));
        if (i == 0) {
            rep.raw_distribution = raw;
            rep.corrected_distribution = fixed;
        }
        factors.push_back(opt.factors[i]);
    }
    rep.extrapolated = richardson_extrapolate(rep.corrected_p1, factors);
    return rep;
}

}  // namespace qopt
