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
 * Dense statevector simulation: gates, circuits, exact probabilities and
 * shot sampling.
 *
 * Bit convention: qubit k is bit k of the basis index (qubit 0 least
 * significant), everywhere in the library.
 */

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qopt/rng.hpp"

namespace qopt {

using Complex = std::complex<double>;

/// Largest register the dense simulator will allocate.
inline constexpr int kMaxSimulatedQubits = 28;

/// A request exceeds the simulator's qubit or memory budget.
class ResourceError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

enum class GateKind : uint8_t {
    kX,
    kH,
    kZ,
    kRx,
    kRy,
    kRz,
    kPhase,
    /// Multiplies the (controlled) subspace by exp(i*angle). Has no target.
    kGlobalPhase,
};

inline const char *gate_kind_name(GateKind kind) {
    switch (kind) {
        case GateKind::kX:
            return "X";
        case GateKind::kH:
            return "H";
        case GateKind::kZ:
            return "Z";
        case GateKind::kRx:
            return "RX";
        case GateKind::kRy:
            return "RY";
        case GateKind::kRz:
            return "RZ";
        case GateKind::kPhase:
            return "P";
        case GateKind::kGlobalPhase:
            return "GPHASE";
    }
    return "?";
}

/// A single-qubit operation with any number of (on-|1>) controls.
/// CNOT and Toffoli are X with one or two controls.
struct Gate {
    GateKind kind = GateKind::kX;
    int target = 0;
    double angle = 0.0;
    std::vector<int> controls;

    static Gate x(int t) {
        return {GateKind::kX, t, 0.0, {}};
    }
    static Gate h(int t) {
        return {GateKind::kH, t, 0.0, {}};
    }
    static Gate z(int t) {
        return {GateKind::kZ, t, 0.0, {}};
    }
    static Gate rx(int t, double theta) {
        return {GateKind::kRx, t, theta, {}};
    }
    static Gate ry(int t, double theta) {
        return {GateKind::kRy, t, theta, {}};
    }
    static Gate rz(int t, double theta) {
        return {GateKind::kRz, t, theta, {}};
    }
    static Gate phase(int t, double phi) {
        return {GateKind::kPhase, t, phi, {}};
    }
    static Gate global_phase(double phi) {
        return {GateKind::kGlobalPhase, -1, phi, {}};
    }
    static Gate cnot(int c, int t) {
        return {GateKind::kX, t, 0.0, {c}};
    }
    static Gate toffoli(int c0, int c1, int t) {
        return {GateKind::kX, t, 0.0, {c0, c1}};
    }
    static Gate controlled_ry(std::vector<int> controls, int t, double theta) {
        return {GateKind::kRy, t, theta, std::move(controls)};
    }
    static Gate multi_controlled(Gate inner, std::span<const int> extra_controls) {
        inner.controls.insert(inner.controls.end(), extra_controls.begin(), extra_controls.end());
        return inner;
    }

    bool is_cnot() const {
        return kind == GateKind::kX && controls.size() == 1;
    }
    bool is_toffoli() const {
        return kind == GateKind::kX && controls.size() == 2;
    }

    Gate inverse() const {
        Gate g = *this;
        switch (kind) {
            case GateKind::kX:
            case GateKind::kH:
            case GateKind::kZ:
                break;
            default:
                g.angle = -angle;
        }
        return g;
    }
};

/// 2x2 matrix of the gate's single-qubit action, row-major.
inline std::array<Complex, 4> gate_matrix(const Gate &g) {
    const double half = g.angle / 2.0;
    const Complex i(0.0, 1.0);
    switch (g.kind) {
        case GateKind::kX:
            return {0.0, 1.0, 1.0, 0.0};
        case GateKind::kH: {
            const double s = std::numbers::sqrt2 / 2.0;
            return {s, s, s, -s};
        }
        case GateKind::kZ:
            return {1.0, 0.0, 0.0, -1.0};
        case GateKind::kRx:
            return {std::cos(half), -i * std::sin(half), -i * std::sin(half), std::cos(half)};
        case GateKind::kRy:
            return {std::cos(half), -std::sin(half), std::sin(half), std::cos(half)};
        case GateKind::kRz:
            return {std::exp(-i * half), 0.0, 0.0, std::exp(i * half)};
        case GateKind::kPhase:
            return {1.0, 0.0, 0.0, std::exp(i * g.angle)};
        case GateKind::kGlobalPhase:
            return {std::exp(i * g.angle), 0.0, 0.0, std::exp(i * g.angle)};
    }
    throw std::logic_error("gate_matrix: unknown kind");
}

/// Throws unless every index is inside [0, n_qubits) and controls are
/// distinct from each other and from the target.
inline void validate_gate(const Gate &g, int n_qubits) {
    auto in_range = [&](int q) { return q >= 0 && q < n_qubits; };
    if (g.kind != GateKind::kGlobalPhase && !in_range(g.target)) {
        throw std::out_of_range("gate target " + std::to_string(g.target) + " outside register of " +
                                std::to_string(n_qubits) + " qubits");
    }
    for (size_t k = 0; k < g.controls.size(); ++k) {
        int c = g.controls[k];
        if (!in_range(c)) {
            throw std::out_of_range("gate control " + std::to_string(c) + " outside register of " +
                                    std::to_string(n_qubits) + " qubits");
        }
        if (g.kind != GateKind::kGlobalPhase && c == g.target) {
            throw std::invalid_argument("gate control overlaps target " + std::to_string(c));
        }
        for (size_t j = 0; j < k; ++j) {
            if (g.controls[j] == c) {
                throw std::invalid_argument("duplicate control " + std::to_string(c));
            }
        }
    }
}

class StateVector {
   public:
    /// |0...0> on n qubits.
    explicit StateVector(int n_qubits) : n_qubits_(n_qubits) {
        if (n_qubits < 0) {
            throw std::invalid_argument("StateVector: negative qubit count");
        }
        if (n_qubits > kMaxSimulatedQubits) {
            throw ResourceError("StateVector: " + std::to_string(n_qubits) + " qubits exceeds the limit of " +
                                std::to_string(kMaxSimulatedQubits));
        }
        amplitudes_.assign(size_t{1} << n_qubits, Complex(0.0, 0.0));
        amplitudes_[0] = 1.0;
    }

    static StateVector basis(int n_qubits, uint64_t index) {
        StateVector s(n_qubits);
        if (index >= s.size()) {
            throw std::out_of_range("StateVector::basis: index outside register");
        }
        s.amplitudes_[0] = 0.0;
        s.amplitudes_[index] = 1.0;
        return s;
    }

    static StateVector from_amplitudes(std::vector<Complex> amplitudes) {
        size_t len = amplitudes.size();
        if (len == 0 || (len & (len - 1)) != 0) {
            throw std::invalid_argument("StateVector: amplitude count must be a power of two");
        }
        int n = std::countr_zero(len);
        StateVector s(n);
        s.amplitudes_ = std::move(amplitudes);
        return s;
    }

    int num_qubits() const {
        return n_qubits_;
    }
    size_t size() const {
        return amplitudes_.size();
    }
    std::span<const Complex> amplitudes() const {
        return amplitudes_;
    }
    std::span<Complex> mutable_amplitudes() {
        return amplitudes_;
    }
    const Complex &operator[](size_t k) const {
        return amplitudes_[k];
    }

    double norm_squared() const {
        double total = 0.0;
        for (const auto &a : amplitudes_) {
            total += std::norm(a);
        }
        return total;
    }

    std::vector<double> probabilities() const {
        std::vector<double> out(amplitudes_.size());
        for (size_t k = 0; k < out.size(); ++k) {
            out[k] = std::norm(amplitudes_[k]);
        }
        return out;
    }

   private:
    int n_qubits_;
    std::vector<Complex> amplitudes_;
};

namespace detail {

inline uint64_t control_mask(const Gate &g) {
    uint64_t mask = 0;
    for (int c : g.controls) {
        mask |= uint64_t{1} << c;
    }
    return mask;
}

}  // namespace detail

/// In-place gate application.
inline void apply_gate_inplace(StateVector &state, const Gate &g) {
    validate_gate(g, state.num_qubits());
    auto amps = state.mutable_amplitudes();
    const uint64_t cmask = detail::control_mask(g);
    const uint64_t dim = amps.size();

    if (g.kind == GateKind::kGlobalPhase) {
        const Complex f = std::exp(Complex(0.0, g.angle));
        for (uint64_t k = 0; k < dim; ++k) {
            if ((k & cmask) == cmask) {
                amps[k] *= f;
            }
        }
        return;
    }

    const uint64_t tbit = uint64_t{1} << g.target;
    const uint64_t half_dim = dim >> 1;
    const uint64_t low_mask = tbit - 1;

    if (g.kind == GateKind::kX) {
        for (uint64_t k = 0; k < half_dim; ++k) {
            const uint64_t i0 = ((k & ~low_mask) << 1) | (k & low_mask);
            if ((i0 & cmask) == cmask) {
                std::swap(amps[i0], amps[i0 | tbit]);
            }
        }
        return;
    }

    const auto m = gate_matrix(g);
    const bool diagonal = m[1] == Complex(0.0) && m[2] == Complex(0.0);
    for (uint64_t k = 0; k < half_dim; ++k) {
        const uint64_t i0 = ((k & ~low_mask) << 1) | (k & low_mask);
        if ((i0 & cmask) != cmask) {
            continue;
        }
        const uint64_t i1 = i0 | tbit;
        if (diagonal) {
            amps[i0] *= m[0];
            amps[i1] *= m[3];
        } else {
            const Complex a0 = amps[i0];
            const Complex a1 = amps[i1];
            amps[i0] = m[0] * a0 + m[1] * a1;
            amps[i1] = m[2] * a0 + m[3] * a1;
        }
    }
}

inline StateVector apply_gate(StateVector state, const Gate &g) {
    apply_gate_inplace(state, g);
    return state;
}

/// Contiguous qubit range owned by a named register.
struct RegisterRange {
    int start = 0;
    int size = 0;

    std::vector<int> qubits() const {
        std::vector<int> out(size);
        for (int k = 0; k < size; ++k) {
            out[k] = start + k;
        }
        return out;
    }
};

/// Ordered gate list over an allocated qubit layout with named registers.
class Circuit {
   public:
    Circuit() = default;
    explicit Circuit(int n_qubits) : n_qubits_(n_qubits) {
        if (n_qubits < 0) {
            throw std::invalid_argument("Circuit: negative qubit count");
        }
    }

    int num_qubits() const {
        return n_qubits_;
    }
    const std::vector<Gate> &gates() const {
        return gates_;
    }
    size_t size() const {
        return gates_.size();
    }
    bool empty() const {
        return gates_.empty();
    }

    /// Allocates `size` fresh qubits at the top of the layout. Returns the first index.
    int add_register(const std::string &name, int size) {
        if (size < 0) {
            throw std::invalid_argument("add_register: negative size");
        }
        if (registers_.count(name)) {
            throw std::invalid_argument("add_register: duplicate register '" + name + "'");
        }
        int start = n_qubits_;
        registers_[name] = RegisterRange{start, size};
        n_qubits_ += size;
        return start;
    }

    bool has_register(const std::string &name) const {
        return registers_.count(name) != 0;
    }

    const RegisterRange &reg(const std::string &name) const {
        auto it = registers_.find(name);
        if (it == registers_.end()) {
            throw std::out_of_range("no register named '" + name + "'");
        }
        return it->second;
    }

    std::vector<int> qubits(const std::string &name) const {
        return reg(name).qubits();
    }

    const std::map<std::string, RegisterRange> &registers() const {
        return registers_;
    }

    void append(Gate g) {
        validate_gate(g, n_qubits_);
        gates_.push_back(std::move(g));
    }

    /// Appends `fragment` with its local qubit k relabelled to qubit_map[k].
    void append(const Circuit &fragment, std::span<const int> qubit_map) {
        if (static_cast<int>(qubit_map.size()) != fragment.num_qubits()) {
            throw std::invalid_argument("append: qubit map size " + std::to_string(qubit_map.size()) +
                                        " != fragment width " + std::to_string(fragment.num_qubits()));
        }
        for (const Gate &g : fragment.gates()) {
            Gate mapped = g;
            if (g.kind != GateKind::kGlobalPhase) {
                mapped.target = qubit_map[g.target];
            }
            for (auto &c : mapped.controls) {
                c = qubit_map[c];
            }
            append(std::move(mapped));
        }
    }

    /// Appends a fragment of equal or smaller width on the identity layout.
    void append(const Circuit &fragment) {
        if (fragment.num_qubits() > n_qubits_) {
            throw std::invalid_argument("append: fragment wider than circuit");
        }
        for (const Gate &g : fragment.gates()) {
            append(g);
        }
    }

    Circuit inverse() const {
        Circuit out = *this;
        out.gates_.clear();
        out.gates_.reserve(gates_.size());
        for (auto it = gates_.rbegin(); it != gates_.rend(); ++it) {
            out.gates_.push_back(it->inverse());
        }
        return out;
    }

    /// Same layout, every gate with one extra control. Global phases become
    /// relative phases on the control.
    Circuit controlled_on(int control) const {
        if (control < 0 || control >= n_qubits_) {
            throw std::out_of_range("controlled_on: control outside register");
        }
        Circuit out = *this;
        out.gates_.clear();
        out.gates_.reserve(gates_.size());
        for (const Gate &g : gates_) {
            Gate c = g;
            c.controls.push_back(control);
            out.append(std::move(c));
        }
        return out;
    }

    /// Same width and registers, no gates.
    Circuit empty_copy() const {
        Circuit out = *this;
        out.gates_.clear();
        return out;
    }

    /// Widens the layout by `extra` unnamed qubits.
    void grow(int extra) {
        if (extra < 0) {
            throw std::invalid_argument("grow: negative");
        }
        n_qubits_ += extra;
    }

   private:
    int n_qubits_ = 0;
    std::vector<Gate> gates_;
    std::map<std::string, RegisterRange> registers_;
};

inline void run_circuit_inplace(const Circuit &circuit, StateVector &state) {
    if (circuit.num_qubits() != state.num_qubits()) {
        throw std::invalid_argument("run_circuit: circuit has " + std::to_string(circuit.num_qubits()) +
                                    " qubits, state has " + std::to_string(state.num_qubits()));
    }
    for (const Gate &g : circuit.gates()) {
        apply_gate_inplace(state, g);
    }
}

inline StateVector run_circuit(const Circuit &circuit, StateVector initial) {
    run_circuit_inplace(circuit, initial);
    return initial;
}

/// Runs the circuit on |0...0>.
inline StateVector simulate(const Circuit &circuit) {
    return run_circuit(circuit, StateVector(circuit.num_qubits()));
}

inline double probability_of_one(const StateVector &state, int qubit) {
    if (qubit < 0 || qubit >= state.num_qubits()) {
        throw std::out_of_range("probability_of_one: qubit outside register");
    }
    const uint64_t bit = uint64_t{1} << qubit;
    double p = 0.0;
    const auto amps = state.amplitudes();
    for (uint64_t k = 0; k < amps.size(); ++k) {
        if (k & bit) {
            p += std::norm(amps[k]);
        }
    }
    return p;
}

/// Distribution of the integer read from `qubits` (qubits[0] least significant).
inline std::vector<double> marginal_probabilities(const StateVector &state, std::span<const int> qubits) {
    for (int q : qubits) {
        if (q < 0 || q >= state.num_qubits()) {
            throw std::out_of_range("marginal_probabilities: qubit outside register");
        }
    }
    std::vector<double> out(size_t{1} << qubits.size(), 0.0);
    const auto amps = state.amplitudes();
    for (uint64_t k = 0; k < amps.size(); ++k) {
        uint64_t v = 0;
        for (size_t j = 0; j < qubits.size(); ++j) {
            v |= ((k >> qubits[j]) & 1) << j;
        }
        out[v] += std::norm(amps[k]);
    }
    return out;
}

/// Measurement record. Keys are basis indices; use `bitstring` to render them.
struct ShotOutcomes {
    std::map<uint64_t, uint64_t> counts;
    uint64_t shots = 0;
    uint64_t seed = 0;

    /// Fraction of shots with the given qubit measured as 1.
    double frequency_of_one(int qubit) const {
        uint64_t ones = 0;
        for (const auto &[index, count] : counts) {
            if ((index >> qubit) & 1) {
                ones += count;
            }
        }
        return shots == 0 ? 0.0 : static_cast<double>(ones) / static_cast<double>(shots);
    }

    std::vector<double> empirical_distribution(int n_qubits) const {
        std::vector<double> out(size_t{1} << n_qubits, 0.0);
        for (const auto &[index, count] : counts) {
            out[index] = static_cast<double>(count) / static_cast<double>(shots);
        }
        return out;
    }
};

/// Most significant qubit first, as printed by most toolkits.
inline std::string bitstring(uint64_t index, int n_qubits) {
    std::string s(n_qubits, '0');
    for (int q = 0; q < n_qubits; ++q) {
        if ((index >> q) & 1) {
            s[n_qubits - 1 - q] = '1';
        }
    }
    return s;
}

inline ShotOutcomes sample_distribution(std::span<const double> probabilities, uint64_t shots, uint64_t seed) {
    if (shots == 0) {
        throw std::invalid_argument("sample: shots must be >= 1");
    }
    DiscreteSampler sampler(probabilities);
    Rng rng(seed);
    ShotOutcomes out;
    out.shots = shots;
    out.seed = seed;
    for (uint64_t s = 0; s < shots; ++s) {
        out.counts[sampler.sample(rng)] += 1;
    }
    return out;
}

inline ShotOutcomes sample_shots(const StateVector &state, uint64_t shots, uint64_t seed) {
    const auto probs = state.probabilities();
    return sample_distribution(probs, shots, seed);
}

}  // namespace qopt
