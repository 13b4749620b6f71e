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
 * Lowering of multi-controlled gates to {single-qubit, CNOT, Toffoli} or to
 * {single-qubit, CNOT}, and gate-count / depth reports.
 *
 * Scheme, applied recursively:
 *  - C-U with one control: standard two-CNOT constructions (C-H, C-Z via
 *    basis change; C-Ry, C-Rz with half angles; C-Rx = H C-Rz H; C-P adds a
 *    phase on the control).
 *  - Controlled global phase: a phase gate on one of its controls, with the
 *    remaining controls kept.
 *  - C^k-Z: H C^k-X H.
 *  - C^k-X, k >= 3: Toffoli v-chain over k - 2 clean ancillas.
 *  - C^k-U otherwise, k >= 2: AND of all controls into k - 1 clean ancillas,
 *    C-U from the last, uncompute.
 *  - Toffoli, when not kept: the six-CNOT Clifford+T circuit.
 * Ancillas are appended above the original qubits and always return to |0>.
 */

#pragma once

#include <algorithm>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "qopt/qsim.hpp"

namespace qopt {

enum class GateBasis {
    /// Single-qubit gates, CNOT and Toffoli.
    kToffoli,
    /// Single-qubit gates and CNOT.
    kCnot,
};

struct DecomposedCircuit {
    Circuit circuit;
    int original_qubits = 0;
    int ancillas = 0;
};

namespace detail {

class Lowering {
   public:
    Lowering(int n, GateBasis basis) : n_(n), basis_(basis) {
    }

    void lower(const Gate &g) {
        const size_t k = g.controls.size();
        if (g.kind == GateKind::kGlobalPhase) {
            if (k == 0) {
                out_.push_back(g);
                return;
            }
            std::vector<int> rest(g.controls.begin(), g.controls.end() - 1);
            lower(Gate{GateKind::kPhase, g.controls.back(), g.angle, rest});
            return;
        }
        if (k == 0) {
            out_.push_back(g);
            return;
        }
        if (g.kind == GateKind::kX) {
            if (k == 1) {
                out_.push_back(g);
            } else if (k == 2) {
                toffoli(g.controls[0], g.controls[1], g.target);
            } else {
                multi_x(g);
            }
            return;
        }
        if (g.kind == GateKind::kZ && k >= 2) {
            lower(Gate::h(g.target));
            lower(Gate{GateKind::kX, g.target, 0.0, g.controls});
            lower(Gate::h(g.target));
            return;
        }
        if (k == 1) {
            single_control(g, g.controls[0]);
            return;
        }
        // AND all controls into a chain of ancillas.
        const int base = reserve(static_cast<int>(k) - 1);
        std::vector<Gate> compute;
        compute.push_back(Gate::toffoli(g.controls[0], g.controls[1], base));
        for (size_t j = 2; j < k; ++j) {
            compute.push_back(Gate::toffoli(base + static_cast<int>(j) - 2, g.controls[j], base + static_cast<int>(j) - 1));
        }
        for (const Gate &c : compute) {
            lower(c);
        }
        single_control(g, base + static_cast<int>(k) - 2);
        for (auto it = compute.rbegin(); it != compute.rend(); ++it) {
            lower(*it);
        }
        release(static_cast<int>(k) - 1);
    }

    int ancillas() const {
        return max_ancillas_;
    }

    std::vector<Gate> take() {
        return std::move(out_);
    }

   private:
    int reserve(int count) {
        const int base = n_ + in_use_;
        in_use_ += count;
        max_ancillas_ = std::max(max_ancillas_, in_use_);
        return base;
    }

    void release(int count) {
        in_use_ -= count;
    }

    void cx(int c, int t) {
        out_.push_back(Gate::cnot(c, t));
    }

    void one(Gate g) {
        out_.push_back(std::move(g));
    }

    void toffoli(int c0, int c1, int t) {
        if (basis_ == GateBasis::kToffoli) {
            out_.push_back(Gate::toffoli(c0, c1, t));
            return;
        }
        const double q = std::numbers::pi / 4;
        one(Gate::h(t));
        cx(c1, t);
        one(Gate::phase(t, -q));
        cx(c0, t);
        one(Gate::phase(t, q));
        cx(c1, t);
        one(Gate::phase(t, -q));
        cx(c0, t);
        one(Gate::phase(c1, q));
        one(Gate::phase(t, q));
        one(Gate::h(t));
        cx(c0, c1);
        one(Gate::phase(c0, q));
        one(Gate::phase(c1, -q));
        cx(c0, c1);
    }

    void multi_x(const Gate &g) {
        const size_t k = g.controls.size();
        const int base = reserve(static_cast<int>(k) - 2);
        std::vector<Gate> compute;
        compute.push_back(Gate::toffoli(g.controls[0], g.controls[1], base));
        for (size_t j = 2; j + 1 < k; ++j) {
            compute.push_back(Gate::toffoli(base + static_cast<int>(j) - 2, g.controls[j], base + static_cast<int>(j) - 1));
        }
        for (const Gate &c : compute) {
            lower(c);
        }
        lower(Gate::toffoli(base + static_cast<int>(k) - 3, g.controls[k - 1], g.target));
        for (auto it = compute.rbegin(); it != compute.rend(); ++it) {
            lower(*it);
        }
        release(static_cast<int>(k) - 2);
    }

    void single_control(const Gate &g, int c) {
        const int t = g.target;
        const double a = g.angle;
        switch (g.kind) {
            case GateKind::kX:
                cx(c, t);
                return;
            case GateKind::kZ:
                one(Gate::h(t));
                cx(c, t);
                one(Gate::h(t));
                return;
            case GateKind::kH:
                one(Gate::ry(t, -std::numbers::pi / 4));
                one(Gate::h(t));
                cx(c, t);
                one(Gate::h(t));
                one(Gate::ry(t, std::numbers::pi / 4));
                return;
            case GateKind::kRy:
                one(Gate::ry(t, a / 2));
                cx(c, t);
                one(Gate::ry(t, -a / 2));
                cx(c, t);
                return;
            case GateKind::kRz:
                one(Gate::rz(t, a / 2));
                cx(c, t);
                one(Gate::rz(t, -a / 2));
                cx(c, t);
                return;
            case GateKind::kRx:
                one(Gate::h(t));
                one(Gate::rz(t, a / 2));
                cx(c, t);
                one(Gate::rz(t, -a / 2));
                cx(c, t);
                one(Gate::h(t));
                return;
            case GateKind::kPhase:
                one(Gate::phase(c, a / 2));
                one(Gate::rz(t, a / 2));
                cx(c, t);
                one(Gate::rz(t, -a / 2));
                cx(c, t);
                return;
            case GateKind::kGlobalPhase:
                one(Gate::phase(c, a));
                return;
        }
    }

    int n_;
    GateBasis basis_;
    int in_use_ = 0;
    int max_ancillas_ = 0;
    std::vector<Gate> out_;
};

}  // namespace detail

/// Rewrites `circuit` over `basis`. The unitary on the original qubits is
/// unchanged (including phase) with ancillas starting and ending in |0>.
inline DecomposedCircuit decompose(const Circuit &circuit, GateBasis basis = GateBasis::kCnot) {
    detail::Lowering lowering(circuit.num_qubits(), basis);
    for (const Gate &g : circuit.gates()) {
        lowering.lower(g);
    }
    DecomposedCircuit d;
    d.original_qubits = circuit.num_qubits();
    d.ancillas = lowering.ancillas();
    d.circuit = Circuit(circuit.num_qubits() + d.ancillas);
    for (Gate &g : lowering.take()) {
        d.circuit.append(std::move(g));
    }
    return d;
}

/// Gate counts and depth over {single-qubit, CNOT, Toffoli}, all-to-all
/// connectivity. Uncontrolled global phases are not counted.
struct ResourceReport {
    int qubits = 0;
    int ancillas = 0;
    uint64_t single_qubit = 0;
    uint64_t cnot = 0;
    uint64_t toffoli = 0;
    uint64_t depth = 0;

    uint64_t total() const {
        return single_qubit + cnot + toffoli;
    }
};

/// Counts an already lowered circuit; throws if it holds wider gates.
inline ResourceReport count_resources(const Circuit &circuit) {
    ResourceReport r;
    r.qubits = circuit.num_qubits();
    std::vector<uint64_t> level(static_cast<size_t>(circuit.num_qubits()), 0);
    for (const Gate &g : circuit.gates()) {
        if (g.kind == GateKind::kGlobalPhase && g.controls.empty()) {
            continue;
        }
        if (g.controls.empty()) {
            ++r.single_qubit;
        } else if (g.is_cnot()) {
            ++r.cnot;
        } else if (g.is_toffoli()) {
            ++r.toffoli;
        } else {
            throw std::invalid_argument(std::string("count_resources: gate ") + gate_kind_name(g.kind) + " with " +
                                        std::to_string(g.controls.size()) + " controls is not in the basis");
        }
        uint64_t top = level[g.target];
        for (int c : g.controls) {
            top = std::max(top, level[c]);
        }
        ++top;
        level[g.target] = top;
        for (int c : g.controls) {
            level[c] = top;
        }
        r.depth = std::max(r.depth, top);
    }
    return r;
}

inline ResourceReport resource_report(const Circuit &circuit) {
    auto d = decompose(circuit, GateBasis::kToffoli);
    auto r = count_resources(d.circuit);
    r.ancillas = d.ancillas;
    return r;
}

}  // namespace qopt
