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

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qopt/qsim.hpp"

namespace qopt_test {

inline uint64_t write_bits(uint64_t base, const std::vector<int> &qubits, uint64_t value) {
    for (size_t j = 0; j < qubits.size(); ++j) {
        const uint64_t bit = uint64_t{1} << qubits[j];
        base = ((value >> j) & 1) ? (base | bit) : (base & ~bit);
    }
    return base;
}

inline uint64_t read_bits(uint64_t index, const std::vector<int> &qubits) {
    uint64_t v = 0;
    for (size_t j = 0; j < qubits.size(); ++j) {
        v |= ((index >> qubits[j]) & 1) << j;
    }
    return v;
}

/// Output basis index of a permutation circuit. Small circuits go through the
/// statevector (and must land on one basis state); wide ones are evaluated
/// classically, which only works for X-type gates.
inline uint64_t permute_basis(const qopt::Circuit &c, uint64_t index) {
    if (c.num_qubits() <= 12) {
        auto s = qopt::run_circuit(c, qopt::StateVector::basis(c.num_qubits(), index));
        for (uint64_t k = 0; k < s.size(); ++k) {
            if (std::abs(std::norm(s[k]) - 1.0) < 1e-12) {
                return k;
            }
        }
        throw std::runtime_error("permute_basis: output is not a basis state");
    }
    for (const auto &g : c.gates()) {
        if (g.kind != qopt::GateKind::kX) {
            throw std::runtime_error("permute_basis: non-classical gate");
        }
        bool fire = true;
        for (int q : g.controls) {
            fire &= ((index >> q) & 1) != 0;
        }
        if (fire) {
            index ^= uint64_t{1} << g.target;
        }
    }
    return index;
}

}  // namespace qopt_test
