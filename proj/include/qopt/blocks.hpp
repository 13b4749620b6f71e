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
 * Reversible circuit blocks built from X, CNOT and Toffoli (plus rotations for
 * the uniformly controlled Ry and the QFT).
 *
 * Each block comes in two forms: `append_*` writes onto caller-chosen qubits
 * of an existing circuit, and `build_*` returns a standalone fragment with
 * named registers that can be placed with Circuit::append(fragment, map).
 */

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qopt/qsim.hpp"

namespace qopt {

namespace detail {

inline void require_distinct(std::initializer_list<std::span<const int>> groups, const char *what) {
    std::vector<int> all;
    for (auto g : groups) {
        all.insert(all.end(), g.begin(), g.end());
    }
    std::sort(all.begin(), all.end());
    if (std::adjacent_find(all.begin(), all.end()) != all.end()) {
        throw std::invalid_argument(std::string(what) + ": qubit roles overlap");
    }
}

/// target ^= a OR b, inputs restored.
inline void append_or2(Circuit &c, int a, int b, int target) {
    c.append(Gate::x(a));
    c.append(Gate::x(b));
    c.append(Gate::toffoli(a, b, target));
    c.append(Gate::x(target));
    c.append(Gate::x(a));
    c.append(Gate::x(b));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Comparator against a classical threshold.

/// Qubit roles of a placed comparator. The final carry is written directly
/// into `result`, so only n-1 carry qubits are needed and all of them are
/// back to |0> when the block finishes.
struct ComparatorBlock {
    std::vector<int> value;
    std::vector<int> carries;
    int result = -1;
    uint64_t threshold = 0;
    /// Bits of (2^n - threshold) mod 2^n, least significant first.
    std::vector<int> twos_complement;
};

struct ComparatorFragment {
    /// result ^= [value >= threshold]; carries restored.
    Circuit compute;
    /// Mirror of `compute`; applying both leaves every qubit unchanged.
    Circuit uncompute;
    ComparatorBlock block;
};

inline int comparator_carry_count(int n) {
    return n > 1 ? n - 1 : 0;
}

inline ComparatorBlock append_comparator(Circuit &c, std::span<const int> value, std::span<const int> carries,
                                         int result, uint64_t threshold) {
    const int n = static_cast<int>(value.size());
    if (n < 1 || n > 62) {
        throw std::invalid_argument("comparator: register width must be in [1, 62]");
    }
    const uint64_t top = uint64_t{1} << n;
    if (threshold > top) {
        throw std::out_of_range("comparator: threshold " + std::to_string(threshold) + " outside [0, " +
                                std::to_string(top) + "]");
    }
    if (static_cast<int>(carries.size()) < comparator_carry_count(n)) {
        throw std::invalid_argument("comparator: needs " + std::to_string(comparator_carry_count(n)) +
                                    " carry qubits");
    }
    carries = carries.first(comparator_carry_count(n));
    const int result_span[1] = {result};
    detail::require_distinct({value, carries, result_span}, "comparator");

    ComparatorBlock block;
    block.value.assign(value.begin(), value.end());
    block.carries.assign(carries.begin(), carries.end());
    block.result = result;
    block.threshold = threshold;
    const uint64_t t = (top - threshold) & (top - 1);
    for (int k = 0; k < n; ++k) {
        block.twos_complement.push_back(static_cast<int>((t >> k) & 1));
    }

    if (threshold == 0) {
        c.append(Gate::x(result));
        return block;
    }
    if (threshold == top) {
        return block;
    }

    // Carry k of value + t: k=0 is value_0 AND t_0; afterwards the carry is
    // (value_k AND carry) when t_k = 0 and (value_k OR carry) when t_k = 1.
    auto carry_target = [&](int k) { return k == n - 1 ? result : carries[k]; };
    auto emit_carry = [&](int k) {
        const int target = carry_target(k);
        if (k == 0) {
            if (block.twos_complement[0]) {
                c.append(Gate::cnot(value[0], target));
            }
        } else if (block.twos_complement[k]) {
            detail::append_or2(c, value[k], carries[k - 1], target);
        } else {
            c.append(Gate::toffoli(value[k], carries[k - 1], target));
        }
    };
    for (int k = 0; k < n; ++k) {
        emit_carry(k);
    }
    for (int k = n - 2; k >= 0; --k) {
        emit_carry(k);
    }
    return block;
}

/// Standalone comparator: registers "value" (n), "carry" (n-1), "result" (1).
inline ComparatorFragment build_comparator(int n, uint64_t threshold) {
    Circuit c;
    c.add_register("value", n);
    c.add_register("carry", comparator_carry_count(n));
    c.add_register("result", 1);
    ComparatorFragment out;
    out.block = append_comparator(c, c.qubits("value"), c.qubits("carry"), c.reg("result").start, threshold);
    out.compute = c;
    out.uncompute = c.inverse();
    return out;
}

// ---------------------------------------------------------------------------
// Logical OR of d qubits.

struct OrBlock {
    std::vector<int> inputs;
    int output = -1;
    std::vector<int> scratch;
};

inline int or_scratch_count(int d) {
    return d > 2 ? d - 2 : 0;
}

/// output ^= OR(inputs). Scratch qubits restored.
inline OrBlock append_or(Circuit &c, std::span<const int> inputs, int output, std::span<const int> scratch) {
    const int d = static_cast<int>(inputs.size());
    if (d < 1) {
        throw std::invalid_argument("or: needs at least one input");
    }
    if (static_cast<int>(scratch.size()) < or_scratch_count(d)) {
        throw std::invalid_argument("or: needs " + std::to_string(or_scratch_count(d)) + " scratch qubits");
    }
    scratch = scratch.first(or_scratch_count(d));
    const int out_span[1] = {output};
    detail::require_distinct({inputs, scratch, out_span}, "or");

    OrBlock block{{inputs.begin(), inputs.end()}, output, {scratch.begin(), scratch.end()}};
    if (d == 1) {
        c.append(Gate::cnot(inputs[0], output));
        return block;
    }
    int acc = inputs[0];
    for (int k = 1; k < d - 1; ++k) {
        detail::append_or2(c, acc, inputs[k], scratch[k - 1]);
        acc = scratch[k - 1];
    }
    detail::append_or2(c, acc, inputs[d - 1], output);
    for (int k = d - 2; k >= 1; --k) {
        detail::append_or2(c, k == 1 ? inputs[0] : scratch[k - 2], inputs[k], scratch[k - 1]);
    }
    return block;
}

struct OrFragment {
    Circuit circuit;
    OrBlock block;
};

/// Standalone OR: registers "input" (d), "output" (1), "scratch" (d-2).
inline OrFragment build_or(int d) {
    if (d < 1) {
        throw std::invalid_argument("build_or: d must be >= 1");
    }
    Circuit c;
    c.add_register("input", d);
    c.add_register("output", 1);
    c.add_register("scratch", or_scratch_count(d));
    OrFragment out;
    out.block = append_or(c, c.qubits("input"), c.reg("output").start, c.qubits("scratch"));
    out.circuit = std::move(c);
    return out;
}

// ---------------------------------------------------------------------------
// Weighted sum of single qubits: |a>|0> -> |a>|sum_i w_i a_i>.

struct WeightedSumBlock {
    std::vector<int> inputs;
    std::vector<uint64_t> weights;
    std::vector<int> sum;
    std::vector<int> carries;
    /// Row i holds the binary digits of weights[i], least significant first.
    std::vector<std::vector<int>> weight_matrix;
};

inline int bit_length(uint64_t v) {
    return v == 0 ? 0 : 64 - std::countl_zero(v);
}

/// Width of the sum register: floor(log2(sum of weights)) + 1.
inline int weighted_sum_width(std::span<const uint64_t> weights) {
    uint64_t total = 0;
    for (auto w : weights) {
        total += w;
    }
    if (total == 0) {
        throw std::invalid_argument("weighted sum: all weights are zero");
    }
    return bit_length(total);
}

namespace detail {

/// One addition of input i at column j: positions j..j+k-1 of the sum register
/// may change.
struct WeightedSumStep {
    int input;
    int column;
    int span;
};

inline std::vector<WeightedSumStep> plan_weighted_sum(std::span<const uint64_t> weights) {
    std::vector<WeightedSumStep> steps;
    uint64_t max_value = 0;
    int columns = 0;
    for (auto w : weights) {
        columns = std::max(columns, bit_length(w));
    }
    for (int j = 0; j < columns; ++j) {
        for (size_t i = 0; i < weights.size(); ++i) {
            if (((weights[i] >> j) & 1) == 0) {
                continue;
            }
            const int k = bit_length((max_value >> j) + 1);
            steps.push_back({static_cast<int>(i), j, k});
            max_value += uint64_t{1} << j;
        }
    }
    return steps;
}

}  // namespace detail

/// Dedicated carry qubits needed beyond the free high sum qubits.
inline int weighted_sum_carry_count(std::span<const uint64_t> weights) {
    const int m = weighted_sum_width(weights);
    int need = 0;
    for (const auto &s : detail::plan_weighted_sum(weights)) {
        const int free_sum = m - (s.column + s.span);
        need = std::max(need, s.span - 2 - free_sum);
    }
    return need;
}

inline WeightedSumBlock append_weighted_sum(Circuit &c, std::span<const int> inputs,
                                            std::span<const uint64_t> weights, std::span<const int> sum,
                                            std::span<const int> carries) {
    if (inputs.size() != weights.size()) {
        throw std::invalid_argument("weighted sum: one weight per input qubit required");
    }
    const int m = weighted_sum_width(weights);
    if (static_cast<int>(sum.size()) != m) {
        throw std::invalid_argument("weighted sum: sum register must have " + std::to_string(m) + " qubits");
    }
    const int n_carry = weighted_sum_carry_count(weights);
    if (static_cast<int>(carries.size()) < n_carry) {
        throw std::invalid_argument("weighted sum: needs " + std::to_string(n_carry) + " carry qubits");
    }
    carries = carries.first(n_carry);
    detail::require_distinct({inputs, sum, carries}, "weighted sum");

    WeightedSumBlock block;
    block.inputs.assign(inputs.begin(), inputs.end());
    block.weights.assign(weights.begin(), weights.end());
    block.sum.assign(sum.begin(), sum.end());
    block.carries.assign(carries.begin(), carries.end());
    int columns = 0;
    for (auto w : weights) {
        columns = std::max(columns, bit_length(w));
    }
    for (auto w : weights) {
        std::vector<int> row(columns);
        for (int j = 0; j < columns; ++j) {
            row[j] = static_cast<int>((w >> j) & 1);
        }
        block.weight_matrix.push_back(std::move(row));
    }

    for (const auto &step : detail::plan_weighted_sum(weights)) {
        const int a = inputs[step.input];
        const int j = step.column;
        const int k = step.span;
        if (k == 1) {
            c.append(Gate::cnot(a, sum[j]));
            continue;
        }
        // Carry qubits for positions j..j+k-3: free sum qubits above the
        // touched window first (lowest index first), then dedicated carries.
        std::vector<int> carry_q;
        for (int q = j + k; q < m && static_cast<int>(carry_q.size()) < k - 2; ++q) {
            carry_q.push_back(sum[q]);
        }
        for (int q = 0; static_cast<int>(carry_q.size()) < k - 2; ++q) {
            carry_q.push_back(carries[q]);
        }
        int ctrl = a;
        for (int p = 0; p <= k - 2; ++p) {
            const int pos = j + p;
            const int target = p < k - 2 ? carry_q[p] : sum[pos + 1];
            c.append(Gate::toffoli(ctrl, sum[pos], target));
            c.append(Gate::cnot(ctrl, sum[pos]));
            if (p < k - 2) {
                ctrl = target;
            }
        }
        for (int p = k - 3; p >= 0; --p) {
            const int pos = j + p;
            const int prev = p == 0 ? a : carry_q[p - 1];
            c.append(Gate::x(sum[pos]));
            c.append(Gate::toffoli(prev, sum[pos], carry_q[p]));
            c.append(Gate::x(sum[pos]));
        }
    }
    return block;
}

/// Per-qubit weights for d integers of the given widths (LSB first) scaled
/// by integer weights: input i, bit b gets weights[i] * 2^b.
inline std::vector<uint64_t> expand_integer_weights(std::span<const uint64_t> weights,
                                                    std::span<const int> input_widths) {
    if (weights.size() != input_widths.size()) {
        throw std::invalid_argument("weighted sum: one width per weight required");
    }
    std::vector<uint64_t> out;
    for (size_t i = 0; i < weights.size(); ++i) {
        if (input_widths[i] < 1) {
            throw std::invalid_argument("weighted sum: input widths must be >= 1");
        }
        for (int b = 0; b < input_widths[i]; ++b) {
            out.push_back(weights[i] << b);
        }
    }
    return out;
}

struct WeightedSumFragment {
    Circuit circuit;
    WeightedSumBlock block;
};

/// Standalone weighted sum over integer inputs of the given widths.
/// Registers: "input" (sum of widths), "sum", "carry".
inline WeightedSumFragment build_weighted_sum(std::span<const uint64_t> weights, std::span<const int> input_widths) {
    const auto qubit_weights = expand_integer_weights(weights, input_widths);
    const int m = weighted_sum_width(qubit_weights);
    Circuit c;
    c.add_register("input", static_cast<int>(qubit_weights.size()));
    c.add_register("sum", m);
    c.add_register("carry", weighted_sum_carry_count(qubit_weights));
    WeightedSumFragment out;
    out.block = append_weighted_sum(c, c.qubits("input"), qubit_weights, c.qubits("sum"), c.qubits("carry"));
    out.circuit = std::move(c);
    return out;
}

// ---------------------------------------------------------------------------
// Uniformly controlled Ry: |i>|0> -> |i> Ry(angles[i])|0>.

/// Gray-code construction with 2^n CNOTs and 2^n Ry gates.
inline void append_uniformly_controlled_ry(Circuit &c, std::span<const int> controls, int target,
                                           std::span<const double> angles) {
    const int n = static_cast<int>(controls.size());
    const size_t count = size_t{1} << n;
    if (angles.size() != count) {
        throw std::invalid_argument("uniformly controlled Ry: expected " + std::to_string(count) + " angles, got " +
                                    std::to_string(angles.size()));
    }
    const int target_span[1] = {target};
    detail::require_distinct({controls, target_span}, "uniformly controlled Ry");
    if (n == 0) {
        c.append(Gate::ry(target, angles[0]));
        return;
    }
    auto gray = [](size_t v) { return v ^ (v >> 1); };
    // angles[i] = sum_j (-1)^{popcount(i & gray(j))} theta[j]; invert with a
    // Walsh-Hadamard transform.
    std::vector<double> wht(angles.begin(), angles.end());
    for (size_t h = 1; h < count; h <<= 1) {
        for (size_t i = 0; i < count; i += h << 1) {
            for (size_t k = i; k < i + h; ++k) {
                const double a = wht[k];
                const double b = wht[k + h];
                wht[k] = a + b;
                wht[k + h] = a - b;
            }
        }
    }
    std::vector<double> theta(count);
    for (size_t j = 0; j < count; ++j) {
        theta[j] = wht[gray(j)] / static_cast<double>(count);
    }
    for (size_t j = 0; j < count; ++j) {
        c.append(Gate::ry(target, theta[j]));
        const size_t flip = gray(j) ^ gray((j + 1) % count);
        c.append(Gate::cnot(controls[std::countr_zero(flip)], target));
    }
}

/// Standalone: registers "control" (n) and "target" (1).
inline Circuit build_uniformly_controlled_ry(int n, std::span<const double> angles) {
    Circuit c;
    c.add_register("control", n);
    c.add_register("target", 1);
    append_uniformly_controlled_ry(c, c.qubits("control"), c.reg("target").start, angles);
    return c;
}

// ---------------------------------------------------------------------------
// Quantum Fourier transform, |x> -> M^{-1/2} sum_y exp(2 pi i x y / M) |y>.

inline void append_swap(Circuit &c, int a, int b) {
    c.append(Gate::cnot(a, b));
    c.append(Gate::cnot(b, a));
    c.append(Gate::cnot(a, b));
}

inline Circuit build_qft(int m) {
    if (m < 1) {
        throw std::invalid_argument("qft: register must have at least one qubit");
    }
    Circuit c;
    c.add_register("register", m);
    for (int j = m - 1; j >= 0; --j) {
        c.append(Gate::h(j));
        for (int k = j - 1; k >= 0; --k) {
            c.append(Gate{GateKind::kPhase, j, std::numbers::pi / static_cast<double>(uint64_t{1} << (j - k)), {k}});
        }
    }
    for (int i = 0; i < m / 2; ++i) {
        append_swap(c, i, m - 1 - i);
    }
    return c;
}

inline Circuit build_inverse_qft(int m) {
    return build_qft(m).inverse();
}

}  // namespace qopt
