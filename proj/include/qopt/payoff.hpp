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
 * Option contracts, the payoff-to-rotation encoding and A-operator builders.
 *
 * Each builder works in "index units": payoffs are linear in the integer held
 * by some register (a price grid index or a weighted index sum), and the
 * payoff qubit is rotated by half-angle
 *
 *     h = pi/4 - c + 2c (f - f_min) / (f_max - f_min)
 *
 * so that P1 = sum p sin^2(h) ~ 1/2 - c + 2c (E[f] - f_min)/(f_max - f_min).
 * The post map inverts that relation and converts to price units.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "qopt/blocks.hpp"
#include "qopt/dist.hpp"
#include "qopt/qsim.hpp"

namespace qopt {

// ---------------------------------------------------------------------------
// Contracts.

struct EuropeanCall {
    double strike = 0.0;
};

struct EuropeanPut {
    double strike = 0.0;
};

/// f(S) = a S + b in price units.
struct LinearSegment {
    double slope = 0.0;
    double intercept = 0.0;

    double operator()(double s) const {
        return slope * s + intercept;
    }
};

/// f(S) = f_0(S) + sum over strikes K_j <= S of f_j(S).
/// segments[0] is f_0; segments[j] belongs to strikes[j-1].
struct Portfolio {
    std::vector<double> strikes;
    std::vector<LinearSegment> segments;
};

/// max(0, sum_j w_j S_j - K) over a multi-asset distribution.
struct Basket {
    std::vector<double> weights;
    double strike = 0.0;
};

/// max(0, mean_t S_t - K) over a time-series distribution.
struct Asian {
    double strike = 0.0;
};

enum class BarrierKind { kKnockIn, kKnockOut };
enum class BarrierCrossing { kUp, kDown };

/// max(0, S_T - K), paid if (knock-in) or unless (knock-out) some S_t
/// reaches the barrier: S_t >= B when crossing up, S_t <= B when down.
struct Barrier {
    double strike = 0.0;
    double barrier = 0.0;
    BarrierKind kind = BarrierKind::kKnockIn;
    BarrierCrossing crossing = BarrierCrossing::kUp;
};

using OptionSpec = std::variant<EuropeanCall, EuropeanPut, Portfolio, Basket, Asian, Barrier>;

inline const char *option_name(const OptionSpec &spec) {
    static const char *const names[] = {"european_call", "european_put", "portfolio", "basket", "asian", "barrier"};
    return names[spec.index()];
}

/// Contract payoff for one realization: the asset prices (basket) or the
/// path (Asian, barrier; last entry at maturity). Single-asset contracts
/// read s[0].
inline double evaluate_payoff(const OptionSpec &spec, std::span<const double> s) {
    const int d = static_cast<int>(s.size());
    return std::visit(
        [&](const auto &o) -> double {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, EuropeanCall>) {
                return std::max(0.0, s[0] - o.strike);
            } else if constexpr (std::is_same_v<T, EuropeanPut>) {
                return std::max(0.0, o.strike - s[0]);
            } else if constexpr (std::is_same_v<T, Portfolio>) {
                double v = o.segments.at(0)(s[0]);
                for (size_t j = 0; j < o.strikes.size(); ++j) {
                    if (s[0] >= o.strikes[j]) {
                        v += o.segments.at(j + 1)(s[0]);
                    }
                }
                return v;
            } else if constexpr (std::is_same_v<T, Basket>) {
                double b = 0.0;
                for (int j = 0; j < d; ++j) {
                    b += o.weights.at(j) * s[j];
                }
                return std::max(0.0, b - o.strike);
            } else if constexpr (std::is_same_v<T, Asian>) {
                double b = 0.0;
                for (int j = 0; j < d; ++j) {
                    b += s[j];
                }
                return std::max(0.0, b / d - o.strike);
            } else {
                bool crossed = false;
                for (int j = 0; j < d; ++j) {
                    crossed |= o.crossing == BarrierCrossing::kUp ? s[j] >= o.barrier : s[j] <= o.barrier;
                }
                const bool alive = o.kind == BarrierKind::kKnockIn ? crossed : !crossed;
                return alive ? std::max(0.0, s[d - 1] - o.strike) : 0.0;
            }
        },
        spec);
}

/// Contract payoff in price units at every flat joint grid index.
inline std::vector<double> payoff_on_grid(const DiscretizedDistribution &dist, const OptionSpec &spec) {
    std::vector<double> out(dist.size());
    const int d = dist.dimension();
    std::vector<double> s(d);
    for (uint64_t f = 0; f < out.size(); ++f) {
        const auto idx = dist.unflatten(f);
        for (int j = 0; j < d; ++j) {
            s[j] = dist.value(j, idx[j]);
        }
        out[f] = evaluate_payoff(spec, s);
    }
    return out;
}

/// Expected payoff under the discretized distribution.
inline double grid_expectation(const DiscretizedDistribution &dist, const OptionSpec &spec) {
    const auto f = payoff_on_grid(dist, spec);
    double e = 0.0;
    for (size_t k = 0; k < f.size(); ++k) {
        e += dist.probabilities[k] * f[k];
    }
    return e;
}

// ---------------------------------------------------------------------------
// Scaling and post map.

struct PayoffScaling {
    double c = 0.25;
    /// Payoff range in index units.
    double f_min = 0.0;
    double f_max = 0.0;
    /// Price per index unit.
    double unit = 1.0;

    bool degenerate() const {
        return !(f_max > f_min);
    }
    double g0() const {
        return std::numbers::pi / 4.0 - c;
    }
    /// d(half-angle)/d(f) in index units.
    double slope() const {
        return degenerate() ? 0.0 : 2.0 * c / (f_max - f_min);
    }
    /// Normalized payoff in [-1, 1].
    double normalized(double f) const {
        return degenerate() ? -1.0 : 2.0 * (f - f_min) / (f_max - f_min) - 1.0;
    }
    double half_angle(double f) const {
        return g0() + slope() * (f - f_min);
    }
};

/// E = slope * P1 + intercept, in price units.
struct PostMap {
    double slope = 0.0;
    double intercept = 0.0;

    double operator()(double p1) const {
        return slope * p1 + intercept;
    }
};

inline PostMap make_post_map(const PayoffScaling &s) {
    if (!(s.c > 0.0)) {
        throw std::invalid_argument("payoff scaling c must be positive");
    }
    if (s.degenerate()) {
        return {0.0, s.unit * s.f_min};
    }
    const double k = s.unit * (s.f_max - s.f_min) / (2.0 * s.c);
    return {k, s.unit * s.f_min + k * (s.c - 0.5)};
}

/// Inverse of P1 ~ 1/2 - c + 2c (E - f_min)/(f_max - f_min), in price units.
inline double expected_payoff_from_P1(double p1, const PayoffScaling &scaling) {
    if (!(p1 >= 0.0 && p1 <= 1.0)) {
        throw std::invalid_argument("P1 must lie in [0, 1]");
    }
    return make_post_map(scaling)(p1);
}

// ---------------------------------------------------------------------------
// A operator.

enum class RotationStyle {
    /// Uniformly controlled rotations for payoff registers of <= 2 qubits,
    /// comparator-based otherwise.
    kAuto,
    /// Comparator + per-bit controlled Ry.
    kGeneric,
    /// One uniformly controlled Ry over the payoff register.
    kUniform,
};

struct PayoffOptions {
    double c = 0.25;
    RotationStyle style = RotationStyle::kAuto;
    /// Largest denominator tried when rescaling basket weights to integers.
    uint64_t max_denominator = 64;
    /// Relative tolerance for accepting an integer weight.
    double rescale_tolerance = 1e-9;
};

struct AOperator {
    Circuit circuit;
    int payoff_qubit = -1;
    PayoffScaling scaling;
    PostMap post_map;
    DiscretizedDistribution dist;
    /// Rotation half-angle at each flat joint grid index, as the circuit
    /// applies it.
    std::vector<double> half_angles;
    /// Payoff the circuit encodes, in price units, per flat grid index.
    std::vector<double> encoded_payoff;
    /// Contract payoff in price units per flat grid index.
    std::vector<double> contract_payoff;
    /// Register holding the value the rotations are linear in.
    std::vector<int> payoff_register;
    RotationStyle style = RotationStyle::kGeneric;
    std::vector<std::string> warnings;

    /// sum_f p_f sin^2(h_f).
    double exact_P1() const {
        double p1 = 0.0;
        for (size_t k = 0; k < half_angles.size(); ++k) {
            const double s = std::sin(half_angles[k]);
            p1 += dist.probabilities[k] * s * s;
        }
        return p1;
    }

    double grid_value() const {
        double e = 0.0;
        for (size_t k = 0; k < contract_payoff.size(); ++k) {
            e += dist.probabilities[k] * contract_payoff[k];
        }
        return e;
    }

    double expected_payoff(double p1) const {
        return post_map(p1);
    }
};

/// Smallest grid index j with S_j >= K in register `dim`; 2^n when K is
/// above the grid. A strike below the grid maps to 0 and records a warning.
inline uint64_t map_strike_to_index(const DiscretizedDistribution &dist, double strike, int dim = 0,
                                    std::vector<std::string> *warnings = nullptr) {
    if (!std::isfinite(strike)) {
        throw std::invalid_argument("strike must be finite");
    }
    const uint64_t n = dist.points(dim);
    if (strike < dist.value(dim, 0) && warnings) {
        warnings->push_back("strike " + std::to_string(strike) + " below grid minimum " +
                            std::to_string(dist.value(dim, 0)));
    }
    for (uint64_t i = 0; i < n; ++i) {
        if (dist.value(dim, i) >= strike) {
            return i;
        }
    }
    return n;
}

/// Leading-order QPE error bound (pi/M)/(2c) (i_max - K) in price units.
inline double ae_error_bound(double M, double c, double i_max, double k_idx, double unit = 1.0) {
    if (!(M >= 2.0)) {
        throw std::invalid_argument("ae_error_bound: M must be >= 2");
    }
    if (!(c > 0.0)) {
        throw std::invalid_argument("ae_error_bound: c must be positive");
    }
    return std::numbers::pi / M / (2.0 * c) * (i_max - k_idx) * unit;
}

inline double ae_error_bound(double M, const PayoffScaling &s) {
    return ae_error_bound(M, s.c, s.f_max, s.f_min, s.unit);
}

namespace detail {

struct Condition {
    int qubit;
    bool on_one;
};

/// Adds intercept + slope * v to the payoff in index units whenever every
/// condition holds.
struct RotationTerm {
    std::vector<Condition> conditions;
    double intercept = 0.0;
    double slope = 0.0;
};

inline void emit_linear_rotations(Circuit &c, int payoff, std::span<const int> value,
                                  const std::vector<RotationTerm> &terms, double base_half, double s) {
    c.append(Gate::ry(payoff, 2.0 * base_half));
    for (const auto &t : terms) {
        std::vector<int> controls;
        for (const auto &cond : t.conditions) {
            controls.push_back(cond.qubit);
            if (!cond.on_one) {
                c.append(Gate::x(cond.qubit));
            }
        }
        if (t.intercept != 0.0) {
            c.append(Gate::controlled_ry(controls, payoff, 2.0 * s * t.intercept));
        }
        if (t.slope != 0.0) {
            for (size_t j = 0; j < value.size(); ++j) {
                auto ctl = controls;
                ctl.push_back(value[j]);
                c.append(Gate::controlled_ry(ctl, payoff, 2.0 * s * t.slope * std::ldexp(1.0, static_cast<int>(j))));
            }
        }
        for (const auto &cond : t.conditions) {
            if (!cond.on_one) {
                c.append(Gate::x(cond.qubit));
            }
        }
    }
}

/// Circuit that computes a comparator onto an existing layout; appended once
/// to compute and once (inverted) to uncompute.
inline Circuit comparator_on(int n_qubits, std::span<const int> value, std::span<const int> carries, int result,
                             uint64_t threshold) {
    Circuit tmp(n_qubits);
    append_comparator(tmp, value, carries, result, threshold);
    return tmp;
}

inline bool use_uniform(RotationStyle style, int register_width) {
    switch (style) {
        case RotationStyle::kUniform:
            return true;
        case RotationStyle::kGeneric:
            return false;
        case RotationStyle::kAuto:
            return register_width <= 2;
    }
    return false;
}

inline void check_c(double c) {
    if (!(c > 0.0 && c <= 1.0)) {
        throw std::invalid_argument("scaling c must lie in (0, 1]");
    }
}

inline void check_dims(const DiscretizedDistribution &dist, int want, const char *what) {
    if (want > 0 && dist.dimension() != want) {
        throw std::invalid_argument(std::string(what) + ": distribution has " + std::to_string(dist.dimension()) +
                                    " registers, expected " + std::to_string(want));
    }
}

/// Fills the classical model fields from a per-flat-index payoff in index
/// units.
inline void finish_operator(AOperator &a, const OptionSpec &spec, const std::function<double(uint64_t)> &f_index) {
    a.post_map = make_post_map(a.scaling);
    a.half_angles.resize(a.dist.size());
    a.encoded_payoff.resize(a.dist.size());
    for (uint64_t k = 0; k < a.dist.size(); ++k) {
        const double f = f_index(k);
        a.half_angles[k] = a.scaling.half_angle(f);
        a.encoded_payoff[k] = f * a.scaling.unit;
    }
    a.contract_payoff = payoff_on_grid(a.dist, spec);
}

/// Single-register payoff made of linear pieces; shared by European and
/// portfolio contracts.
struct StrikeTerm {
    uint64_t threshold;
    /// Active when v >= threshold, else when v < threshold.
    bool on_one;
    double intercept;
    double slope;
};

inline AOperator build_single_register(const DiscretizedDistribution &dist, const OptionSpec &spec,
                                       const PayoffOptions &opt, double base_intercept, double base_slope,
                                       const std::vector<StrikeTerm> &terms, bool floor_at_zero,
                                       std::vector<std::string> warnings) {
    check_c(opt.c);
    check_dims(dist, 1, "single-asset payoff");
    const int n = dist.qubits[0];
    const uint64_t N = dist.points(0);
    auto f_of = [&](uint64_t v) {
        double f = base_intercept + base_slope * static_cast<double>(v);
        for (const auto &t : terms) {
            if ((v >= t.threshold) == t.on_one) {
                f += t.intercept + t.slope * static_cast<double>(v);
            }
        }
        return f;
    };
    AOperator a;
    a.dist = dist;
    a.warnings = std::move(warnings);
    a.scaling.c = opt.c;
    a.scaling.unit = dist.spacing(0);
    double lo = f_of(0);
    double hi = lo;
    for (uint64_t v = 1; v < N; ++v) {
        lo = std::min(lo, f_of(v));
        hi = std::max(hi, f_of(v));
    }
    a.scaling.f_min = floor_at_zero ? 0.0 : lo;
    a.scaling.f_max = floor_at_zero ? std::max(0.0, hi) : hi;
    if (a.scaling.degenerate()) {
        a.scaling.f_max = a.scaling.f_min;
    }
    const double s = a.scaling.slope();

    Circuit &c = a.circuit;
    c.add_register("x0", n);
    const bool uniform = use_uniform(opt.style, n);
    const int n_cmp = uniform ? 0 : static_cast<int>(terms.size());
    c.add_register("cmp_carry", n_cmp > 0 ? comparator_carry_count(n) : 0);
    c.add_register("cmp", n_cmp);
    c.add_register("payoff", 1);
    a.payoff_qubit = c.reg("payoff").start;
    a.payoff_register = c.qubits("x0");
    a.style = uniform ? RotationStyle::kUniform : RotationStyle::kGeneric;
    c.append(load_distribution(dist));

    if (uniform) {
        std::vector<double> angles(N);
        for (uint64_t v = 0; v < N; ++v) {
            angles[v] = 2.0 * a.scaling.half_angle(f_of(v));
        }
        append_uniformly_controlled_ry(c, c.qubits("x0"), a.payoff_qubit, angles);
    } else {
        const auto value = c.qubits("x0");
        const auto carries = c.qubits("cmp_carry");
        std::vector<Circuit> cmps;
        std::vector<RotationTerm> rot;
        rot.push_back({{}, base_intercept, base_slope});
        for (size_t j = 0; j < terms.size(); ++j) {
            const int flag = c.reg("cmp").start + static_cast<int>(j);
            cmps.push_back(comparator_on(c.num_qubits(), value, carries, flag, terms[j].threshold));
            c.append(cmps.back());
            rot.push_back({{{flag, terms[j].on_one}}, terms[j].intercept, terms[j].slope});
        }
        emit_linear_rotations(c, a.payoff_qubit, value, rot, a.scaling.g0() - s * a.scaling.f_min, s);
        for (size_t j = cmps.size(); j-- > 0;) {
            c.append(cmps[j].inverse());
        }
    }
    finish_operator(a, spec, [&](uint64_t k) { return f_of(k); });
    return a;
}

}  // namespace detail

/// European call or put. Payoffs live in index units of the price grid:
/// f(i) = max(0, i - kappa) for a call with kappa = (K - S_min)/spacing,
/// which may be fractional when K is off the grid.
inline AOperator build_european_A(const DiscretizedDistribution &dist, const OptionSpec &spec,
                                  const PayoffOptions &opt = {}) {
    detail::check_dims(dist, 1, "european");
    const bool call = std::holds_alternative<EuropeanCall>(spec);
    if (!call && !std::holds_alternative<EuropeanPut>(spec)) {
        throw std::invalid_argument("build_european_A: spec must be a European call or put");
    }
    const double strike = call ? std::get<EuropeanCall>(spec).strike : std::get<EuropeanPut>(spec).strike;
    const double lo = dist.value(0, 0);
    const double hi = dist.value(0, dist.points(0) - 1);
    const double dx = dist.spacing(0);
    if (!std::isfinite(strike) || strike < lo - dx || strike > hi + dx) {
        throw std::out_of_range("strike " + std::to_string(strike) + " outside grid [" + std::to_string(lo) + ", " +
                                std::to_string(hi) + "]");
    }
    std::vector<std::string> warnings;
    const uint64_t k_idx = map_strike_to_index(dist, strike, 0, &warnings);
    const double kappa = (strike - lo) / dx;
    std::vector<detail::StrikeTerm> terms;
    if (call) {
        terms.push_back({k_idx, true, -kappa, 1.0});
    } else {
        terms.push_back({k_idx, false, kappa, -1.0});
    }
    return detail::build_single_register(dist, spec, opt, 0.0, 0.0, terms, true, std::move(warnings));
}

/// Piecewise-linear portfolio: one comparator flag per strike, segment j
/// added once the price reaches strike j.
inline AOperator build_portfolio_A(const DiscretizedDistribution &dist, const Portfolio &spec,
                                   const PayoffOptions &opt = {}) {
    detail::check_dims(dist, 1, "portfolio");
    if (spec.segments.size() != spec.strikes.size() + 1) {
        throw std::invalid_argument("portfolio: need one more segment than strikes");
    }
    for (size_t j = 1; j < spec.strikes.size(); ++j) {
        if (spec.strikes[j] < spec.strikes[j - 1]) {
            throw std::invalid_argument("portfolio: strikes must be nondecreasing");
        }
    }
    const double lo = dist.value(0, 0);
    const double dx = dist.spacing(0);
    auto to_index = [&](const LinearSegment &s) {
        // a (lo + i dx) + b = dx * (a i + (a lo + b)/dx)
        return std::pair<double, double>{(s.slope * lo + s.intercept) / dx, s.slope};
    };
    std::vector<std::string> warnings;
    std::vector<detail::StrikeTerm> terms;
    for (size_t j = 0; j < spec.strikes.size(); ++j) {
        const auto [b, a] = to_index(spec.segments[j + 1]);
        terms.push_back({map_strike_to_index(dist, spec.strikes[j], 0, &warnings), true, b, a});
    }
    const auto [b0, a0] = to_index(spec.segments[0]);
    return detail::build_single_register(dist, spec, opt, b0, a0, terms, false, std::move(warnings));
}

/// Integer weights W_j and unit lambda with w_j * spacing_j = lambda * W_j.
struct BasketRescaling {
    std::vector<uint64_t> integer_weights;
    double unit = 1.0;
    uint64_t denominator = 1;
};

inline BasketRescaling rescale_basket_weights(const DiscretizedDistribution &dist, std::span<const double> weights,
                                              uint64_t max_denominator, double tolerance) {
    const int d = dist.dimension();
    if (static_cast<int>(weights.size()) != d) {
        throw std::invalid_argument("basket: one weight per asset required");
    }
    std::vector<double> r(d);
    double r_ref = 0.0;
    for (int j = 0; j < d; ++j) {
        if (!(weights[j] >= 0.0) || !std::isfinite(weights[j])) {
            throw std::invalid_argument("basket: weights must be finite and nonnegative");
        }
        r[j] = weights[j] * dist.spacing(j);
        if (r[j] > 0.0 && (r_ref == 0.0 || r[j] < r_ref)) {
            r_ref = r[j];
        }
    }
    if (r_ref == 0.0) {
        throw std::invalid_argument("basket: at least one weight must be positive");
    }
    for (uint64_t D = 1; D <= max_denominator; ++D) {
        BasketRescaling out;
        out.denominator = D;
        out.unit = r_ref / static_cast<double>(D);
        bool ok = true;
        for (int j = 0; j < d && ok; ++j) {
            const double x = static_cast<double>(D) * r[j] / r_ref;
            const double w = std::round(x);
            ok = std::abs(x - w) <= tolerance * std::max(1.0, x);
            out.integer_weights.push_back(static_cast<uint64_t>(w));
        }
        if (ok) {
            return out;
        }
    }
    throw std::invalid_argument("basket: weights are not rationally rescalable with denominator <= " +
                                std::to_string(max_denominator));
}

namespace detail {

inline AOperator build_sum_payoff(const DiscretizedDistribution &dist, const OptionSpec &spec,
                                  std::span<const double> weights, double strike, const PayoffOptions &opt) {
    check_c(opt.c);
    const int d = dist.dimension();
    const auto resc = rescale_basket_weights(dist, weights, opt.max_denominator, opt.rescale_tolerance);
    std::vector<int> widths(dist.qubits.begin(), dist.qubits.end());
    const auto qubit_weights = expand_integer_weights(resc.integer_weights, widths);
    uint64_t b_max = 0;
    for (int j = 0; j < d; ++j) {
        b_max += resc.integer_weights[j] * (dist.points(j) - 1);
    }
    if (b_max == 0) {
        throw std::invalid_argument("basket: all integer weights are zero");
    }
    double offset = 0.0;
    for (int j = 0; j < d; ++j) {
        offset += weights[j] * dist.value(j, 0);
    }
    const double kappa = (strike - offset) / resc.unit;
    const int m = weighted_sum_width(qubit_weights);
    const uint64_t top = uint64_t{1} << m;
    uint64_t k_idx = top;
    std::vector<std::string> warnings;
    if (kappa <= 0.0) {
        k_idx = 0;
        if (kappa < 0.0) {
            warnings.push_back("basket strike below the smallest reachable basket value");
        }
    } else if (kappa <= static_cast<double>(top)) {
        k_idx = static_cast<uint64_t>(std::ceil(kappa));
    }
    auto f_of = [&](uint64_t b) {
        return b >= k_idx ? static_cast<double>(b) - kappa : 0.0;
    };

    AOperator a;
    a.dist = dist;
    a.warnings = std::move(warnings);
    a.scaling.c = opt.c;
    a.scaling.unit = resc.unit;
    a.scaling.f_min = 0.0;
    a.scaling.f_max = std::max(0.0, f_of(b_max));

    Circuit &c = a.circuit;
    for (int j = 0; j < d; ++j) {
        c.add_register("x" + std::to_string(j), dist.qubits[j]);
    }
    c.add_register("sum", m);
    c.add_register("sum_carry", weighted_sum_carry_count(qubit_weights));
    const bool uniform = use_uniform(opt.style, m);
    c.add_register("cmp_carry", uniform ? 0 : comparator_carry_count(m));
    c.add_register("cmp", uniform ? 0 : 1);
    c.add_register("payoff", 1);
    a.payoff_qubit = c.reg("payoff").start;
    a.payoff_register = c.qubits("sum");
    a.style = uniform ? RotationStyle::kUniform : RotationStyle::kGeneric;

    std::vector<int> inputs;
    for (int j = 0; j < d; ++j) {
        const auto q = c.qubits("x" + std::to_string(j));
        inputs.insert(inputs.end(), q.begin(), q.end());
    }
    Circuit loader = load_distribution(dist);
    loader.grow(c.num_qubits() - loader.num_qubits());
    c.append(loader);
    Circuit adder(c.num_qubits());
    append_weighted_sum(adder, inputs, qubit_weights, c.qubits("sum"), c.qubits("sum_carry"));
    c.append(adder);
    const auto sum = c.qubits("sum");
    if (uniform) {
        std::vector<double> angles(top);
        for (uint64_t b = 0; b < top; ++b) {
            angles[b] = 2.0 * a.scaling.half_angle(std::min(f_of(b), a.scaling.f_max));
        }
        append_uniformly_controlled_ry(c, sum, a.payoff_qubit, angles);
    } else {
        const int flag = c.reg("cmp").start;
        Circuit cmp = comparator_on(c.num_qubits(), sum, c.qubits("cmp_carry"), flag, k_idx);
        c.append(cmp);
        const double s = a.scaling.slope();
        emit_linear_rotations(c, a.payoff_qubit, sum, {{{{flag, true}}, -kappa, 1.0}}, a.scaling.g0(), s);
        c.append(cmp.inverse());
    }
    c.append(adder.inverse());

    finish_operator(a, spec, [&](uint64_t k) {
        const auto idx = dist.unflatten(k);
        uint64_t b = 0;
        for (int j = 0; j < d; ++j) {
            b += resc.integer_weights[j] * idx[j];
        }
        return f_of(b);
    });
    return a;
}

}  // namespace detail

/// Basket call: weighted index sum into an accumulator, compared against the
/// strike expressed in accumulator units.
inline AOperator build_basket_A(const DiscretizedDistribution &dist, const Basket &spec,
                                const PayoffOptions &opt = {}) {
    return detail::build_sum_payoff(dist, spec, spec.weights, spec.strike, opt);
}

/// Arithmetic-average call over a time-series distribution: the basket
/// construction with weights 1/d.
inline AOperator build_asian_A(const DiscretizedDistribution &dist, const Asian &spec,
                               const PayoffOptions &opt = {}) {
    const int d = dist.dimension();
    if (d < 2) {
        throw std::invalid_argument("asian: needs at least two time steps");
    }
    std::vector<double> w(d, 1.0 / d);
    return detail::build_sum_payoff(dist, spec, w, spec.strike, opt);
}

/// Barrier call over a time-series distribution: per-step barrier flags,
/// OR into a single crossing flag, strike comparator on the last step, and
/// payoff rotations conditioned on the crossing flag.
inline AOperator build_barrier_A(const DiscretizedDistribution &dist, const Barrier &spec,
                                 const PayoffOptions &opt = {}) {
    detail::check_c(opt.c);
    const int d = dist.dimension();
    if (d < 1) {
        throw std::invalid_argument("barrier: needs at least one time step");
    }
    if (opt.style == RotationStyle::kUniform) {
        throw std::invalid_argument("barrier: uniformly controlled rotation style is not supported");
    }
    const int n = dist.qubits[d - 1];
    for (int j = 0; j < d; ++j) {
        if (dist.qubits[j] != n || dist.lows[j] != dist.lows[0] || dist.highs[j] != dist.highs[0]) {
            throw std::invalid_argument("barrier: all steps must share one grid");
        }
    }
    const double lo = dist.value(0, 0);
    const double hi = dist.value(0, dist.points(0) - 1);
    const double dx = dist.spacing(0);
    if (!std::isfinite(spec.barrier) || spec.barrier < lo || spec.barrier > hi) {
        throw std::out_of_range("barrier " + std::to_string(spec.barrier) + " outside grid [" + std::to_string(lo) +
                                ", " + std::to_string(hi) + "]");
    }
    if (!std::isfinite(spec.strike) || spec.strike < lo - dx || spec.strike > hi + dx) {
        throw std::out_of_range("strike " + std::to_string(spec.strike) + " outside grid");
    }
    std::vector<std::string> warnings;
    const uint64_t k_idx = map_strike_to_index(dist, spec.strike, d - 1, &warnings);
    const double kappa = (spec.strike - lo) / dx;
    // Up: flag = [i >= B_idx]. Down: flag = NOT [i >= B_le + 1], B_le the
    // largest index with S <= B.
    uint64_t b_threshold = map_strike_to_index(dist, spec.barrier, 0);
    const bool down = spec.crossing == BarrierCrossing::kDown;
    if (down) {
        uint64_t le = 0;
        for (uint64_t i = 0; i < dist.points(0); ++i) {
            if (dist.value(0, i) <= spec.barrier) {
                le = i + 1;
            }
        }
        b_threshold = le;
    }

    AOperator a;
    a.dist = dist;
    a.warnings = std::move(warnings);
    a.scaling.c = opt.c;
    a.scaling.unit = dx;
    a.scaling.f_min = 0.0;
    a.scaling.f_max = k_idx < dist.points(0) ? std::max(0.0, static_cast<double>(dist.points(0) - 1) - kappa) : 0.0;

    Circuit &c = a.circuit;
    for (int j = 0; j < d; ++j) {
        c.add_register("x" + std::to_string(j), dist.qubits[j]);
    }
    c.add_register("scratch", std::max(comparator_carry_count(n), or_scratch_count(d)));
    c.add_register("barrier", d);
    c.add_register("barrier_or", 1);
    c.add_register("cmp", 1);
    c.add_register("payoff", 1);
    a.payoff_qubit = c.reg("payoff").start;
    a.payoff_register = c.qubits("x" + std::to_string(d - 1));
    a.style = RotationStyle::kGeneric;
    const auto scratch = c.qubits("scratch");
    const auto flags = c.qubits("barrier");
    const int crossed = c.reg("barrier_or").start;
    const int strike_flag = c.reg("cmp").start;

    Circuit loader = load_distribution(dist);
    loader.grow(c.num_qubits() - loader.num_qubits());
    c.append(loader);

    Circuit detect(c.num_qubits());
    for (int t = 0; t < d; ++t) {
        append_comparator(detect, c.qubits("x" + std::to_string(t)), scratch, flags[t], b_threshold);
        if (down) {
            detect.append(Gate::x(flags[t]));
        }
    }
    append_or(detect, flags, crossed, scratch);
    append_comparator(detect, a.payoff_register, scratch, strike_flag, k_idx);
    c.append(detect);
    const bool knock_in = spec.kind == BarrierKind::kKnockIn;
    detail::emit_linear_rotations(c, a.payoff_qubit, a.payoff_register,
                                  {{{{strike_flag, true}, {crossed, knock_in}}, -kappa, 1.0}}, a.scaling.g0(),
                                  a.scaling.slope());
    c.append(detect.inverse());

    detail::finish_operator(a, spec, [&](uint64_t k) {
        const auto idx = dist.unflatten(k);
        bool any = false;
        for (int t = 0; t < d; ++t) {
            any |= down ? idx[t] < b_threshold : idx[t] >= b_threshold;
        }
        if (any != knock_in || idx[d - 1] < k_idx) {
            return 0.0;
        }
        return static_cast<double>(idx[d - 1]) - kappa;
    });
    return a;
}

/// Dispatches on the contract family.
inline AOperator build_A(const DiscretizedDistribution &dist, const OptionSpec &spec, const PayoffOptions &opt = {}) {
    return std::visit(
        [&](const auto &o) -> AOperator {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, EuropeanCall> || std::is_same_v<T, EuropeanPut>) {
                return build_european_A(dist, spec, opt);
            } else if constexpr (std::is_same_v<T, Portfolio>) {
                return build_portfolio_A(dist, o, opt);
            } else if constexpr (std::is_same_v<T, Basket>) {
                return build_basket_A(dist, o, opt);
            } else if constexpr (std::is_same_v<T, Asian>) {
                return build_asian_A(dist, o, opt);
            } else {
                return build_barrier_A(dist, o, opt);
            }
        },
        spec);
}

}  // namespace qopt
