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
 * Lognormal price models, truncated grid discretization and exact amplitude
 * loading.
 *
 * Multi-register distributions use a flat joint index in which register 0
 * occupies the lowest bits: flat = i_0 + 2^{n_0} i_1 + 2^{n_0+n_1} i_2 + ...
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qopt/blocks.hpp"
#include "qopt/parallel.hpp"
#include "qopt/qsim.hpp"
#include "qopt/rng.hpp"

namespace qopt {

/// Largest joint grid accepted by the multivariate discretizers.
inline constexpr uint64_t kMaxJointGridSize = uint64_t{1} << 20;

/// Geometric Brownian motion terminal distribution: ln S_T ~ N(mu, sigma^2 T).
struct LognormalModel {
    double spot = 1.0;
    double volatility = 0.1;
    double rate = 0.0;
    double maturity = 1.0;

    void validate() const {
        if (!(spot > 0.0) || !(volatility > 0.0) || !(maturity > 0.0) || !std::isfinite(rate)) {
            throw std::invalid_argument("lognormal model needs spot > 0, volatility > 0, maturity > 0");
        }
    }
    double mu() const {
        return (rate - 0.5 * volatility * volatility) * maturity + std::log(spot);
    }
    /// Standard deviation of ln S_T.
    double log_stddev() const {
        return volatility * std::sqrt(maturity);
    }
    double mean() const {
        const double s2 = log_stddev() * log_stddev();
        return std::exp(mu() + 0.5 * s2);
    }
    double stddev() const {
        const double s2 = log_stddev() * log_stddev();
        return std::sqrt(std::expm1(s2)) * mean();
    }
    double pdf(double x) const {
        if (!(x > 0.0)) {
            return 0.0;
        }
        const double s = log_stddev();
        const double z = (std::log(x) - mu()) / s;
        return std::exp(-0.5 * z * z) / (x * s * std::sqrt(2.0 * std::numbers::pi));
    }
};

/// d correlated assets at a common horizon, or one asset observed at d
/// equally spaced times (time-series mode).
struct MultivariateLognormalModel {
    std::vector<double> spots;
    std::vector<double> volatilities;
    /// Row-major d x d correlation matrix. Ignored in time-series mode.
    std::vector<double> correlation;
    double rate = 0.0;
    double maturity = 1.0;
    bool time_series = false;

    static MultivariateLognormalModel assets(std::vector<double> spots, std::vector<double> volatilities,
                                             std::vector<double> correlation, double rate, double maturity) {
        MultivariateLognormalModel m;
        m.spots = std::move(spots);
        m.volatilities = std::move(volatilities);
        m.correlation = std::move(correlation);
        m.rate = rate;
        m.maturity = maturity;
        m.validate();
        return m;
    }

    /// d assets sharing spot and volatility with a single pairwise correlation.
    static MultivariateLognormalModel identical_assets(int d, const LognormalModel &one, double rho) {
        std::vector<double> corr(static_cast<size_t>(d) * d, rho);
        for (int k = 0; k < d; ++k) {
            corr[k * d + k] = 1.0;
        }
        return assets(std::vector<double>(d, one.spot), std::vector<double>(d, one.volatility), std::move(corr),
                      one.rate, one.maturity);
    }

    static MultivariateLognormalModel path(const LognormalModel &one, int steps) {
        MultivariateLognormalModel m;
        m.spots.assign(steps, one.spot);
        m.volatilities.assign(steps, one.volatility);
        m.rate = one.rate;
        m.maturity = one.maturity;
        m.time_series = true;
        m.validate();
        return m;
    }

    int dimension() const {
        return static_cast<int>(spots.size());
    }

    double step() const {
        return maturity / static_cast<double>(dimension());
    }

    void validate() const {
        const int d = dimension();
        if (d < 1) {
            throw std::invalid_argument("multivariate model needs at least one dimension");
        }
        if (static_cast<int>(volatilities.size()) != d) {
            throw std::invalid_argument("multivariate model: one volatility per dimension required");
        }
        if (!(maturity > 0.0) || !std::isfinite(rate)) {
            throw std::invalid_argument("multivariate model: maturity must be positive");
        }
        for (int k = 0; k < d; ++k) {
            if (!(spots[k] > 0.0) || !(volatilities[k] > 0.0)) {
                throw std::invalid_argument("multivariate model: spots and volatilities must be positive");
            }
        }
        if (time_series) {
            return;
        }
        if (static_cast<int>(correlation.size()) != d * d) {
            throw std::invalid_argument("multivariate model: correlation must be d x d");
        }
        for (int i = 0; i < d; ++i) {
            if (std::abs(correlation[i * d + i] - 1.0) > 1e-12) {
                throw std::invalid_argument("multivariate model: correlation diagonal must be 1");
            }
            for (int j = 0; j < d; ++j) {
                const double r = correlation[i * d + j];
                if (!(r >= -1.0 && r <= 1.0) || std::abs(r - correlation[j * d + i]) > 1e-12) {
                    throw std::invalid_argument("multivariate model: correlation must be symmetric in [-1, 1]");
                }
            }
        }
        Eigen::LLT<Eigen::MatrixXd> llt(covariance());
        if (llt.info() != Eigen::Success) {
            throw std::invalid_argument("multivariate model: covariance is not positive definite");
        }
    }

    /// Mean of ln S_j (asset mode) or of ln S_t (time-series mode).
    Eigen::VectorXd mu() const {
        const int d = dimension();
        Eigen::VectorXd out(d);
        for (int k = 0; k < d; ++k) {
            const double s = volatilities[k];
            const double t = time_series ? step() * (k + 1) : maturity;
            out[k] = (rate - 0.5 * s * s) * t + std::log(spots[k]);
        }
        return out;
    }

    /// Covariance of the log prices. In time-series mode this is the
    /// covariance of the log increments, diagonal with entries sigma^2 dt.
    Eigen::MatrixXd covariance() const {
        const int d = dimension();
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) {
                if (time_series) {
                    if (i == j) {
                        out(i, i) = volatilities[i] * volatilities[i] * step();
                    }
                } else {
                    out(i, j) = volatilities[i] * volatilities[j] * correlation[i * d + j] * maturity;
                }
            }
        }
        return out;
    }

    /// Marginal model of dimension j (for time series: the price at step j+1).
    LognormalModel marginal(int j) const {
        const double t = time_series ? step() * (j + 1) : maturity;
        return LognormalModel{spots[j], volatilities[j], rate, t};
    }
};

/// Probabilities over a product of uniform grids, one per register.
struct DiscretizedDistribution {
    std::vector<int> qubits;
    std::vector<double> lows;
    std::vector<double> highs;
    /// Flat joint index, register 0 in the lowest bits.
    std::vector<double> probabilities;

    int dimension() const {
        return static_cast<int>(qubits.size());
    }
    int total_qubits() const {
        int n = 0;
        for (int q : qubits) {
            n += q;
        }
        return n;
    }
    uint64_t points(int j) const {
        return uint64_t{1} << qubits.at(j);
    }
    size_t size() const {
        return probabilities.size();
    }
    double spacing(int j) const {
        return (highs.at(j) - lows.at(j)) / static_cast<double>(points(j) - 1);
    }
    double value(int j, uint64_t i) const {
        return lows.at(j) + static_cast<double>(i) * spacing(j);
    }
    std::vector<double> grid(int j) const {
        std::vector<double> out(points(j));
        for (uint64_t i = 0; i < out.size(); ++i) {
            out[i] = value(j, i);
        }
        return out;
    }
    /// Nearest grid index, clamped to the grid.
    uint64_t index_of(int j, double v) const {
        const double x = std::round((v - lows.at(j)) / spacing(j));
        if (x <= 0.0) {
            return 0;
        }
        return std::min<uint64_t>(static_cast<uint64_t>(x), points(j) - 1);
    }
    /// Flat index -> per-register indices.
    std::vector<uint64_t> unflatten(uint64_t flat) const {
        std::vector<uint64_t> out(qubits.size());
        for (size_t j = 0; j < qubits.size(); ++j) {
            out[j] = flat & ((uint64_t{1} << qubits[j]) - 1);
            flat >>= qubits[j];
        }
        return out;
    }
    std::vector<double> marginal(int j) const {
        std::vector<double> out(points(j), 0.0);
        for (uint64_t f = 0; f < probabilities.size(); ++f) {
            out[unflatten(f)[j]] += probabilities[f];
        }
        return out;
    }
    /// First qubit of register j inside the flat index.
    int offset(int j) const {
        int o = 0;
        for (int k = 0; k < j; ++k) {
            o += qubits[k];
        }
        return o;
    }
};

namespace detail {

inline void normalize_or_throw(std::vector<double> &p, const char *what) {
    double total = 0.0;
    for (double v : p) {
        total += v;
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
        throw std::invalid_argument(std::string(what) + ": no probability mass on the grid");
    }
    for (double &v : p) {
        v /= total;
    }
}

inline std::pair<double, double> truncation_bounds(const LognormalModel &m, double trunc_stddevs) {
    if (!(trunc_stddevs > 0.0)) {
        throw std::invalid_argument("truncation width must be positive");
    }
    const double mean = m.mean();
    const double sd = m.stddev();
    double low = mean - trunc_stddevs * sd;
    const double high = mean + trunc_stddevs * sd;
    if (low <= 0.0) {
        low = mean * 1e-9;
    }
    if (!(high > low) || !std::isfinite(high)) {
        throw std::invalid_argument("degenerate truncation bounds");
    }
    return {low, high};
}

inline void check_qubits(int n) {
    if (n < 1 || n > 20) {
        throw std::invalid_argument("qubits per register must be in [1, 20]");
    }
}

}  // namespace detail

/// pdf evaluated on a caller-chosen uniform grid [low, high], renormalized.
inline DiscretizedDistribution discretize_lognormal_on_grid(const LognormalModel &model, int n_qubits, double low,
                                                            double high) {
    model.validate();
    detail::check_qubits(n_qubits);
    if (!(high > low) || !(low >= 0.0)) {
        throw std::invalid_argument("degenerate truncation bounds");
    }
    DiscretizedDistribution d;
    d.qubits = {n_qubits};
    d.lows = {low};
    d.highs = {high};
    d.probabilities.resize(d.points(0));
    for (uint64_t i = 0; i < d.points(0); ++i) {
        d.probabilities[i] = model.pdf(d.value(0, i));
    }
    detail::normalize_or_throw(d.probabilities, "discretize_lognormal");
    return d;
}

/// Grid over mean +- trunc_stddevs * stddev of S_T.
inline DiscretizedDistribution discretize_lognormal(const LognormalModel &model, int n_qubits,
                                                    double trunc_stddevs = 3.0) {
    model.validate();
    const auto [low, high] = detail::truncation_bounds(model, trunc_stddevs);
    return discretize_lognormal_on_grid(model, n_qubits, low, high);
}

/// Asset mode: joint lognormal pdf on the product of per-asset truncated
/// grids. Time-series mode: all steps share the grid of the final-time
/// marginal and the joint is the product of per-step transition kernels,
/// each renormalized over the grid, so the first step's marginal equals the
/// univariate discretization at one time step.
inline DiscretizedDistribution discretize_multivariate(const MultivariateLognormalModel &model,
                                                       std::span<const int> n_qubits_per_dim,
                                                       double trunc_stddevs = 3.0) {
    model.validate();
    const int d = model.dimension();
    if (static_cast<int>(n_qubits_per_dim.size()) != d) {
        throw std::invalid_argument("discretize_multivariate: one qubit count per dimension required");
    }
    DiscretizedDistribution out;
    int total = 0;
    for (int n : n_qubits_per_dim) {
        detail::check_qubits(n);
        total += n;
    }
    if (total > 20) {
        throw std::invalid_argument("discretize_multivariate: joint grid of 2^" + std::to_string(total) +
                                    " entries exceeds the 2^20 limit");
    }
    out.qubits.assign(n_qubits_per_dim.begin(), n_qubits_per_dim.end());

    if (model.time_series) {
        for (int k = 1; k < d; ++k) {
            if (out.qubits[k] != out.qubits[0]) {
                throw std::invalid_argument("time-series discretization needs equal qubits per step");
            }
        }
        const auto [low, high] = detail::truncation_bounds(model.marginal(d - 1), trunc_stddevs);
        out.lows.assign(d, low);
        out.highs.assign(d, high);
        const uint64_t n = out.points(0);
        const auto grid = out.grid(0);
        const double sigma = model.volatilities[0];
        const double dt = model.step();
        auto kernel_from = [&](double prev) {
            LognormalModel step{prev, sigma, model.rate, dt};
            std::vector<double> row(n);
            for (uint64_t i = 0; i < n; ++i) {
                row[i] = step.pdf(grid[i]);
            }
            detail::normalize_or_throw(row, "discretize_multivariate");
            return row;
        };
        const auto first = kernel_from(model.spots[0]);
        std::vector<std::vector<double>> transition(n);
        for (uint64_t i = 0; i < n; ++i) {
            transition[i] = kernel_from(grid[i]);
        }
        out.probabilities.assign(uint64_t{1} << total, 0.0);
        for (uint64_t f = 0; f < out.probabilities.size(); ++f) {
            const auto idx = out.unflatten(f);
            double p = first[idx[0]];
            for (int t = 1; t < d; ++t) {
                p *= transition[idx[t - 1]][idx[t]];
            }
            out.probabilities[f] = p;
        }
        detail::normalize_or_throw(out.probabilities, "discretize_multivariate");
        return out;
    }

    for (int k = 0; k < d; ++k) {
        const auto [low, high] = detail::truncation_bounds(model.marginal(k), trunc_stddevs);
        out.lows.push_back(low);
        out.highs.push_back(high);
    }
    const Eigen::VectorXd mu = model.mu();
    const Eigen::MatrixXd cov = model.covariance();
    const Eigen::MatrixXd prec = cov.inverse();
    const double norm = 1.0 / (std::pow(2.0 * std::numbers::pi, 0.5 * d) * std::sqrt(cov.determinant()));
    out.probabilities.assign(uint64_t{1} << total, 0.0);
    parallel_for(out.probabilities.size(), [&](size_t f) {
        const auto idx = out.unflatten(f);
        Eigen::VectorXd z(d);
        double jac = 1.0;
        for (int k = 0; k < d; ++k) {
            const double s = out.value(k, idx[k]);
            jac *= s;
            z[k] = std::log(s) - mu[k];
        }
        out.probabilities[f] = norm * std::exp(-0.5 * z.dot(prec * z)) / jac;
    });
    detail::normalize_or_throw(out.probabilities, "discretize_multivariate");
    return out;
}

/// Draws flat joint indices from the distribution.
inline std::vector<uint64_t> sample_indices(const DiscretizedDistribution &dist, size_t count, uint64_t seed) {
    DiscreteSampler sampler(dist.probabilities);
    Rng rng(seed);
    std::vector<uint64_t> out(count);
    for (auto &v : out) {
        v = sampler.sample(rng);
    }
    return out;
}

/// State preparation |0> -> sum_f sqrt(p_f)|f>. Registers "x0", "x1", ...
/// hold the per-dimension indices. Bits are fixed from the most significant
/// flat qubit down, each by a uniformly controlled Ry on the conditional
/// probability given the higher bits.
inline Circuit load_distribution(const DiscretizedDistribution &dist) {
    const int n = dist.total_qubits();
    if (n < 1 || dist.probabilities.size() != (uint64_t{1} << n)) {
        throw std::invalid_argument("load_distribution: probability count does not match qubit layout");
    }
    Circuit c;
    for (int j = 0; j < dist.dimension(); ++j) {
        c.add_register("x" + std::to_string(j), dist.qubits[j]);
    }
    std::vector<std::vector<double>> levels(n + 1);
    levels[0] = dist.probabilities;
    for (int l = 1; l <= n; ++l) {
        const auto &prev = levels[l - 1];
        std::vector<double> next(prev.size() / 2);
        for (size_t k = 0; k < next.size(); ++k) {
            next[k] = prev[2 * k] + prev[2 * k + 1];
        }
        levels[l] = std::move(next);
    }
    // levels[l][k]: mass of flat indices whose top n-l bits equal k.
    for (int q = n - 1; q >= 0; --q) {
        const auto &child = levels[q];
        const size_t prefixes = size_t{1} << (n - 1 - q);
        std::vector<double> angles(prefixes);
        for (size_t k = 0; k < prefixes; ++k) {
            const double m0 = child[2 * k];
            const double m1 = child[2 * k + 1];
            angles[k] = (m0 + m1 > 0.0) ? 2.0 * std::atan2(std::sqrt(std::max(0.0, m1)), std::sqrt(std::max(0.0, m0)))
                                        : 0.0;
        }
        std::vector<int> controls;
        for (int h = q + 1; h < n; ++h) {
            controls.push_back(h);
        }
        append_uniformly_controlled_ry(c, controls, q, angles);
    }
    return c;
}

}  // namespace qopt
