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
 * Classical Monte Carlo baseline, error quantiles, the AE vs MC convergence
 * study and the folded-CNOT mitigation sweep.
 */

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qopt/ae.hpp"
#include "qopt/dist.hpp"
#include "qopt/noise.hpp"
#include "qopt/parallel.hpp"
#include "qopt/payoff.hpp"
#include "qopt/rng.hpp"

namespace qopt {

/// Probability mass inside the canonical AE error band, 8 / pi^2.
inline constexpr double kAeConfidence = 8.0 / (std::numbers::pi * std::numbers::pi);

enum class McMode {
    /// Exact (multivariate) lognormal draws.
    kContinuous,
    /// Draws from the discretized joint grid, the same target as AE.
    kGrid,
};

inline const char *mc_mode_name(McMode m) {
    return m == McMode::kGrid ? "grid" : "continuous";
}

/// Two-sided standard normal quantile: z with P(|Z| <= z) = level.
inline double normal_two_sided_quantile(double level) {
    if (!(level > 0.0 && level < 1.0)) {
        throw std::invalid_argument("confidence level must lie in (0, 1)");
    }
    double lo = 0.0;
    double hi = 40.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (std::erf(mid / std::numbers::sqrt2) < level) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

struct MCResult {
    double estimate = 0.0;
    double std_error = 0.0;
    double level = 0.95;
    /// Normal half-width at `level`.
    double half_width = 0.0;
    uint64_t paths = 0;
    uint64_t seed = 0;
    McMode mode = McMode::kGrid;
};

/// Symmetric PSD square root V diag(sqrt(max(l, 0))) V^T, with eigenpairs in
/// Eigen's ascending order.
inline Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd &m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) {
        throw std::invalid_argument("symmetric_sqrt: eigendecomposition failed");
    }
    const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

namespace detail {

inline MCResult finish_mc(double sum, double sum_sq, uint64_t paths, uint64_t seed, McMode mode, double level) {
    MCResult r;
    const double n = static_cast<double>(paths);
    r.estimate = sum / n;
    const double var = paths > 1 ? std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0)) : 0.0;
    r.std_error = std::sqrt(var / n);
    r.level = level;
    r.half_width = normal_two_sided_quantile(level) * r.std_error;
    r.paths = paths;
    r.seed = seed;
    r.mode = mode;
    return r;
}

}  // namespace detail

/// Grid-mode sampler; reusable across trials.
class GridMonteCarlo {
   public:
    GridMonteCarlo(const DiscretizedDistribution &dist, std::vector<double> payoff)
        : sampler_(dist.probabilities), payoff_(std::move(payoff)) {
        if (payoff_.size() != dist.size()) {
            throw std::invalid_argument("GridMonteCarlo: one payoff per grid point required");
        }
    }
    GridMonteCarlo(const DiscretizedDistribution &dist, const OptionSpec &spec)
        : GridMonteCarlo(dist, payoff_on_grid(dist, spec)) {
    }

    MCResult run(uint64_t paths, uint64_t seed, double level = 0.95) const {
        if (paths == 0) {
            throw std::invalid_argument("mc: paths must be >= 1");
        }
        Rng rng(seed);
        double sum = 0.0;
        double sum_sq = 0.0;
        for (uint64_t p = 0; p < paths; ++p) {
            const double v = payoff_[sampler_.sample(rng)];
            sum += v;
            sum_sq += v * v;
        }
        return detail::finish_mc(sum, sum_sq, paths, seed, McMode::kGrid, level);
    }

   private:
    DiscreteSampler sampler_;
    std::vector<double> payoff_;
};

/// Continuous-mode sampler. Asset mode draws ln S = mu + L z; time-series
/// mode accumulates increments L z along the path.
class ContinuousMonteCarlo {
   public:
    ContinuousMonteCarlo(const MultivariateLognormalModel &model, OptionSpec spec)
        : model_(model), spec_(std::move(spec)) {
        model_.validate();
        mu_ = model_.mu();
        root_ = symmetric_sqrt(model_.covariance());
    }

    MCResult run(uint64_t paths, uint64_t seed, double level = 0.95) const {
        if (paths == 0) {
            throw std::invalid_argument("mc: paths must be >= 1");
        }
        const int d = model_.dimension();
        Rng rng(seed);
        Eigen::VectorXd z(d);
        std::vector<double> s(d);
        double sum = 0.0;
        double sum_sq = 0.0;
        for (uint64_t p = 0; p < paths; ++p) {
            for (int k = 0; k < d; ++k) {
                z[k] = rng.normal();
            }
            const Eigen::VectorXd x = root_ * z;
            double acc = 0.0;
            for (int k = 0; k < d; ++k) {
                acc = model_.time_series ? acc + x[k] : x[k];
                s[k] = std::exp(mu_[k] + acc);
            }
            const double v = evaluate_payoff(spec_, s);
            sum += v;
            sum_sq += v * v;
        }
        return detail::finish_mc(sum, sum_sq, paths, seed, McMode::kContinuous, level);
    }

   private:
    MultivariateLognormalModel model_;
    OptionSpec spec_;
    Eigen::VectorXd mu_;
    Eigen::MatrixXd root_;
};

inline MultivariateLognormalModel single_asset(const LognormalModel &m) {
    return MultivariateLognormalModel::assets({m.spot}, {m.volatility}, {1.0}, m.rate, m.maturity);
}

/// One Monte Carlo estimate. Grid mode samples `dist`; continuous mode
/// samples `model`.
inline MCResult mc_price(const OptionSpec &spec, const MultivariateLognormalModel &model,
                         const DiscretizedDistribution &dist, uint64_t paths, uint64_t seed, McMode mode,
                         double level = 0.95) {
    if (mode == McMode::kGrid) {
        return GridMonteCarlo(dist, spec).run(paths, seed, level);
    }
    return ContinuousMonteCarlo(model, spec).run(paths, seed, level);
}

/// Empirical `level` order statistic of |x_t|: the ceil(level * n)-th
/// smallest.
inline double empirical_quantile(std::vector<double> abs_errors, double level) {
    if (abs_errors.empty()) {
        throw std::invalid_argument("empirical_quantile: no samples");
    }
    if (!(level > 0.0 && level <= 1.0)) {
        throw std::invalid_argument("empirical_quantile: level must lie in (0, 1]");
    }
    const size_t n = abs_errors.size();
    const size_t k = std::min(n, static_cast<size_t>(std::ceil(level * static_cast<double>(n))));
    std::nth_element(abs_errors.begin(), abs_errors.begin() + (k - 1), abs_errors.end());
    return abs_errors[k - 1];
}

/// `trials` independent grid-mode estimates at `paths` each, trial t seeded
/// derive_seed(seed, t); returns the `level` quantile of |estimate - target|.
inline double mc_error_at_confidence(const GridMonteCarlo &mc, double target, uint64_t paths, uint64_t trials,
                                     double level, uint64_t seed) {
    if (trials < 100) {
        throw std::invalid_argument("mc_error_at_confidence: trials must be >= 100");
    }
    std::vector<double> err(trials);
    parallel_for(trials, [&](size_t t) { err[t] = std::abs(mc.run(paths, derive_seed(seed, t)).estimate - target); });
    return empirical_quantile(std::move(err), level);
}

inline double mc_error_at_confidence(const OptionSpec &spec, const DiscretizedDistribution &dist, uint64_t paths,
                                     uint64_t trials, double level, uint64_t seed) {
    return mc_error_at_confidence(GridMonteCarlo(dist, spec), grid_expectation(dist, spec), paths, trials, level,
                                  seed);
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw std::invalid_argument("loglog_slope: need at least two paired points");
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (size_t k = 0; k < x.size(); ++k) {
        if (!(x[k] > 0.0) || !(y[k] > 0.0)) {
            throw std::invalid_argument("loglog_slope: values must be positive");
        }
        const double lx = std::log(x[k]);
        const double ly = std::log(y[k]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct ConvergenceRow {
    int m = 0;
    uint64_t M = 0;
    /// `level` quantile of |post_map(a_hat) - post_map(a)| over trials.
    double ae_error = 0.0;
    /// `level` quantile of |MC estimate - grid value| over trials at M paths.
    double mc_error = 0.0;
    /// Leading-order AE bound in price units.
    double ae_bound = 0.0;
    /// Fraction of AE trials with error <= ae_bound.
    double ae_within_bound = 0.0;
};

struct ConvergenceStudy {
    std::vector<ConvergenceRow> rows;
    double level = kAeConfidence;
    uint64_t trials = 0;
    uint64_t seed = 0;
    /// Expected payoff under the grid distribution.
    double grid_value = 0.0;
    /// post_map(exact P1): the value the AE estimator targets.
    double encoded_value = 0.0;
    double ae_slope = 0.0;
    double mc_slope = 0.0;
    /// Smallest M at which the AE error is below the MC error (0 if never).
    uint64_t crossover = 0;
};

struct ConvergenceOptions {
    int m_min = 3;
    int m_max = 12;
    uint64_t trials = 2000;
    double level = kAeConfidence;
    /// Shots per AE run.
    uint64_t ae_shots = 1;
};

/// AE (phase estimation, closed-form sampler) against grid-mode MC at equal
/// sample counts M = 2^m. AE trial t at m uses seed derive_seed(seed, 2m),
/// stream t; MC uses derive_seed(seed, 2m + 1), stream t.
inline ConvergenceStudy run_convergence_study(const AOperator &a, const ConvergenceOptions &opt, uint64_t seed) {
    if (opt.m_min < 1 || opt.m_max < opt.m_min || opt.m_max > 24) {
        throw std::invalid_argument("convergence: need 1 <= m_min <= m_max <= 24");
    }
    if (opt.trials < 100) {
        throw std::invalid_argument("convergence: trials must be >= 100");
    }
    ConvergenceStudy study;
    study.level = opt.level;
    study.trials = opt.trials;
    study.seed = seed;
    study.grid_value = a.grid_value();
    const double exact_p1 = a.exact_P1();
    study.encoded_value = a.post_map(exact_p1);
    const double theta = grover_angle(exact_p1);
    const GridMonteCarlo mc(a.dist, a.contract_payoff);
    std::vector<double> Ms, ae, mce;
    for (int m = opt.m_min; m <= opt.m_max; ++m) {
        ConvergenceRow row;
        row.m = m;
        row.M = uint64_t{1} << m;
        row.ae_bound = ae_error_bound(static_cast<double>(row.M), a.scaling);
        const auto py = qpe_analytic_distribution(theta, m);
        const uint64_t ae_seed = derive_seed(seed, 2 * static_cast<uint64_t>(m));
        std::vector<double> err(opt.trials);
        parallel_for(opt.trials, [&](size_t t) {
            const auto r = qpe_result_from_distribution(py, m, opt.ae_shots, derive_seed(ae_seed, t),
                                                        AEMethod::kQpeAnalytic, &a.scaling);
            err[t] = std::abs(r.expected_payoff - study.encoded_value);
        });
        uint64_t within = 0;
        for (double e : err) {
            within += e <= row.ae_bound ? 1 : 0;
        }
        row.ae_within_bound = static_cast<double>(within) / static_cast<double>(opt.trials);
        row.ae_error = empirical_quantile(err, opt.level);
        row.mc_error = mc_error_at_confidence(mc, study.grid_value, row.M, opt.trials, opt.level,
                                              derive_seed(seed, 2 * static_cast<uint64_t>(m) + 1));
        if (study.crossover == 0 && row.ae_error < row.mc_error) {
            study.crossover = row.M;
        }
        Ms.push_back(static_cast<double>(row.M));
        // A zero quantile (exact hit) is floored so the fit stays defined.
        ae.push_back(std::max(row.ae_error, 1e-15));
        mce.push_back(std::max(row.mc_error, 1e-15));
        study.rows.push_back(row);
    }
    if (study.rows.size() >= 2) {
        study.ae_slope = loglog_slope(Ms, ae);
        study.mc_slope = loglog_slope(Ms, mce);
    }
    return study;
}

// ---------------------------------------------------------------------------
// Mitigation sweep.

struct MitigationSweepConfig {
    /// Distribution parameters; the grid is fixed at `base.spot`.
    LognormalModel base{2.0, 0.40, 0.05, 40.0 / 365.0};
    int qubits = 2;
    double strike = 1.74;
    double c = 0.25;
    /// Grover power k of the measured circuit Q^k A.
    uint64_t grover_power = 1;
    std::vector<double> spots{1.8, 1.9, 2.0, 2.1, 2.2, 2.3, 2.4, 2.5};
};

struct MitigationSweepRow {
    double spot = 0.0;
    MitigationReport report;
};

/// Q^k A for a call on a grid held fixed at the base spot, with the
/// distribution re-evaluated at `spot`.
inline AOperator fixed_grid_call(const MitigationSweepConfig &cfg, double spot) {
    const auto grid = discretize_lognormal(cfg.base, cfg.qubits);
    LognormalModel m = cfg.base;
    m.spot = spot;
    const auto d = discretize_lognormal_on_grid(m, cfg.qubits, grid.lows[0], grid.highs[0]);
    return build_european_A(d, EuropeanCall{cfg.strike}, {cfg.c});
}

inline std::vector<MitigationSweepRow> run_mitigation_sweep(const MitigationSweepConfig &cfg, const NoiseModel &noise,
                                                            const MitigationOptions &opt, uint64_t seed) {
    std::vector<MitigationSweepRow> rows;
    for (size_t i = 0; i < cfg.spots.size(); ++i) {
        const auto a = fixed_grid_call(cfg, cfg.spots[i]);
        const Circuit qa = grover_power_circuit(a.circuit, a.payoff_qubit, cfg.grover_power);
        rows.push_back({cfg.spots[i], run_mitigation(qa, a.payoff_qubit, noise, opt, derive_seed(seed, i))});
    }
    return rows;
}

/// mean |extrapolated - noiseless| / mean |raw - noiseless| over the sweep.
inline double mitigation_efficacy(const std::vector<MitigationSweepRow> &rows) {
    double raw = 0.0;
    double mitigated = 0.0;
    for (const auto &r : rows) {
        raw += r.report.raw_error();
        mitigated += r.report.mitigated_error();
    }
    return raw > 0.0 ? mitigated / raw : 0.0;
}

}  // namespace qopt
