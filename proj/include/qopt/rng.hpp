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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace qopt {

/// SplitMix64 step. Used to derive independent stream seeds from a master seed.
inline uint64_t splitmix64(uint64_t &state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Seed for sub-stream `stream` of `master`. Trials, trajectories and seeds
/// in parallel loops all go through this so results don't depend on scheduling.
inline uint64_t derive_seed(uint64_t master, uint64_t stream) {
    uint64_t s = master ^ (0xD1B54A32D192ED03ULL * (stream + 1));
    splitmix64(s);
    return splitmix64(s);
}

/// Random source with platform-independent transforms on top of mt19937_64.
/// The standard distributions are implementation-defined, so we don't use them.
class Rng {
   public:
    explicit Rng(uint64_t seed) : engine_(seed) {
    }

    uint64_t next_u64() {
        return engine_();
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) {
        return uniform() < p;
    }

    /// Uniform integer in [0, n).
    uint64_t below(uint64_t n) {
        if (n == 0) {
            throw std::invalid_argument("Rng::below: n must be positive");
        }
        // Rejection sampling on the top of the range to avoid modulo bias.
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    /// Standard normal via Box-Muller; the second variate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    /// Number of successes in `trials` Bernoulli(p) draws.
    uint64_t binomial(uint64_t trials, double p) {
        uint64_t hits = 0;
        for (uint64_t k = 0; k < trials; ++k) {
            hits += bernoulli(p) ? 1 : 0;
        }
        return hits;
    }

   private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Inverse-CDF sampler over a finite set of nonnegative weights.
class DiscreteSampler {
   public:
    explicit DiscreteSampler(std::span<const double> weights) : cumulative_(weights.size()) {
        double total = 0.0;
        for (size_t k = 0; k < weights.size(); ++k) {
            if (!(weights[k] >= 0.0)) {
                throw std::invalid_argument("DiscreteSampler: weights must be nonnegative");
            }
            total += weights[k];
            cumulative_[k] = total;
        }
        if (!(total > 0.0)) {
            throw std::invalid_argument("DiscreteSampler: total weight must be positive");
        }
        for (auto &c : cumulative_) {
            c /= total;
        }
        cumulative_.back() = 1.0;
    }

    size_t size() const {
        return cumulative_.size();
    }

    size_t sample(Rng &rng) const {
        const double u = rng.uniform();
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        if (it == cumulative_.end()) {
            --it;
        }
        return static_cast<size_t>(it - cumulative_.begin());
    }

   private:
    std::vector<double> cumulative_;
};

}  // namespace qopt
