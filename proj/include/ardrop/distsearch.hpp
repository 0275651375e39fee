// Copyright 2026 The ardrop Authors
// SPDX-License-Identifier: Apache-2.0
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

// Search for a distribution over pattern periods dp = 1..N whose expected
// dropout rate matches a target while keeping the distribution spread out.
//
// The distribution is d = softmax(v) and the objective is
//   loss(v) = lambda1 * (d . p_u - p)^2 + lambda2 * (1/N) * sum_i d_i ln d_i
// with p_u[i] = (i - 1) / i, minimized by gradient descent on v.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ardrop/rng.hpp"

namespace ardrop {

struct SearchConfig {
  double lambda1 = 0.99;
  double lambda2 = 0.01;
  double learning_rate = 1.0;
  /// Stop once |loss change| of an accepted step falls below this.
  double threshold = 1e-10;
  std::size_t max_iters = 50'000;
  /// Accepted |achieved - target| rate error.
  double rate_tol = 0.01;
  /// Std-dev of the random initial logits; 0 starts from the uniform distribution.
  double init_scale = 0.0;

  void validate() const {
    if (std::abs(lambda1 + lambda2 - 1.0) > 1e-9) throw std::invalid_argument("lambda1 + lambda2 must equal 1");
    if (lambda1 < 0 || lambda2 < 0) throw std::invalid_argument("lambdas must be non-negative");
    if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be > 0");
    if (!(threshold > 0)) throw std::invalid_argument("threshold must be > 0");
    if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  }
};

/// Probability of each period dp = 1..N (probs[i] belongs to dp = i + 1).
struct PatternDistribution {
  std::vector<double> probs;
  double target_rate = 0.0;
  // Search bookkeeping; zero for hand-built distributions.
  std::size_t iterations = 0;
  double final_loss = 0.0;
  bool converged = true;

  std::size_t max_dp() const noexcept { return probs.size(); }

  static PatternDistribution point_mass(std::size_t n, std::size_t dp, double target = 0.0) {
    if (dp < 1 || dp > n) throw std::invalid_argument("point_mass: dp out of range");
    PatternDistribution d;
    d.probs.assign(n, 0.0);
    d.probs[dp - 1] = 1.0;
    d.target_rate = target;
    return d;
  }

  void validate() const {
    if (probs.empty()) throw std::invalid_argument("distribution must have at least one entry");
    double sum = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0)) throw std::invalid_argument("distribution entries must be >= 0");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw std::invalid_argument("distribution must sum to 1");
  }
};

class NoConvergence : public std::runtime_error {
 public:
  NoConvergence(PatternDistribution dist, double rate_error)
      : std::runtime_error("distribution search missed the target rate by " + std::to_string(rate_error)),
        distribution(std::move(dist)),
        rate_error(rate_error) {}

  PatternDistribution distribution;
  double rate_error;
};

/// p_u = [0, 1/2, 2/3, ..., (N-1)/N]: the dropped fraction of each period.
inline std::vector<double> rate_vector(std::size_t n) {
  std::vector<double> pu(n);
  for (std::size_t i = 0; i < n; ++i) pu[i] = static_cast<double>(i) / static_cast<double>(i + 1);
  return pu;
}

inline double expected_global_rate(std::span<const double> probs) {
  const auto pu = rate_vector(probs.size());
  double r = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) r += probs[i] * pu[i];
  return r;
}

inline double expected_global_rate(const PatternDistribution& dist) { return expected_global_rate(dist.probs); }

inline std::vector<double> softmax(std::span<const double> v) {
  std::vector<double> d(v.size());
  if (v.empty()) return d;
  const double m = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    d[i] = std::exp(v[i] - m);
    sum += d[i];
  }
  for (double& x : d) x /= sum;
  return d;
}

struct LossTerms {
  double loss = 0.0;
  double rate_term = 0.0;     // (d . p_u - p)^2
  double entropy_term = 0.0;  // (1/N) sum d ln d, <= 0
  std::vector<double> probs;  // softmax(v)
};

inline LossTerms search_loss(std::span<const double> v, double target, const SearchConfig& cfg) {
  LossTerms out;
  out.probs = softmax(v);
  const double n = static_cast<double>(v.size());
  const double diff = expected_global_rate(out.probs) - target;
  out.rate_term = diff * diff;
  double s = 0.0;
  for (double d : out.probs) {
    if (d > 0.0) s += d * std::log(d);
  }
  out.entropy_term = s / n;
  out.loss = cfg.lambda1 * out.rate_term + cfg.lambda2 * out.entropy_term;
  return out;
}

/// Analytic gradient of search_loss with respect to the logits v.
inline std::vector<double> search_loss_grad(std::span<const double> v, double target, const SearchConfig& cfg) {
  const auto d = softmax(v);
  const auto pu = rate_vector(v.size());
  const double n = static_cast<double>(v.size());
  const double diff = expected_global_rate(d) - target;

  // dL/dd_i, then through the softmax Jacobian: dL/dv_i = d_i (g_i - sum_j d_j g_j).
  std::vector<double> gd(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    gd[i] = cfg.lambda1 * 2.0 * diff * pu[i];
    if (d[i] > 0.0) gd[i] += cfg.lambda2 * (std::log(d[i]) + 1.0) / n;
  }
  double mean = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) mean += d[i] * gd[i];
  std::vector<double> g(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) g[i] = d[i] * (gd[i] - mean);
  return g;
}

/// Optional per-iteration record of accepted losses.
struct SearchTrace {
  std::vector<double> losses;
};

inline PatternDistribution search_distribution(double target, std::size_t n, const SearchConfig& cfg = {},
                                               std::uint64_t seed = 0, SearchTrace* trace = nullptr) {
  cfg.validate();
  if (n < 1) throw std::invalid_argument("max dp must be >= 1");
  const double reachable = static_cast<double>(n - 1) / static_cast<double>(n);
  if (target < 0.0 || target > reachable + 1e-12) {
    throw std::invalid_argument("target rate " + std::to_string(target) + " is outside [0, " +
                                std::to_string(reachable) + "] for max dp " + std::to_string(n));
  }

  PatternDistribution out;
  out.target_rate = target;
  if (n == 1) {
    out.probs = {1.0};
    return out;
  }

  std::vector<double> v(n, 0.0);
  if (cfg.init_scale > 0.0) {
    RngState rng(seed, 0);
    for (double& x : v) {
      // Box-Muller; the generator is platform-stable, so is the init.
      const double u1 = 1.0 - rng.uniform();
      const double u2 = rng.uniform();
      x = cfg.init_scale * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }
  }

  double lr = cfg.learning_rate;
  LossTerms cur = search_loss(v, target, cfg);
  if (trace) trace->losses.push_back(cur.loss);
  std::vector<double> cand(n);
  bool converged = false;
  std::size_t it = 0;
  while (it < cfg.max_iters) {
    ++it;
    const auto g = search_loss_grad(v, target, cfg);
    LossTerms next;
    // Halve the step until the loss does not increase.
    for (;;) {
      for (std::size_t i = 0; i < n; ++i) cand[i] = v[i] - lr * g[i];
      next = search_loss(cand, target, cfg);
      if (next.loss <= cur.loss || lr < 1e-30) break;
      lr *= 0.5;
    }
    const double delta = next.loss - cur.loss;
    if (next.loss <= cur.loss) {
      v = cand;
      cur = std::move(next);
      if (trace) trace->losses.push_back(cur.loss);
    }
    if (std::abs(delta) < cfg.threshold) {
      converged = true;
      break;
    }
  }

  out.probs = cur.probs;
  out.iterations = it;
  out.final_loss = cur.loss;
  out.converged = converged;
  const double err = std::abs(expected_global_rate(out.probs) - target);
  if (err > cfg.rate_tol) throw NoConvergence(out, err);
  return out;
}

}  // namespace ardrop
