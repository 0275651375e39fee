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

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ardrop/distsearch.hpp"
#include "ardrop/patterns.hpp"
#include "ardrop/rng.hpp"

namespace ardrop {

struct SampledPattern {
  DropoutPattern pattern;
  std::uint64_t iteration = 0;
  std::size_t layer = 0;
};

/// Inverse-CDF draw of dp from the distribution; the last bucket absorbs rounding slack.
inline std::size_t sample_period(const PatternDistribution& dist, RngState& rng) {
  const double u = rng.uniform();
  double cdf = 0.0;
  const std::size_t n = dist.probs.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    cdf += dist.probs[i];
    if (u < cdf) return i + 1;
  }
  return n;
}

/// dp ~ dist, then bias uniform in [1, dp]. Two generator draws per call
/// (plus rare rejections inside the bias draw).
inline SampledPattern sample_pattern(const PatternDistribution& dist, PatternKind kind, TileShape tile,
                                     RngState& rng, std::uint64_t iteration = 0, std::size_t layer = 0) {
  const std::size_t dp = sample_period(dist, rng);
  const std::size_t bias = 1 + static_cast<std::size_t>(rng.below(dp));
  return SampledPattern{kind == PatternKind::Row ? DropoutPattern::row(dp, bias)
                                                 : DropoutPattern::tile(dp, bias, tile),
                        iteration, layer};
}

/// Observed drop frequency of every unit (row or tile) over `trials` draws.
inline std::vector<double> empirical_unit_drop_rate(const PatternDistribution& dist, const MaskGeometry& geom,
                                                    PatternKind kind, TileShape tile, std::size_t trials,
                                                    RngState& rng) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  geom.validate();
  const std::size_t units = unit_count(geom, kind, tile);
  std::vector<std::uint64_t> kept(units, 0);
  for (std::size_t t = 0; t < trials; ++t) {
    const auto s = sample_pattern(dist, kind, tile, rng, t);
    for (std::size_t u : kept_units(units, s.pattern)) ++kept[u];
  }
  std::vector<double> rate(units);
  for (std::size_t u = 0; u < units; ++u) {
    rate[u] = 1.0 - static_cast<double>(kept[u]) / static_cast<double>(trials);
  }
  return rate;
}

/// Exact per-unit drop probability, enumerating every (dp, bias) pair.
inline std::vector<double> exact_unit_drop_probability(const PatternDistribution& dist, std::size_t units) {
  std::vector<double> prob(units, 0.0);
  for (std::size_t u = 0; u < units; ++u) {
    for (std::size_t i = 0; i < dist.probs.size(); ++i) {
      const std::size_t dp = i + 1;
      std::size_t dropping = 0;
      for (std::size_t b = 1; b <= dp; ++b) {
        if (!DropoutPattern::row(dp, b).keeps(u)) ++dropping;
      }
      prob[u] += dist.probs[i] * (static_cast<double>(dropping) / static_cast<double>(dp));
    }
  }
  return prob;
}

}  // namespace ardrop
