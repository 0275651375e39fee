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

// Fully connected ReLU network with a softmax cross-entropy head, trained by
// mini-batch SGD with momentum. Activations are stored feature-major:
// a layer input is [in_dim x batch], weights are [out_dim x in_dim].
//
// Hidden layers may carry one of three dropout modes:
//   Conventional  Bernoulli mask on the layer output, scaled by 1/(1-p).
//   Row           one sampled row pattern per iteration; only kept rows are
//                 computed and they are scaled by dp.
//   Tile          one sampled tile pattern over the weight matrix; only kept
//                 tiles take part in the product, which is scaled by dp.
// The same iteration's pattern restricts the backward GEMMs, so dropped rows
// and tiles get exactly zero gradient and cost no MACs.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "ardrop/distsearch.hpp"
#include "ardrop/gemm.hpp"
#include "ardrop/matrix.hpp"
#include "ardrop/mnist.hpp"
#include "ardrop/patterns.hpp"
#include "ardrop/report.hpp"
#include "ardrop/rng.hpp"
#include "ardrop/sampler.hpp"

namespace ardrop {

enum class Activation { ReLU, Softmax };
enum class DropoutMode { Conventional, Row, Tile };

inline std::string_view to_string(DropoutMode m) {
  switch (m) {
    case DropoutMode::Conventional: return "conventional";
    case DropoutMode::Row: return "row";
    case DropoutMode::Tile: return "tile";
  }
  return "?";
}

inline DropoutMode parse_dropout_mode(std::string_view s) {
  if (s == "conventional") return DropoutMode::Conventional;
  if (s == "row") return DropoutMode::Row;
  if (s == "tile") return DropoutMode::Tile;
  throw std::invalid_argument("unknown dropout mode '" + std::string(s) + "'");
}

struct DropoutSpec {
  DropoutMode mode = DropoutMode::Conventional;
  double rate = 0.0;
  PatternDistribution distribution;  // Row/Tile only
  TileShape tile;                    // Tile only
  bool rescale = true;               // inverted-dropout scaling at train time

  PatternKind pattern_kind() const {
    return mode == DropoutMode::Tile ? PatternKind::Tile : PatternKind::Row;
  }
  bool uses_patterns() const noexcept { return mode != DropoutMode::Conventional; }
};

struct LayerSpec {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Activation activation = Activation::ReLU;
  std::optional<DropoutSpec> dropout;
};

/// A hidden activation became NaN or infinite during forward().
class NonFiniteActivation : public std::runtime_error {
 public:
  explicit NonFiniteActivation(std::size_t layer)
      : std::runtime_error("non-finite activation in layer " + std::to_string(layer)), layer(layer) {}
  std::size_t layer;
};

class Divergence : public std::runtime_error {
 public:
  explicit Divergence(std::uint64_t iteration)
      : std::runtime_error("non-finite loss at iteration " + std::to_string(iteration)), iteration(iteration) {}
  std::uint64_t iteration;
};

template <typename T>
struct MlpModel {
  std::vector<LayerSpec> layers;
  std::vector<Matrix<T>> weights;
  std::vector<std::vector<T>> biases;

  std::size_t depth() const noexcept { return layers.size(); }

  void validate() const {
    if (layers.empty()) throw std::invalid_argument("model needs at least one layer");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& s = layers[l];
      if (l > 0 && layers[l - 1].out_dim != s.in_dim) throw DimensionMismatch("layer dims do not chain");
      const bool last = l + 1 == layers.size();
      if (last && s.dropout) throw std::invalid_argument("output layer cannot have dropout");
      if (last != (s.activation == Activation::Softmax)) {
        throw std::invalid_argument("softmax must be (only) the output activation");
      }
      if (s.dropout) {
        if (s.dropout->rate < 0.0 || s.dropout->rate >= 1.0) throw std::invalid_argument("dropout rate must be in [0,1)");
        if (s.dropout->uses_patterns()) s.dropout->distribution.validate();
      }
      if (weights.size() == layers.size() &&
          (weights[l].rows() != s.out_dim || weights[l].cols() != s.in_dim || biases[l].size() != s.out_dim)) {
        throw DimensionMismatch("parameter shapes do not match layer " + std::to_string(l));
      }
    }
  }

  /// Uniform(+-sqrt(6 / (in + out))) weights, zero biases, drawn from (seed, kInitStream).
  static MlpModel create(std::vector<LayerSpec> specs, std::uint64_t seed) {
    MlpModel m;
    m.layers = std::move(specs);
    m.validate();
    RngState rng(seed, kInitStream);
    for (const auto& s : m.layers) {
      const double limit = std::sqrt(6.0 / static_cast<double>(s.in_dim + s.out_dim));
      Matrix<T> w(s.out_dim, s.in_dim);
      for (T& v : w.values()) v = static_cast<T>((2.0 * rng.uniform() - 1.0) * limit);
      m.weights.push_back(std::move(w));
      m.biases.emplace_back(s.out_dim, T(0));
    }
    return m;
  }

  template <typename U>
  MlpModel<U> cast() const {
    MlpModel<U> m;
    m.layers = layers;
    for (const auto& w : weights) m.weights.push_back(w.template cast<U>());
    for (const auto& b : biases) m.biases.emplace_back(b.begin(), b.end());
    return m;
  }
};

/// Layer stack for dims {in, h1, ..., out} with the same dropout spec on every hidden layer.
inline std::vector<LayerSpec> mlp_layers(const std::vector<std::size_t>& dims,
                                         const std::vector<std::optional<DropoutSpec>>& hidden_dropout = {}) {
  if (dims.size() < 2) throw std::invalid_argument("need at least input and output dims");
  std::vector<LayerSpec> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    LayerSpec s{dims[l], dims[l + 1], l + 2 == dims.size() ? Activation::Softmax : Activation::ReLU, std::nullopt};
    if (l + 2 < dims.size() && l < hidden_dropout.size()) s.dropout = hidden_dropout[l];
    layers.push_back(s);
  }
  return layers;
}

/// The dropout decision for one layer in one iteration.
template <typename T>
struct LayerDraw {
  std::optional<DropoutPattern> pattern;  // Row / Tile
  Matrix<T> mask;                         // Conventional: [out_dim x batch] of 0/1
};

template <typename T>
using Draws = std::vector<LayerDraw<T>>;

template <typename T>
struct ForwardCache {
  std::vector<Matrix<T>> inputs;  // inputs[l] is layer l's input
  std::vector<Matrix<T>> pre;     // pre-activations (after any tile scaling and bias)
  Matrix<T> probs;                // softmax of the logits
};

namespace detail {

template <typename T>
KeptRegion layer_region(const Matrix<T>& w, const LayerDraw<T>* draw) {
  if (draw && draw->pattern) return KeptRegion::for_pattern(w.rows(), w.cols(), *draw->pattern);
  return KeptRegion::dense(w.rows(), w.cols());
}

/// Train-time multiplier for a layer's dropout.
template <typename T>
T dropout_scale(const LayerSpec& spec, const LayerDraw<T>* draw) {
  if (!spec.dropout || !draw || !spec.dropout->rescale) return T(1);
  if (draw->pattern) return static_cast<T>(draw->pattern->dp());
  if (!draw->mask.empty()) return static_cast<T>(1.0 / (1.0 - spec.dropout->rate));
  return T(1);
}

inline std::vector<char> kept_rows(const KeptRegion& r) {
  std::vector<char> kept(r.rows, 0);
  for (const auto& b : r.blocks) std::fill(kept.begin() + b.row_begin, kept.begin() + b.row_end, 1);
  return kept;
}

template <typename T>
const LayerDraw<T>* draw_for(const Draws<T>* draws, std::size_t l) {
  return draws && l < draws->size() ? &(*draws)[l] : nullptr;
}

}  // namespace detail

/// Forward pass. `draws` may be null (no dropout, e.g. inference); `counters` gets one entry per layer.
template <typename T>
ForwardCache<T> forward(const MlpModel<T>& model, const Matrix<T>& x, const std::type_identity_t<Draws<T>>* draws,
                        std::vector<MacCounter>& counters, ExecPolicy exec = {}) {
  if (x.rows() != model.layers.front().in_dim) throw DimensionMismatch("input rows != in_dim");
  counters.resize(model.depth());
  ForwardCache<T> cache;
  Matrix<T> a = x;
  const std::size_t batch = x.cols();
  for (std::size_t l = 0; l < model.depth(); ++l) {
    const auto& spec = model.layers[l];
    const auto* draw = spec.dropout ? detail::draw_for(draws, l) : nullptr;
    const KeptRegion region = detail::layer_region(model.weights[l], draw);
    Matrix<T> z = region_gemm(model.weights[l], a, region, counters[l], exec);
    const T scale = detail::dropout_scale(spec, draw);
    const bool tile = draw && draw->pattern && draw->pattern->kind() == PatternKind::Tile;
    const bool row = draw && draw->pattern && draw->pattern->kind() == PatternKind::Row;
    const auto kept = detail::kept_rows(region);
    for (std::size_t i = 0; i < z.rows(); ++i) {
      // Rows dropped by a row pattern stay exactly zero (no bias).
      if (row && !kept[i]) continue;
      const T b = model.biases[l][i];
      for (T& v : z.row(i)) v = (tile ? v * scale : v) + b;
    }
    cache.inputs.push_back(std::move(a));

    if (spec.activation == Activation::Softmax) {
      Matrix<T> p(z.rows(), batch);
      for (std::size_t j = 0; j < batch; ++j) {
        T mx = z(0, j);
        for (std::size_t i = 1; i < z.rows(); ++i) mx = std::max(mx, z(i, j));
        T sum = 0;
        for (std::size_t i = 0; i < z.rows(); ++i) sum += (p(i, j) = std::exp(z(i, j) - mx));
        for (std::size_t i = 0; i < z.rows(); ++i) p(i, j) /= sum;
      }
      cache.probs = std::move(p);
      cache.pre.push_back(std::move(z));
      break;
    }

    Matrix<T> h(z.rows(), batch);
    const bool masked = draw && !draw->mask.empty();
    for (std::size_t i = 0; i < z.rows(); ++i) {
      for (std::size_t j = 0; j < batch; ++j) {
        T v = z(i, j) > T(0) ? z(i, j) : T(0);
        if (row) v = kept[i] ? v * scale : T(0);
        if (masked) v = v * draw->mask(i, j) * scale;
        h(i, j) = v;
      }
    }
    if (!h.all_finite()) throw NonFiniteActivation(l);
    cache.pre.push_back(std::move(z));
    a = std::move(h);
  }
  return cache;
}

template <typename T>
const Matrix<T>& logits(const ForwardCache<T>& cache) {
  return cache.pre.back();
}

/// Mean cross-entropy of the cached softmax output.
template <typename T>
double cross_entropy(const ForwardCache<T>& cache, const std::vector<std::uint8_t>& labels) {
  const auto& z = cache.pre.back();
  double total = 0.0;
  for (std::size_t j = 0; j < z.cols(); ++j) {
    double mx = z(0, j);
    for (std::size_t i = 1; i < z.rows(); ++i) mx = std::max(mx, static_cast<double>(z(i, j)));
    double sum = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) sum += std::exp(static_cast<double>(z(i, j)) - mx);
    total += std::log(sum) + mx - static_cast<double>(z(labels[j], j));
  }
  return total / static_cast<double>(z.cols());
}

template <typename T>
struct Gradients {
  std::vector<Matrix<T>> weights;
  std::vector<std::vector<T>> biases;
};

/// Backprop of mean cross-entropy through the cached forward pass, restricted by the same draws.
template <typename T>
Gradients<T> backward(const MlpModel<T>& model, const ForwardCache<T>& cache, const std::vector<std::uint8_t>& labels,
                      const std::type_identity_t<Draws<T>>* draws, std::vector<MacCounter>& counters,
                      ExecPolicy exec = {}) {
  const std::size_t depth = model.depth();
  const std::size_t batch = cache.probs.cols();
  if (labels.size() != batch) throw DimensionMismatch("labels size != batch");
  counters.resize(depth);
  Gradients<T> g;
  g.weights.resize(depth);
  g.biases.resize(depth);

  Matrix<T> dz = cache.probs;
  const T inv_b = T(1) / static_cast<T>(batch);
  for (std::size_t j = 0; j < batch; ++j) dz(labels[j], j) -= T(1);
  for (T& v : dz.values()) v *= inv_b;

  for (std::size_t l = depth; l-- > 0;) {
    const auto& spec = model.layers[l];
    const auto* draw = spec.dropout ? detail::draw_for(draws, l) : nullptr;
    const KeptRegion region = detail::layer_region(model.weights[l], draw);
    const bool tile = draw && draw->pattern && draw->pattern->kind() == PatternKind::Tile;

    g.biases[l].assign(spec.out_dim, T(0));
    for (std::size_t i = 0; i < spec.out_dim; ++i) {
      T s = 0;
      for (T v : dz.row(i)) s += v;
      g.biases[l][i] = s;
    }
    // Tile scaling multiplies the product, so it flows into the W and input gradients only.
    if (tile) {
      const T scale = detail::dropout_scale(spec, draw);
      for (T& v : dz.values()) v *= scale;
    }
    g.weights[l] = region_grad_weight(dz, cache.inputs[l], region, counters[l], exec);
    if (l == 0) break;

    Matrix<T> da = region_grad_input(model.weights[l], dz, region, counters[l], exec);
    // Through layer l-1's dropout and ReLU.
    const auto& prev = model.layers[l - 1];
    const auto* pdraw = prev.dropout ? detail::draw_for(draws, l - 1) : nullptr;
    const T pscale = detail::dropout_scale(prev, pdraw);
    const bool prow = pdraw && pdraw->pattern && pdraw->pattern->kind() == PatternKind::Row;
    const bool pmask = pdraw && !pdraw->mask.empty();
    std::vector<char> pkept;
    if (prow) pkept = detail::kept_rows(detail::layer_region(model.weights[l - 1], pdraw));
    const auto& z = cache.pre[l - 1];
    for (std::size_t i = 0; i < da.rows(); ++i) {
      for (std::size_t j = 0; j < batch; ++j) {
        T v = z(i, j) > T(0) ? da(i, j) : T(0);
        if (prow) v = pkept[i] ? v * pscale : T(0);
        if (pmask) v = v * pdraw->mask(i, j) * pscale;
        da(i, j) = v;
      }
    }
    dz = std::move(da);
  }
  return g;
}

template <typename T>
struct SgdMomentum {
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::vector<Matrix<T>> vel_w;
  std::vector<std::vector<T>> vel_b;

  /// v <- mu v - lr g; theta <- theta + v.
  void step(MlpModel<T>& model, const Gradients<T>& g) {
    if (vel_w.empty()) {
      for (const auto& w : model.weights) vel_w.emplace_back(w.rows(), w.cols(), T(0));
      for (const auto& b : model.biases) vel_b.emplace_back(b.size(), T(0));
    }
    const T mu = static_cast<T>(momentum), lr = static_cast<T>(learning_rate);
    for (std::size_t l = 0; l < model.depth(); ++l) {
      auto wv = model.weights[l].values();
      auto vv = vel_w[l].values();
      auto gv = g.weights[l].values();
      for (std::size_t i = 0; i < wv.size(); ++i) {
        vv[i] = mu * vv[i] - lr * gv[i];
        wv[i] += vv[i];
      }
      for (std::size_t i = 0; i < model.biases[l].size(); ++i) {
        vel_b[l][i] = mu * vel_b[l][i] - lr * g.biases[l][i];
        model.biases[l][i] += vel_b[l][i];
      }
    }
  }
};

struct TrainConfig {
  std::size_t batch = 128;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t epochs = 5;
  std::uint64_t seed = 1;
  unsigned workers = 1;

  void validate() const {
    if (batch < 1) throw std::invalid_argument("batch must be >= 1");
    if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be > 0");
    if (momentum < 0 || momentum >= 1) throw std::invalid_argument("momentum must be in [0,1)");
  }
};

/// Columns of the batch matrix are the selected samples.
template <typename T>
Matrix<T> gather_batch(const Dataset& data, const std::vector<std::size_t>& order, std::size_t begin, std::size_t end,
                       std::vector<std::uint8_t>& labels) {
  const std::size_t n = end - begin;
  Matrix<T> x(data.dim(), n);
  labels.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t idx = order[begin + j];
    const float* s = data.sample(idx);
    for (std::size_t k = 0; k < data.dim(); ++k) x(k, j) = static_cast<T>(s[k]);
    labels[j] = data.labels[idx];
  }
  return x;
}

/// Argmax accuracy with dropout disabled.
template <typename T>
double evaluate(const MlpModel<T>& model, const Dataset& data, std::size_t batch = 500) {
  if (data.size() == 0) return 0.0;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<MacCounter> scratch;
  std::vector<std::uint8_t> labels;
  std::size_t correct = 0;
  for (std::size_t b = 0; b < data.size(); b += batch) {
    const std::size_t e = std::min(data.size(), b + batch);
    const auto x = gather_batch<T>(data, order, b, e, labels);
    const auto cache = forward<T>(model, x, nullptr, scratch);
    const auto& p = cache.probs;
    for (std::size_t j = 0; j < p.cols(); ++j) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < p.rows(); ++i)
        if (p(i, j) > p(best, j)) best = i;
      correct += best == labels[j];
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

/// Draw this iteration's dropout decisions for every layer.
template <typename T>
Draws<T> draw_layers(const MlpModel<T>& model, std::size_t batch, std::vector<RngState>& streams,
                     std::uint64_t iteration) {
  Draws<T> draws(model.depth());
  for (std::size_t l = 0; l < model.depth(); ++l) {
    const auto& spec = model.layers[l];
    if (!spec.dropout) continue;
    const auto& d = *spec.dropout;
    if (d.uses_patterns()) {
      draws[l].pattern = sample_pattern(d.distribution, d.pattern_kind(), d.tile, streams[l], iteration, l).pattern;
    } else {
      Matrix<T> mask(spec.out_dim, batch);
      for (T& v : mask.values()) v = streams[l].uniform() < d.rate ? T(0) : T(1);
      draws[l].mask = std::move(mask);
    }
  }
  return draws;
}

/// Mini-batch SGD with momentum. Data order comes from (seed, kShuffleStream) and
/// layer l's dropout draws from (seed, kDropoutStreamBase + l).
template <typename T>
RunReport train(MlpModel<T>& model, const Dataset& train_set, const Dataset& test_set, const TrainConfig& cfg) {
  cfg.validate();
  model.validate();
  if (train_set.size() == 0) throw std::invalid_argument("training set is empty");
  if (train_set.dim() != model.layers.front().in_dim) throw DimensionMismatch("dataset dim != model input");

  RunReport report;
  report.seed = cfg.seed;
  report.mode = "none";
  for (const auto& s : model.layers) {
    if (s.dropout) report.mode = std::string(to_string(s.dropout->mode));
  }

  std::vector<RngState> streams;
  for (std::size_t l = 0; l < model.depth(); ++l) streams.emplace_back(cfg.seed, kDropoutStreamBase + l);
  RngState shuffle_rng(cfg.seed, kShuffleStream);
  report.pattern_histogram.resize(model.depth());
  for (std::size_t l = 0; l < model.depth(); ++l) {
    const auto& s = model.layers[l];
    if (s.dropout && s.dropout->uses_patterns()) report.pattern_histogram[l].assign(s.dropout->distribution.max_dp(), 0);
  }

  SgdMomentum<T> opt{cfg.learning_rate, cfg.momentum, {}, {}};
  std::vector<MacCounter> counters(model.depth());
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::uint8_t> labels;
  const ExecPolicy exec{cfg.workers};

  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch) {
      const std::size_t e = std::min(order.size(), b + cfg.batch);
      const auto x = gather_batch<T>(train_set, order, b, e, labels);
      const auto draws = draw_layers(model, e - b, streams, report.iterations);
      for (std::size_t l = 0; l < draws.size(); ++l) {
        if (draws[l].pattern) ++report.pattern_histogram[l][draws[l].pattern->dp() - 1];
      }
      ForwardCache<T> cache;
      try {
        cache = forward(model, x, &draws, counters, exec);
      } catch (const NonFiniteActivation&) {
        throw Divergence(report.iterations);
      }
      const double loss = cross_entropy(cache, labels);
      if (!std::isfinite(loss)) throw Divergence(report.iterations);
      const auto grads = backward(model, cache, labels, &draws, counters, exec);
      opt.step(model, grads);
      loss_sum += loss;
      ++batches;
      ++report.iterations;
    }
    report.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
    report.epoch_accuracy.push_back(evaluate(model, test_set));
  }
  report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report.final_accuracy = report.epoch_accuracy.empty() ? 0.0 : report.epoch_accuracy.back();
  for (std::size_t l = 0; l < model.depth(); ++l) {
    report.total_macs += counters[l].macs;
    if (l + 1 < model.depth()) {
      report.hidden_macs += counters[l].macs;
      report.hidden_bytes += counters[l].bytes_fetched;
    }
  }
  return report;
}

}  // namespace ardrop
