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

// Experiment orchestration: paired training sweeps (pattern dropout vs the
// conventional baseline on shared seeds) and kernel microbenchmarks.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ardrop/distsearch.hpp"
#include "ardrop/gemm.hpp"
#include "ardrop/json_io.hpp"
#include "ardrop/mnist.hpp"
#include "ardrop/nn.hpp"

namespace ardrop {

/// Environment variable naming the directory with the four MNIST IDX files.
inline constexpr const char* kDataEnv = "ARDROP_DATA";

enum class ExperimentKind { RateSweep, SizeSweep, GemmMicro, DistSearch };

inline ExperimentKind parse_experiment_kind(std::string_view s) {
  if (s == "rate-sweep" || s == "rate") return ExperimentKind::RateSweep;
  if (s == "size-sweep" || s == "size") return ExperimentKind::SizeSweep;
  if (s == "gemm-micro") return ExperimentKind::GemmMicro;
  if (s == "dist-search") return ExperimentKind::DistSearch;
  throw std::invalid_argument("unknown experiment kind '" + std::string(s) + "'");
}

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::RateSweep;
  std::vector<std::vector<std::size_t>> hidden_sizes{{256, 256}};
  std::vector<double> rates{0.3, 0.5, 0.7};
  double size_sweep_rate = 0.7;
  std::vector<PatternKind> pattern_kinds{PatternKind::Row};
  std::vector<std::uint64_t> seeds{1};
  std::string dataset_path;  // empty: use $ARDROP_DATA
  std::string output_path;
  std::size_t train_limit = 10'000;
  std::size_t test_limit = 2'000;
  TrainConfig train;
  std::size_t max_dp = 10;
  TileShape tile;
  SearchConfig search;
  bool rescale = true;
  bool parallel = false;

  void validate() const {
    if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
    for (double r : rates) {
      if (r < 0.0 || r > 0.9) throw std::invalid_argument("rates must lie in [0, 0.9]");
    }
    if (size_sweep_rate < 0.0 || size_sweep_rate > 0.9) throw std::invalid_argument("size_sweep_rate must lie in [0, 0.9]");
    if (max_dp < 1) throw std::invalid_argument("max_dp must be >= 1");
    train.validate();
  }
};

inline json experiment_to_json(const ExperimentConfig& c) {
  json kinds = json::array();
  for (auto k : c.pattern_kinds) kinds.push_back(to_string(k));
  return json{{"hidden_sizes", c.hidden_sizes},
              {"rates", c.rates},
              {"size_sweep_rate", c.size_sweep_rate},
              {"pattern_kinds", kinds},
              {"seeds", c.seeds},
              {"dataset_path", c.dataset_path},
              {"train_limit", c.train_limit},
              {"test_limit", c.test_limit},
              {"epochs", c.train.epochs},
              {"batch", c.train.batch},
              {"learning_rate", c.train.learning_rate},
              {"momentum", c.train.momentum},
              {"max_dp", c.max_dp},
              {"tile", {c.tile.rows, c.tile.cols}},
              {"search",
               {{"lambda1", c.search.lambda1},
                {"lambda2", c.search.lambda2},
                {"learning_rate", c.search.learning_rate},
                {"threshold", c.search.threshold},
                {"max_iters", c.search.max_iters}}},
              {"rescale", c.rescale}};
}

/// Unknown keys are rejected so typos do not silently fall back to defaults.
inline ExperimentConfig experiment_from_json(const json& j) {
  static const std::vector<std::string> known = {
      "kind", "hidden_sizes", "hidden", "rates", "size_sweep_rate", "pattern_kinds", "seeds", "seed",
      "dataset_path", "output_path", "train_limit", "test_limit", "epochs", "batch", "learning_rate",
      "momentum", "max_dp", "tile", "search", "rescale", "parallel", "workers", "mode", "rate"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  }
  ExperimentConfig c;
  if (j.contains("kind")) c.kind = parse_experiment_kind(j.at("kind").get<std::string>());
  if (j.contains("hidden_sizes")) c.hidden_sizes = j.at("hidden_sizes").get<std::vector<std::vector<std::size_t>>>();
  if (j.contains("hidden")) c.hidden_sizes = {j.at("hidden").get<std::vector<std::size_t>>()};
  if (j.contains("rates")) c.rates = j.at("rates").get<std::vector<double>>();
  if (j.contains("rate")) c.rates = {j.at("rate").get<double>()};
  c.size_sweep_rate = j.value("size_sweep_rate", c.size_sweep_rate);
  if (j.contains("pattern_kinds")) {
    c.pattern_kinds.clear();
    for (const auto& k : j.at("pattern_kinds")) c.pattern_kinds.push_back(parse_pattern_kind(k.get<std::string>()));
  }
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("seed")) c.seeds = {j.at("seed").get<std::uint64_t>()};
  c.dataset_path = j.value("dataset_path", c.dataset_path);
  c.output_path = j.value("output_path", c.output_path);
  c.train_limit = j.value("train_limit", c.train_limit);
  c.test_limit = j.value("test_limit", c.test_limit);
  c.train.epochs = j.value("epochs", c.train.epochs);
  c.train.batch = j.value("batch", c.train.batch);
  c.train.learning_rate = j.value("learning_rate", c.train.learning_rate);
  c.train.momentum = j.value("momentum", c.train.momentum);
  c.train.workers = j.value("workers", c.train.workers);
  c.max_dp = j.value("max_dp", c.max_dp);
  if (j.contains("tile")) c.tile = {j.at("tile").at(0).get<std::size_t>(), j.at("tile").at(1).get<std::size_t>()};
  if (j.contains("search")) {
    const auto& s = j.at("search");
    c.search.lambda1 = s.value("lambda1", c.search.lambda1);
    c.search.lambda2 = s.value("lambda2", c.search.lambda2);
    c.search.learning_rate = s.value("learning_rate", c.search.learning_rate);
    c.search.threshold = s.value("threshold", c.search.threshold);
    c.search.max_iters = s.value("max_iters", c.search.max_iters);
  }
  c.rescale = j.value("rescale", c.rescale);
  c.parallel = j.value("parallel", c.parallel);
  c.validate();
  return c;
}

struct ExperimentData {
  Dataset train;
  Dataset test;
};

inline std::filesystem::path resolve_data_root(const std::string& configured) {
  if (!configured.empty()) return configured;
  if (const char* env = std::getenv(kDataEnv); env && *env) return env;
  throw std::invalid_argument(std::string("no dataset path: set dataset_path or $") + kDataEnv);
}

inline ExperimentData load_experiment_data(const ExperimentConfig& c) {
  const MnistFiles files(resolve_data_root(c.dataset_path));
  ExperimentData d;
  d.train = load_mnist_idx(files.train_images, files.train_labels).head(c.train_limit);
  d.test = load_mnist_idx(files.test_images, files.test_labels).head(c.test_limit);
  return d;
}

/// Memoized distribution search keyed by (rate, N).
class DistributionCache {
 public:
  explicit DistributionCache(SearchConfig cfg) : cfg_(cfg) {}

  const PatternDistribution& get(double rate, std::size_t n) {
    const auto key = std::make_pair(rate, n);
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, search_distribution(rate, n, cfg_)).first;
    return it->second;
  }

 private:
  SearchConfig cfg_;
  std::map<std::pair<double, std::size_t>, PatternDistribution> cache_;
};

/// Build the network for one run. `mode` empty means no dropout.
inline MlpModel<float> build_model(const ExperimentConfig& c, const std::vector<std::size_t>& hidden,
                                   std::optional<DropoutMode> mode, double rate, std::size_t input_dim,
                                   std::size_t classes, std::uint64_t seed, DistributionCache& dists) {
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(classes);
  std::vector<std::optional<DropoutSpec>> drop(hidden.size());
  if (mode) {
    for (std::size_t l = 0; l < hidden.size(); ++l) {
      DropoutSpec s;
      s.mode = *mode;
      s.rate = rate;
      s.tile = c.tile;
      s.rescale = c.rescale;
      if (s.uses_patterns()) {
        const MaskGeometry geom{dims[l + 1], dims[l]};
        const std::size_t n = std::max<std::size_t>(1, std::min(c.max_dp, max_dp(geom, s.pattern_kind(), c.tile)));
        s.distribution = rate == 0.0 ? PatternDistribution::point_mass(n, 1) : dists.get(rate, n);
      }
      drop[l] = s;
    }
  }
  return MlpModel<float>::create(mlp_layers(dims, drop), seed);
}

inline RunReport run_one(const ExperimentConfig& c, const ExperimentData& data, const std::vector<std::size_t>& hidden,
                         std::optional<DropoutMode> mode, double rate, std::uint64_t seed, DistributionCache& dists) {
  auto model = build_model(c, hidden, mode, rate, data.train.dim(), 10, seed, dists);
  TrainConfig tc = c.train;
  tc.seed = seed;
  auto report = train(model, data.train, data.test, tc);
  report.config = experiment_to_json(c);
  report.config["hidden"] = hidden;
  report.config["rate"] = rate;
  report.config["mode"] = mode ? std::string(to_string(*mode)) : "none";
  report.config.erase("seeds");
  report.config.erase("rates");
  report.config.erase("hidden_sizes");
  return report;
}

struct SweepRow {
  std::string kind;
  std::vector<std::size_t> hidden;
  double rate = 0.0;
  std::size_t seeds = 0;
  double accuracy = 0.0;           // mean over seeds, pattern dropout
  double baseline_accuracy = 0.0;  // mean over seeds, conventional dropout
  double accuracy_delta = 0.0;     // accuracy - baseline_accuracy (signed)
  double mac_ratio = 0.0;          // hidden-layer MACs, pattern / baseline
  double speedup = 0.0;            // baseline wall-clock / pattern wall-clock
};

struct SweepResult {
  std::vector<RunReport> reports;
  std::vector<SweepRow> summary;
};

namespace detail {

struct SeedRuns {
  RunReport baseline;
  std::vector<RunReport> approx;  // one per pattern kind
};

inline SeedRuns run_seed(const ExperimentConfig& c, const ExperimentData& data, const std::vector<std::size_t>& hidden,
                         double rate, std::uint64_t seed, DistributionCache& dists) {
  SeedRuns out;
  out.baseline = run_one(c, data, hidden, DropoutMode::Conventional, rate, seed, dists);
  for (auto k : c.pattern_kinds) {
    const auto mode = k == PatternKind::Row ? DropoutMode::Row : DropoutMode::Tile;
    out.approx.push_back(run_one(c, data, hidden, mode, rate, seed, dists));
  }
  return out;
}

inline void sweep_point(const ExperimentConfig& c, const ExperimentData& data, const std::vector<std::size_t>& hidden,
                        double rate, DistributionCache& dists, SweepResult& result) {
  std::vector<SeedRuns> runs;
  if (c.parallel && c.seeds.size() > 1) {
    // Warm the cache first so workers only read it.
    for (std::size_t l = 0; l < hidden.size(); ++l) {
      std::size_t in = l == 0 ? data.train.dim() : hidden[l - 1];
      for (auto k : c.pattern_kinds) {
        const std::size_t n = std::max<std::size_t>(1, std::min(c.max_dp, max_dp({hidden[l], in}, k, c.tile)));
        if (rate > 0.0) dists.get(rate, n);
      }
    }
    std::vector<std::future<SeedRuns>> futs;
    for (auto seed : c.seeds) {
      futs.push_back(std::async(std::launch::async, [&, seed] { return run_seed(c, data, hidden, rate, seed, dists); }));
    }
    for (auto& f : futs) runs.push_back(f.get());
  } else {
    for (auto seed : c.seeds) runs.push_back(run_seed(c, data, hidden, rate, seed, dists));
  }

  for (std::size_t k = 0; k < c.pattern_kinds.size(); ++k) {
    SweepRow row;
    row.kind = std::string(to_string(c.pattern_kinds[k]));
    row.hidden = hidden;
    row.rate = rate;
    row.seeds = runs.size();
    double approx_macs = 0, base_macs = 0, approx_t = 0, base_t = 0;
    for (const auto& r : runs) {
      row.accuracy += r.approx[k].final_accuracy;
      row.baseline_accuracy += r.baseline.final_accuracy;
      approx_macs += static_cast<double>(r.approx[k].hidden_macs);
      base_macs += static_cast<double>(r.baseline.hidden_macs);
      approx_t += r.approx[k].wall_clock_seconds;
      base_t += r.baseline.wall_clock_seconds;
    }
    row.accuracy /= static_cast<double>(runs.size());
    row.baseline_accuracy /= static_cast<double>(runs.size());
    row.accuracy_delta = row.accuracy - row.baseline_accuracy;
    row.mac_ratio = approx_macs / base_macs;
    row.speedup = approx_t > 0 ? base_t / approx_t : 0.0;
    result.summary.push_back(row);
  }
  for (auto& r : runs) {
    result.reports.push_back(std::move(r.baseline));
    for (auto& a : r.approx) result.reports.push_back(std::move(a));
  }
}

}  // namespace detail

/// For every rate: conventional baseline plus one run per pattern kind, per seed.
inline SweepResult run_rate_sweep(const ExperimentConfig& c, const ExperimentData& data) {
  c.validate();
  if (c.hidden_sizes.empty()) throw std::invalid_argument("rate sweep needs a hidden-layer size");
  if (c.rates.empty()) throw std::invalid_argument("rate sweep needs at least one rate");
  DistributionCache dists(c.search);
  SweepResult result;
  for (double rate : c.rates) detail::sweep_point(c, data, c.hidden_sizes.front(), rate, dists, result);
  return result;
}

/// Same pairing as the rate sweep, across hidden sizes at size_sweep_rate.
inline SweepResult run_size_sweep(const ExperimentConfig& c, const ExperimentData& data) {
  c.validate();
  if (c.hidden_sizes.empty()) throw std::invalid_argument("size sweep needs at least one hidden size");
  DistributionCache dists(c.search);
  SweepResult result;
  for (const auto& hidden : c.hidden_sizes) detail::sweep_point(c, data, hidden, c.size_sweep_rate, dists, result);
  return result;
}

inline std::string summary_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os.precision(10);
  os << "kind,hidden,rate,seeds,accuracy,baseline_accuracy,accuracy_delta,mac_ratio,speedup\n";
  for (const auto& r : rows) {
    std::string hidden;
    for (std::size_t i = 0; i < r.hidden.size(); ++i) hidden += (i ? "x" : "") + std::to_string(r.hidden[i]);
    os << r.kind << ',' << hidden << ',' << r.rate << ',' << r.seeds << ',' << r.accuracy << ','
       << r.baseline_accuracy << ',' << r.accuracy_delta << ',' << r.mac_ratio << ',' << r.speedup << '\n';
  }
  return os.str();
}

inline json sweep_row_to_json(const SweepRow& r) {
  return json{{"kind", r.kind},
              {"hidden", r.hidden},
              {"rate", r.rate},
              {"seeds", r.seeds},
              {"accuracy", r.accuracy},
              {"baseline_accuracy", r.baseline_accuracy},
              {"accuracy_delta", r.accuracy_delta},
              {"mac_ratio", r.mac_ratio},
              {"speedup", r.speedup}};
}

/// Writes reports.json and summary.csv into `dir`.
inline void write_sweep(const std::filesystem::path& dir, const SweepResult& result) {
  std::filesystem::create_directories(dir);
  json reports = json::array();
  for (const auto& r : result.reports) reports.push_back(report_to_json(r));
  json summary = json::array();
  for (const auto& r : result.summary) summary.push_back(sweep_row_to_json(r));
  write_json_file(dir / "reports.json", json{{"reports", reports}, {"summary", summary}});
  std::ofstream(dir / "summary.csv") << summary_csv(result.summary);
}

// ---- kernel microbenchmark -------------------------------------------------

class EquivalenceFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GemmShape {
  std::size_t m, k, b;
};

struct MicrobenchRow {
  GemmShape shape;
  std::string kind;
  std::size_t dp = 1, bias = 1;
  TileShape tile;
  double dense_seconds = 0;    // median
  double pattern_seconds = 0;  // median
  std::uint64_t dense_macs = 0, pattern_macs = 0;
  std::uint64_t dense_bytes = 0, pattern_bytes = 0;
  double mac_ratio = 0;
  double speedup = 0;  // dense / pattern
};

inline json microbench_row_to_json(const MicrobenchRow& r) {
  return json{{"m", r.shape.m},
              {"k", r.shape.k},
              {"b", r.shape.b},
              {"kind", r.kind},
              {"dp", r.dp},
              {"bias", r.bias},
              {"tile", {r.tile.rows, r.tile.cols}},
              {"dense_seconds", r.dense_seconds},
              {"pattern_seconds", r.pattern_seconds},
              {"dense_macs", r.dense_macs},
              {"pattern_macs", r.pattern_macs},
              {"dense_bytes", r.dense_bytes},
              {"pattern_bytes", r.pattern_bytes},
              {"mac_ratio", r.mac_ratio},
              {"speedup", r.speedup}};
}

namespace detail {

inline Matrix<float> random_matrix(std::size_t r, std::size_t c, RngState& rng) {
  Matrix<float> m(r, c);
  for (float& v : m.values()) v = static_cast<float>(2.0 * rng.uniform() - 1.0);
  return m;
}

template <typename Fn>
double median_seconds(std::size_t repeats, Fn&& fn) {
  std::vector<double> t;
  for (std::size_t i = 0; i < repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

}  // namespace detail

/// Times dense vs pattern kernels after checking the pattern kernel against its masked-dense oracle.
inline std::vector<MicrobenchRow> gemm_microbench(const std::vector<GemmShape>& shapes,
                                                  const std::vector<DropoutPattern>& patterns, std::size_t repeats,
                                                  std::uint64_t seed = 1) {
  if (repeats < 1) throw std::invalid_argument("repeats must be >= 1");
  std::vector<MicrobenchRow> rows;
  RngState rng(seed, 0);
  for (const auto& s : shapes) {
    if (s.m < 1 || s.k < 1 || s.b < 1) throw std::invalid_argument("gemm sizes must be >= 1");
    const auto w = detail::random_matrix(s.m, s.k, rng);
    const auto x = detail::random_matrix(s.k, s.b, rng);
    for (const auto& pat : patterns) {
      MicrobenchRow row;
      row.shape = s;
      row.kind = std::string(to_string(pat.kind()));
      row.dp = pat.dp();
      row.bias = pat.bias();
      row.tile = pat.tile_shape();

      MacCounter scratch;
      const MaskGeometry geom{s.m, s.k};
      if (pat.kind() == PatternKind::Row) {
        auto oracle = dense_gemm(w, x, scratch);
        const auto kept = kept_row_indices(geom, pat);
        for (std::size_t i = 0; i < s.m; ++i) {
          if (!std::binary_search(kept.begin(), kept.end(), i)) std::fill(oracle.row(i).begin(), oracle.row(i).end(), 0.f);
        }
        if (!(rdp_gemm(w, x, pat, scratch) == oracle)) throw EquivalenceFailure("rdp_gemm differs from row-masked dense");
      } else {
        const auto mask = materialize_mask<float>(geom, pat);
        if (masked_product_error(tdp_gemm(w, x, pat, scratch), w, x, mask) > 1e-5) {
          throw EquivalenceFailure("tdp_gemm differs from masked-weight dense");
        }
      }

      MacCounter dense_ctr, pat_ctr;
      row.dense_seconds = detail::median_seconds(repeats, [&] {
        MacCounter c;
        auto y = dense_gemm(w, x, c);
        dense_ctr = c;
      });
      row.pattern_seconds = detail::median_seconds(repeats, [&] {
        MacCounter c;
        auto y = pat.kind() == PatternKind::Row ? rdp_gemm(w, x, pat, c) : tdp_gemm(w, x, pat, c);
        pat_ctr = c;
      });
      row.dense_macs = dense_ctr.macs;
      row.pattern_macs = pat_ctr.macs;
      row.dense_bytes = dense_ctr.bytes_fetched;
      row.pattern_bytes = pat_ctr.bytes_fetched;
      row.mac_ratio = static_cast<double>(row.pattern_macs) / static_cast<double>(row.dense_macs);
      row.speedup = row.pattern_seconds > 0 ? row.dense_seconds / row.pattern_seconds : 0.0;
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace ardrop
