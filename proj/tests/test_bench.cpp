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

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "ardrop/bench.hpp"

namespace ardrop {
namespace {

namespace fs = std::filesystem;

// 10-class synthetic stand-in for MNIST: class c lights up feature block c.
ExperimentData synthetic_data(std::size_t n_train, std::size_t n_test) {
  auto make = [](std::size_t n, std::uint64_t stream) {
    RngState rng(3, stream);
    Dataset d;
    d.image_rows = 4;
    d.image_cols = 5;
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::uint8_t>(rng.below(10));
      for (std::size_t k = 0; k < 20; ++k) {
        const double base = k / 2 == c ? 0.8 : 0.1;
        d.pixels.push_back(static_cast<float>(base + 0.1 * rng.uniform()));
      }
      d.labels.push_back(c);
    }
    return d;
  };
  return {make(n_train, 1), make(n_test, 2)};
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.hidden_sizes = {{40, 40}};
  c.train.epochs = 2;
  c.train.batch = 20;
  c.train.learning_rate = 0.05;
  return c;
}

TEST(ExperimentConfigJson, RoundTripsAndRejectsUnknownKeys) {
  auto c = small_config();
  c.rates = {0.2, 0.6};
  c.pattern_kinds = {PatternKind::Row, PatternKind::Tile};
  c.tile = {8, 4};
  const auto back = experiment_from_json(experiment_to_json(c));
  EXPECT_EQ(back.rates, c.rates);
  EXPECT_EQ(back.hidden_sizes, c.hidden_sizes);
  EXPECT_EQ(back.pattern_kinds, c.pattern_kinds);
  EXPECT_EQ(back.tile, c.tile);
  EXPECT_EQ(back.train.epochs, 2u);
  EXPECT_THROW(experiment_from_json(json{{"ratez", {0.5}}}), std::invalid_argument);
  EXPECT_THROW(experiment_from_json(json{{"rates", {0.95}}}), std::invalid_argument);
  EXPECT_THROW(experiment_from_json(json{{"seeds", json::array()}}), std::invalid_argument);
  EXPECT_THROW(experiment_from_json(json{{"pattern_kinds", {"diagonal"}}}), std::invalid_argument);
}

TEST(ExperimentConfigJson, ShorthandKeys) {
  const auto c = experiment_from_json(json{{"hidden", {32, 16}}, {"rate", 0.3}, {"seed", 9}, {"mode", "tile"}});
  EXPECT_EQ(c.hidden_sizes, (std::vector<std::vector<std::size_t>>{{32, 16}}));
  EXPECT_EQ(c.rates, std::vector<double>{0.3});
  EXPECT_EQ(c.seeds, std::vector<std::uint64_t>{9});
}

TEST(DataRoot, ConfiguredPathWins) {
  EXPECT_EQ(resolve_data_root("/some/where"), fs::path("/some/where"));
}

TEST(Microbench, MacRatios) {
  const auto rows = gemm_microbench({{512, 512, 8}},
                                    {DropoutPattern::row(2, 1), DropoutPattern::row(1, 1),
                                     DropoutPattern::tile(4, 1, {32, 32}), DropoutPattern::tile(4, 1, {256, 256})},
                                    1);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].mac_ratio, 0.5);
  EXPECT_EQ(rows[0].pattern_macs * 2, rows[0].dense_macs);
  EXPECT_EQ(rows[1].mac_ratio, 1.0);
  EXPECT_EQ(rows[2].mac_ratio, 0.25);
  EXPECT_EQ(rows[3].mac_ratio, 0.25);
  EXPECT_LT(rows[0].pattern_bytes, rows[0].dense_bytes);
  for (const auto& r : rows) EXPECT_GT(r.dense_seconds, 0.0);
}

TEST(Microbench, RejectsBadSizes) {
  EXPECT_THROW(gemm_microbench({{0, 4, 4}}, {DropoutPattern::row(1, 1)}, 1), std::invalid_argument);
  EXPECT_THROW(gemm_microbench({{4, 4, 4}}, {DropoutPattern::row(1, 1)}, 0), std::invalid_argument);
}

TEST(RateSweep, PairsEveryRateWithBaseline) {
  const auto data = synthetic_data(2000, 300);
  const auto cfg = small_config();
  const auto result = run_rate_sweep(cfg, data);
  ASSERT_EQ(result.reports.size(), 6u);
  ASSERT_EQ(result.summary.size(), 3u);
  EXPECT_EQ(result.reports[0].mode, "conventional");
  EXPECT_EQ(result.reports[1].mode, "row");
  for (const auto& r : result.summary) {
    EXPECT_TRUE(std::isfinite(r.accuracy_delta));
    EXPECT_DOUBLE_EQ(r.accuracy_delta, r.accuracy - r.baseline_accuracy);
    EXPECT_GT(r.speedup, 0.0);
  }
  EXPECT_LT(result.summary[2].mac_ratio, result.summary[1].mac_ratio);
  EXPECT_LT(result.summary[1].mac_ratio, result.summary[0].mac_ratio);
  EXPECT_LE(result.summary[2].mac_ratio, 0.35);
  // Every report carries the config needed to rerun it.
  EXPECT_EQ(result.reports[1].config.at("rate").get<double>(), 0.3);
  EXPECT_EQ(result.reports[1].config.at("mode").get<std::string>(), "row");
  EXPECT_EQ(result.reports[1].generator, std::string(kGeneratorId));
}

TEST(RateSweep, ZeroRateKeepsEverything) {
  const auto data = synthetic_data(200, 50);
  auto cfg = small_config();
  cfg.rates = {0.0};
  cfg.train.epochs = 1;
  const auto result = run_rate_sweep(cfg, data);
  EXPECT_EQ(result.summary[0].mac_ratio, 1.0);
}

TEST(SizeSweep, MacRatioDependsOnRateNotSize) {
  const auto data = synthetic_data(1000, 200);
  auto cfg = small_config();
  cfg.hidden_sizes = {{60, 60}, {120, 120}};
  cfg.size_sweep_rate = 0.5;
  const auto result = run_size_sweep(cfg, data);
  ASSERT_EQ(result.summary.size(), 2u);
  EXPECT_NEAR(result.summary[1].mac_ratio / result.summary[0].mac_ratio, 1.0, 0.05);
}

TEST(SizeSweep, EmptySizeListIsRejected) {
  auto cfg = small_config();
  cfg.hidden_sizes.clear();
  EXPECT_THROW(run_size_sweep(cfg, synthetic_data(10, 10)), std::invalid_argument);
}

TEST(SweepOutput, ReportsAndCsvRoundTrip) {
  const auto data = synthetic_data(200, 50);
  auto cfg = small_config();
  cfg.rates = {0.5};
  cfg.train.epochs = 1;
  cfg.pattern_kinds = {PatternKind::Row, PatternKind::Tile};
  cfg.tile = {8, 8};
  const auto result = run_rate_sweep(cfg, data);
  const auto dir = fs::temp_directory_path() / "ardrop_sweep_test";
  write_sweep(dir, result);
  const auto j = read_json_file(dir / "reports.json");
  ASSERT_EQ(j.at("reports").size(), 3u);
  const auto back = report_from_json(j.at("reports")[2]);
  EXPECT_EQ(back.mode, "tile");
  EXPECT_EQ(back.epoch_accuracy, result.reports[2].epoch_accuracy);
  EXPECT_EQ(back.hidden_macs, result.reports[2].hidden_macs);
  EXPECT_EQ(back.pattern_histogram, result.reports[2].pattern_histogram);
  std::ifstream csv(dir / "summary.csv");
  std::string header, line;
  std::getline(csv, header);
  EXPECT_EQ(header, "kind,hidden,rate,seeds,accuracy,baseline_accuracy,accuracy_delta,mac_ratio,speedup");
  int lines = 0;
  while (std::getline(csv, line)) ++lines;
  EXPECT_EQ(lines, 2);
  fs::remove_all(dir);
}

TEST(ParallelSeeds, MatchSequentialRuns) {
  const auto data = synthetic_data(300, 50);
  auto cfg = small_config();
  cfg.rates = {0.5};
  cfg.train.epochs = 1;
  cfg.seeds = {1, 2};
  const auto seq = run_rate_sweep(cfg, data);
  cfg.parallel = true;
  const auto par = run_rate_sweep(cfg, data);
  ASSERT_EQ(seq.reports.size(), par.reports.size());
  for (std::size_t i = 0; i < seq.reports.size(); ++i) {
    EXPECT_EQ(seq.reports[i].epoch_accuracy, par.reports[i].epoch_accuracy);
    EXPECT_EQ(seq.reports[i].hidden_macs, par.reports[i].hidden_macs);
  }
}

// ---- command-line interface ------------------------------------------------

struct CliResult {
  int code;
  std::string err;
};

CliResult run_cli(const std::string& args) {
  const auto err_path = fs::temp_directory_path() / "ardrop_cli_stderr.txt";
  const std::string cmd = std::string("\"") + ARDROP_CLI_PATH + "\" " + args + " >/dev/null 2>\"" + err_path.string() + "\"";
  const int status = std::system(cmd.c_str());
  std::ifstream in(err_path);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WEXITSTATUS(status), ss.str()};
}

TEST(Cli, SearchDistWritesDistribution) {
  const auto out = fs::temp_directory_path() / "ardrop_cli_dist.json";
  ASSERT_EQ(run_cli("search-dist --rate 0.5 --max-dp 10 --seed 1 --out " + out.string()).code, 0);
  const auto j = read_json_file(out);
  for (const char* key : {"target_rate", "max_dp", "probs", "achieved_rate", "iterations", "final_loss"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_NEAR(j.at("achieved_rate").get<double>(), 0.5, 0.01);
  EXPECT_EQ(j.at("probs").size(), 10u);
  fs::remove(out);
}

TEST(Cli, InvalidArgumentsExitNonzeroWithErrorRecord) {
  const auto r = run_cli("search-dist --rate 0.95 --max-dp 10");
  EXPECT_EQ(r.code, 2);
  const auto j = json::parse(r.err);
  EXPECT_EQ(j.at("error").at("kind"), "invalid-argument");
  EXPECT_EQ(run_cli("gemm-bench --dp 0").code, 2);
  EXPECT_EQ(run_cli("no-such-command").code, 2);
}

TEST(Cli, NoConvergenceCarriesDistribution) {
  const auto r = run_cli("search-dist --rate 0.3 --max-dp 10 --max-iters 1");
  EXPECT_EQ(r.code, 4);
  const auto j = json::parse(r.err);
  EXPECT_EQ(j.at("error").at("kind"), "no-convergence");
  EXPECT_TRUE(j.at("error").contains("distribution"));
}

TEST(Cli, GemmBenchRuns) {
  EXPECT_EQ(run_cli("gemm-bench --m 64 --k 64 --b 8 --pattern tile --dp 4 --tile 32 --repeats 1").code, 0);
  EXPECT_EQ(run_cli("gemm-bench --m 64 --k 64 --b 8 --pattern row --dp 2 --repeats 1").code, 0);
}

TEST(Cli, MissingDatasetIsDataError) {
  const auto cfg = fs::temp_directory_path() / "ardrop_cli_cfg.json";
  write_json_file(cfg, json{{"dataset_path", "/nonexistent/mnist"}, {"hidden", {8}}, {"rate", 0.5}});
  const auto r = run_cli("train --config " + cfg.string() + " --out " + (fs::temp_directory_path() / "ardrop_x").string());
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(json::parse(r.err).at("error").at("kind"), "io");
  fs::remove(cfg);
}

}  // namespace
}  // namespace ardrop
