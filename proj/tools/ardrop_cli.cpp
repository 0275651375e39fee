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

// ardrop: command-line front end for distribution search, kernel benchmarks,
// single training runs and paired sweeps.
//
// On failure the process exits nonzero and writes one JSON line to stderr:
//   {"error": {"kind": "...", "message": "..."}}

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ardrop/ardrop.hpp"

namespace {

using ardrop::json;

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kInvalidArgument = 2,
  kDataError = 3,
  kNoConvergence = 4,
  kDivergence = 5,
  kEquivalence = 6,
};

int report_error(const char* kind, const std::string& message, int code, json extra = json::object()) {
  json err{{"kind", kind}, {"message", message}};
  for (auto& [k, v] : extra.items()) err[k] = v;
  std::cerr << json{{"error", err}}.dump() << std::endl;
  return code;
}

ardrop::TileShape parse_tile(const std::string& s) {
  const auto x = s.find_first_of("xX");
  if (x == std::string::npos) {
    const auto n = std::stoul(s);
    return {n, n};
  }
  return {std::stoul(s.substr(0, x)), std::stoul(s.substr(x + 1))};
}

void emit(const json& j, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << j.dump(2) << std::endl;
  } else {
    ardrop::write_json_file(out, j);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Approximate random dropout toolkit"};
  app.require_subcommand(1);

  // search-dist
  auto* search = app.add_subcommand("search-dist", "Search a dp distribution for a target dropout rate");
  double rate = 0.5;
  std::size_t max_dp = 10;
  ardrop::SearchConfig scfg;
  std::optional<double> lambda2;
  std::uint64_t seed = 0;
  std::string search_out;
  search->add_option("--rate", rate, "Target dropout rate")->required();
  search->add_option("--max-dp", max_dp, "Largest period considered")->capture_default_str();
  search->add_option("--lambda1", scfg.lambda1, "Rate-matching weight")->capture_default_str();
  search->add_option("--lambda2", lambda2, "Entropy weight (default 1 - lambda1)");
  search->add_option("--lr", scfg.learning_rate, "Initial step size")->capture_default_str();
  search->add_option("--threshold", scfg.threshold, "Stop when |loss change| falls below")->capture_default_str();
  search->add_option("--max-iters", scfg.max_iters)->capture_default_str();
  search->add_option("--init-scale", scfg.init_scale, "Std-dev of random initial logits (0 = uniform start)");
  search->add_option("--seed", seed)->capture_default_str();
  search->add_option("--out", search_out, "Output JSON file (default stdout)");

  // gemm-bench
  auto* gemm = app.add_subcommand("gemm-bench", "Time dense vs compute-skipping GEMM");
  std::size_t m = 512, k = 512, b = 128, dp = 2, bias = 1, repeats = 5;
  std::string pattern = "row", tile = "32x32", gemm_out;
  gemm->add_option("--m", m)->capture_default_str();
  gemm->add_option("--k", k)->capture_default_str();
  gemm->add_option("--b", b)->capture_default_str();
  gemm->add_option("--pattern", pattern)->check(CLI::IsMember({"row", "tile"}))->capture_default_str();
  gemm->add_option("--dp", dp)->capture_default_str();
  gemm->add_option("--bias", bias)->capture_default_str();
  gemm->add_option("--tile", tile, "Tile shape RxC or N")->capture_default_str();
  gemm->add_option("--repeats", repeats)->capture_default_str();
  gemm->add_option("--out", gemm_out, "Output JSON file (default stdout)");

  // train
  auto* train = app.add_subcommand("train", "Train one MLP and write its report and checkpoint");
  std::string train_config, train_out = "run";
  train->add_option("--config", train_config, "Experiment JSON")->required()->check(CLI::ExistingFile);
  train->add_option("--out", train_out, "Output directory")->capture_default_str();

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Paired pattern-vs-conventional training sweep");
  std::string sweep_kind = "rate", sweep_config, sweep_out;
  sweep->add_option("--kind", sweep_kind)->check(CLI::IsMember({"rate", "size"}))->capture_default_str();
  sweep->add_option("--config", sweep_config, "Experiment JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", sweep_out, "Output directory (default: config output_path or ./sweep-out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return report_error("invalid-argument", e.what(), kInvalidArgument);
  }

  try {
    if (*search) {
      scfg.lambda2 = lambda2.value_or(1.0 - scfg.lambda1);
      const auto dist = ardrop::search_distribution(rate, max_dp, scfg, seed);
      emit(ardrop::distribution_to_json(dist), search_out);
    } else if (*gemm) {
      const auto pat = pattern == "row" ? ardrop::DropoutPattern::row(dp, bias)
                                        : ardrop::DropoutPattern::tile(dp, bias, parse_tile(tile));
      const auto rows = ardrop::gemm_microbench({{m, k, b}}, {pat}, repeats);
      json out = json::array();
      for (const auto& r : rows) out.push_back(ardrop::microbench_row_to_json(r));
      emit(out, gemm_out);
    } else if (*train) {
      const auto j = ardrop::read_json_file(train_config);
      const auto cfg = ardrop::experiment_from_json(j);
      const auto mode_name = j.value("mode", std::string("row"));
      std::optional<ardrop::DropoutMode> mode;
      if (mode_name != "none") mode = ardrop::parse_dropout_mode(mode_name);
      const double p = cfg.rates.empty() ? 0.0 : cfg.rates.front();
      const auto data = ardrop::load_experiment_data(cfg);
      ardrop::DistributionCache dists(cfg.search);
      auto model = ardrop::build_model(cfg, cfg.hidden_sizes.front(), mode, p, data.train.dim(), 10,
                                       cfg.seeds.front(), dists);
      ardrop::TrainConfig tc = cfg.train;
      tc.seed = cfg.seeds.front();
      auto report = ardrop::train(model, data.train, data.test, tc);
      report.config = j;
      std::filesystem::create_directories(train_out);
      ardrop::write_json_file(std::filesystem::path(train_out) / "report.json", ardrop::report_to_json(report));
      ardrop::save_checkpoint(std::filesystem::path(train_out) / "model.json", model);
      std::cout << json{{"final_accuracy", report.final_accuracy},
                        {"hidden_macs", report.hidden_macs},
                        {"wall_clock_seconds", report.wall_clock_seconds},
                        {"out", train_out}}
                       .dump()
                << std::endl;
    } else if (*sweep) {
      const auto cfg = ardrop::experiment_from_json(ardrop::read_json_file(sweep_config));
      const auto data = ardrop::load_experiment_data(cfg);
      const auto result = sweep_kind == "rate" ? ardrop::run_rate_sweep(cfg, data) : ardrop::run_size_sweep(cfg, data);
      const std::string dir = !sweep_out.empty() ? sweep_out : !cfg.output_path.empty() ? cfg.output_path : "sweep-out";
      ardrop::write_sweep(dir, result);
      std::cout << ardrop::summary_csv(result.summary);
    }
  } catch (const ardrop::NoConvergence& e) {
    return report_error("no-convergence", e.what(), kNoConvergence,
                        {{"rate_error", e.rate_error}, {"distribution", ardrop::distribution_to_json(e.distribution)}});
  } catch (const ardrop::IdxError& e) {
    return report_error(ardrop::IdxError::name(e.kind()), e.what(), kDataError);
  } catch (const ardrop::Divergence& e) {
    return report_error("divergence", e.what(), kDivergence, {{"iteration", e.iteration}});
  } catch (const ardrop::EquivalenceFailure& e) {
    return report_error("equivalence-failure", e.what(), kEquivalence);
  } catch (const ardrop::DimensionMismatch& e) {
    return report_error("dimension-mismatch", e.what(), kInvalidArgument);
  } catch (const std::invalid_argument& e) {
    return report_error("invalid-argument", e.what(), kInvalidArgument);
  } catch (const json::exception& e) {
    return report_error("invalid-config", e.what(), kInvalidArgument);
  } catch (const std::exception& e) {
    return report_error("failure", e.what(), kFailure);
  }
  return kOk;
}
