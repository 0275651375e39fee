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

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "ardrop/distsearch.hpp"
#include "ardrop/nn.hpp"
#include "ardrop/report.hpp"

namespace ardrop {

using nlohmann::json;

// ---- distributions ---------------------------------------------------------

inline json distribution_to_json(const PatternDistribution& d) {
  return json{{"target_rate", d.target_rate},
              {"max_dp", d.max_dp()},
              {"probs", d.probs},
              {"achieved_rate", expected_global_rate(d)},
              {"iterations", d.iterations},
              {"final_loss", d.final_loss},
              {"converged", d.converged}};
}

inline PatternDistribution distribution_from_json(const json& j) {
  PatternDistribution d;
  d.probs = j.at("probs").get<std::vector<double>>();
  d.target_rate = j.at("target_rate").get<double>();
  d.iterations = j.value("iterations", std::size_t{0});
  d.final_loss = j.value("final_loss", 0.0);
  d.converged = j.value("converged", true);
  if (j.contains("max_dp") && j.at("max_dp").get<std::size_t>() != d.probs.size()) {
    throw std::invalid_argument("max_dp does not match probs length");
  }
  d.validate();
  return d;
}

// ---- reports ---------------------------------------------------------------

inline json report_to_json(const RunReport& r) {
  return json{{"mode", r.mode},
              {"config", r.config},
              {"seed", r.seed},
              {"generator", r.generator},
              {"epoch_accuracy", r.epoch_accuracy},
              {"epoch_loss", r.epoch_loss},
              {"final_accuracy", r.final_accuracy},
              {"iterations", r.iterations},
              {"macs", {{"hidden", r.hidden_macs}, {"total", r.total_macs}, {"hidden_bytes", r.hidden_bytes}}},
              {"wall_clock_seconds", r.wall_clock_seconds},
              {"pattern_histogram", r.pattern_histogram}};
}

inline RunReport report_from_json(const json& j) {
  RunReport r;
  r.mode = j.at("mode").get<std::string>();
  r.config = j.value("config", json::object());
  r.seed = j.at("seed").get<std::uint64_t>();
  r.generator = j.at("generator").get<std::string>();
  r.epoch_accuracy = j.at("epoch_accuracy").get<std::vector<double>>();
  r.epoch_loss = j.at("epoch_loss").get<std::vector<double>>();
  r.final_accuracy = j.at("final_accuracy").get<double>();
  r.iterations = j.at("iterations").get<std::uint64_t>();
  r.hidden_macs = j.at("macs").at("hidden").get<std::uint64_t>();
  r.total_macs = j.at("macs").at("total").get<std::uint64_t>();
  r.hidden_bytes = j.at("macs").at("hidden_bytes").get<std::uint64_t>();
  r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  r.pattern_histogram = j.at("pattern_histogram").get<std::vector<std::vector<std::uint64_t>>>();
  return r;
}

// ---- model checkpoints -----------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

inline json dropout_to_json(const DropoutSpec& d) {
  json j{{"mode", to_string(d.mode)}, {"rate", d.rate}, {"rescale", d.rescale}};
  if (d.uses_patterns()) j["distribution"] = distribution_to_json(d.distribution);
  if (d.mode == DropoutMode::Tile) j["tile"] = {d.tile.rows, d.tile.cols};
  return j;
}

inline DropoutSpec dropout_from_json(const json& j) {
  DropoutSpec d;
  d.mode = parse_dropout_mode(j.at("mode").get<std::string>());
  d.rate = j.at("rate").get<double>();
  d.rescale = j.value("rescale", true);
  if (j.contains("distribution")) d.distribution = distribution_from_json(j.at("distribution"));
  if (j.contains("tile")) d.tile = {j.at("tile").at(0).get<std::size_t>(), j.at("tile").at(1).get<std::size_t>()};
  return d;
}

template <typename T>
json checkpoint_to_json(const MlpModel<T>& m) {
  json layers = json::array();
  for (std::size_t l = 0; l < m.depth(); ++l) {
    const auto& s = m.layers[l];
    json lj{{"in_dim", s.in_dim},
            {"out_dim", s.out_dim},
            {"activation", s.activation == Activation::ReLU ? "relu" : "softmax"},
            {"weights", std::vector<T>(m.weights[l].values().begin(), m.weights[l].values().end())},
            {"biases", m.biases[l]}};
    if (s.dropout) lj["dropout"] = dropout_to_json(*s.dropout);
    layers.push_back(std::move(lj));
  }
  return json{{"format", "ardrop-mlp"}, {"version", kCheckpointVersion}, {"layers", std::move(layers)}};
}

template <typename T>
MlpModel<T> checkpoint_from_json(const json& j) {
  if (j.value("format", "") != "ardrop-mlp") throw std::invalid_argument("not an ardrop-mlp checkpoint");
  if (j.value("version", 0) != kCheckpointVersion) throw std::invalid_argument("unsupported checkpoint version");
  MlpModel<T> m;
  for (const auto& lj : j.at("layers")) {
    LayerSpec s;
    s.in_dim = lj.at("in_dim").get<std::size_t>();
    s.out_dim = lj.at("out_dim").get<std::size_t>();
    s.activation = lj.at("activation").get<std::string>() == "relu" ? Activation::ReLU : Activation::Softmax;
    if (lj.contains("dropout")) s.dropout = dropout_from_json(lj.at("dropout"));
    const auto w = lj.at("weights").get<std::vector<T>>();
    if (w.size() != s.in_dim * s.out_dim) throw DimensionMismatch("checkpoint weight count mismatch");
    Matrix<T> wm(s.out_dim, s.in_dim);
    std::copy(w.begin(), w.end(), wm.data());
    m.layers.push_back(std::move(s));
    m.weights.push_back(std::move(wm));
    m.biases.push_back(lj.at("biases").get<std::vector<T>>());
  }
  m.validate();
  return m;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const MlpModel<T>& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << checkpoint_to_json(m).dump() << '\n';
}

template <typename T>
MlpModel<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return checkpoint_from_json<T>(json::parse(in));
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return json::parse(in);
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace ardrop
