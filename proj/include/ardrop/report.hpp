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

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ardrop/rng.hpp"

namespace ardrop {

/// Record of one training run. Everything except wall_clock_seconds is a
/// deterministic function of the config and seed.
struct RunReport {
  std::string mode;           // "none", "conventional", "row" or "tile"
  nlohmann::json config;      // echo of the run configuration
  std::uint64_t seed = 0;
  std::string generator = std::string(kGeneratorId);

  std::vector<double> epoch_accuracy;  // test accuracy after each epoch
  std::vector<double> epoch_loss;      // mean training loss per epoch
  double final_accuracy = 0.0;

  std::uint64_t iterations = 0;
  std::uint64_t hidden_macs = 0;  // all GEMMs against hidden-layer weights, forward and backward
  std::uint64_t total_macs = 0;
  std::uint64_t hidden_bytes = 0;
  double wall_clock_seconds = 0.0;

  /// Per layer, count of sampled patterns for each dp (index dp - 1). Empty for non-pattern layers.
  std::vector<std::vector<std::uint64_t>> pattern_histogram;
};

}  // namespace ardrop
