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

#include "ardrop/bench.hpp"
#include "ardrop/distsearch.hpp"
#include "ardrop/gemm.hpp"
#include "ardrop/json_io.hpp"
#include "ardrop/matrix.hpp"
#include "ardrop/mnist.hpp"
#include "ardrop/nn.hpp"
#include "ardrop/patterns.hpp"
#include "ardrop/report.hpp"
#include "ardrop/rng.hpp"
#include "ardrop/sampler.hpp"
