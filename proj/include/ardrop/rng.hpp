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
#include <string_view>

namespace ardrop {

/// Identifier recorded in run reports; bump if the output sequence ever changes.
inline constexpr std::string_view kGeneratorId = "splitmix64-keyed-ctr/v1";

inline constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/**
 * Counter-based generator: draw n of stream s under seed k is
 * mix(key(k, s) + (n + 1) * golden). Streams are independent keys, so adding
 * a stream (e.g. a new layer) never shifts the draws of another. Everything is
 * integer arithmetic, so sequences are identical on every platform.
 */
class RngState {
 public:
  RngState() = default;
  RngState(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {
    key_ = splitmix64_mix(seed_ * kGolden + splitmix64_mix(stream_ ^ 0xD1B54A32D192ED03ULL));
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept { return splitmix64_mix(key_ + (++counter_) * kGolden); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept {
    // Lemire's multiply-shift with rejection; unbiased.
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  friend bool operator==(const RngState&, const RngState&) = default;

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

// Stream ids used by the trainer. Per-layer dropout streams are
// kDropoutStreamBase + layer index.
inline constexpr std::uint64_t kInitStream = 1;
inline constexpr std::uint64_t kShuffleStream = 2;
inline constexpr std::uint64_t kDropoutStreamBase = 100;

}  // namespace ardrop
