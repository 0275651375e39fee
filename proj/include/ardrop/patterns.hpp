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

// Regular dropout patterns. A pattern (dp, bias) keeps one unit out of every
// dp consecutive units: the units whose 0-based index u satisfies
// u mod dp == bias - 1. Units are weight-matrix rows (Row kind) or tiles of
// the weight matrix enumerated row-major (Tile kind).

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ardrop/matrix.hpp"

namespace ardrop {

enum class PatternKind { Row, Tile };

inline std::string_view to_string(PatternKind k) { return k == PatternKind::Row ? "row" : "tile"; }

inline PatternKind parse_pattern_kind(std::string_view s) {
  if (s == "row") return PatternKind::Row;
  if (s == "tile") return PatternKind::Tile;
  throw std::invalid_argument("unknown pattern kind '" + std::string(s) + "'");
}

struct TileShape {
  std::size_t rows = 32;
  std::size_t cols = 32;

  friend bool operator==(const TileShape&, const TileShape&) = default;
};

/// Output (Row) or weight (Tile) matrix extent that a pattern is laid over.
struct MaskGeometry {
  std::size_t rows = 1;
  std::size_t cols = 1;

  void validate() const {
    if (rows < 1 || cols < 1) throw std::invalid_argument("mask geometry must be at least 1x1");
  }
};

class DropoutPattern {
 public:
  static DropoutPattern row(std::size_t dp, std::size_t bias) {
    return DropoutPattern(PatternKind::Row, dp, bias, TileShape{1, 1});
  }
  static DropoutPattern tile(std::size_t dp, std::size_t bias, TileShape shape = {}) {
    return DropoutPattern(PatternKind::Tile, dp, bias, shape);
  }

  PatternKind kind() const noexcept { return kind_; }
  std::size_t dp() const noexcept { return dp_; }
  std::size_t bias() const noexcept { return bias_; }
  TileShape tile_shape() const noexcept { return tile_; }

  /// 0-based residue of kept units.
  std::size_t residue() const noexcept { return bias_ - 1; }
  bool keeps(std::size_t unit) const noexcept { return unit % dp_ == residue(); }

  friend bool operator==(const DropoutPattern&, const DropoutPattern&) = default;

 private:
  DropoutPattern(PatternKind kind, std::size_t dp, std::size_t bias, TileShape tile)
      : kind_(kind), dp_(dp), bias_(bias), tile_(tile) {
    if (dp_ < 1) throw std::invalid_argument("pattern period dp must be >= 1");
    if (bias_ < 1 || bias_ > dp_) {
      throw std::invalid_argument("pattern bias must lie in [1, dp], got " + std::to_string(bias_) +
                                  " for dp " + std::to_string(dp_));
    }
    if (tile_.rows < 1 || tile_.cols < 1) throw std::invalid_argument("tile shape must be >= 1x1");
  }

  PatternKind kind_;
  std::size_t dp_;
  std::size_t bias_;
  TileShape tile_;
};

/// Tile grid over a geometry; partial edge tiles count as tiles.
struct TileGrid {
  std::size_t grid_rows = 0;
  std::size_t grid_cols = 0;
  TileShape shape;
  MaskGeometry geom;

  TileGrid(MaskGeometry g, TileShape s)
      : grid_rows((g.rows + s.rows - 1) / s.rows),
        grid_cols((g.cols + s.cols - 1) / s.cols),
        shape(s),
        geom(g) {}

  std::size_t count() const noexcept { return grid_rows * grid_cols; }
  std::size_t row_begin(std::size_t t) const noexcept { return (t / grid_cols) * shape.rows; }
  std::size_t row_end(std::size_t t) const noexcept {
    return std::min(row_begin(t) + shape.rows, geom.rows);
  }
  std::size_t col_begin(std::size_t t) const noexcept { return (t % grid_cols) * shape.cols; }
  std::size_t col_end(std::size_t t) const noexcept {
    return std::min(col_begin(t) + shape.cols, geom.cols);
  }
  std::size_t tile_of(std::size_t r, std::size_t c) const noexcept {
    return (r / shape.rows) * grid_cols + c / shape.cols;
  }
};

inline std::vector<std::size_t> kept_units(std::size_t units, const DropoutPattern& pat) {
  std::vector<std::size_t> kept;
  kept.reserve(units / pat.dp() + 1);
  for (std::size_t u = pat.residue(); u < units; u += pat.dp()) kept.push_back(u);
  return kept;
}

inline std::vector<std::size_t> kept_row_indices(const MaskGeometry& geom, const DropoutPattern& pat) {
  geom.validate();
  if (pat.kind() != PatternKind::Row) throw std::invalid_argument("kept_row_indices needs a Row pattern");
  return kept_units(geom.rows, pat);
}

inline std::vector<std::size_t> kept_tile_indices(const MaskGeometry& geom, const DropoutPattern& pat) {
  geom.validate();
  if (pat.kind() != PatternKind::Tile) throw std::invalid_argument("kept_tile_indices needs a Tile pattern");
  const TileGrid grid(geom, pat.tile_shape());
  const auto shape = pat.tile_shape();
  if (shape.rows > geom.rows && shape.cols > geom.cols && pat.dp() > grid.count()) {
    throw std::invalid_argument("tile " + shape_string(shape.rows, shape.cols) + " exceeds matrix " +
                                shape_string(geom.rows, geom.cols) + " and dp exceeds tile count");
  }
  return kept_units(grid.count(), pat);
}

/// Number of units (rows or tiles) a pattern of this kind partitions the geometry into.
inline std::size_t unit_count(const MaskGeometry& geom, PatternKind kind, TileShape shape) {
  return kind == PatternKind::Row ? geom.rows : TileGrid(geom, shape).count();
}

/// Largest usable period: M for rows, floor(M/x) * floor(N/y) for tiles.
inline std::size_t max_dp(const MaskGeometry& geom, PatternKind kind, TileShape shape = {}) {
  geom.validate();
  if (kind == PatternKind::Row) return geom.rows;
  return (geom.rows / shape.rows) * (geom.cols / shape.cols);
}

/// Distinct (dp, bias) pairs for dp in [1, dp_max]: sum of i for i = 1..dp_max.
inline std::uint64_t submodel_count(std::uint64_t dp_max) { return dp_max * (dp_max + 1) / 2; }

/// 0/1 mask of the pattern laid over the geometry.
template <typename T = float>
Matrix<T> materialize_mask(const MaskGeometry& geom, const DropoutPattern& pat) {
  geom.validate();
  Matrix<T> mask(geom.rows, geom.cols, T(0));
  if (pat.kind() == PatternKind::Row) {
    for (std::size_t r : kept_row_indices(geom, pat)) {
      for (T& v : mask.row(r)) v = T(1);
    }
    return mask;
  }
  const TileGrid grid(geom, pat.tile_shape());
  for (std::size_t t : kept_tile_indices(geom, pat)) {
    for (std::size_t r = grid.row_begin(t); r < grid.row_end(t); ++r) {
      for (std::size_t c = grid.col_begin(t); c < grid.col_end(t); ++c) mask(r, c) = T(1);
    }
  }
  return mask;
}

}  // namespace ardrop
