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

// Compute-skipping matrix kernels.
//
// Every kernel works on a KeptRegion: the set of weight entries that take
// part in the product, stored as row-major-ordered rectangles. Dense GEMM is
// the full rectangle, a Row pattern is one full-width rectangle per kept row,
// a Tile pattern is one rectangle per kept tile. Work outside the region is
// never touched, and the MAC counter is charged only for entries inside it.
//
// Summation order: each output element accumulates its terms in ascending
// inner index, independent of how rows are split across workers, so results
// are bitwise reproducible for any worker count.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <thread>
#include <vector>

#include "ardrop/matrix.hpp"
#include "ardrop/patterns.hpp"

namespace ardrop {

struct MacCounter {
  std::uint64_t macs = 0;
  std::uint64_t bytes_fetched = 0;

  void add(std::uint64_t m, std::uint64_t bytes) noexcept {
    macs += m;
    bytes_fetched += bytes;
  }
  MacCounter& operator+=(const MacCounter& o) noexcept {
    add(o.macs, o.bytes_fetched);
    return *this;
  }
};

struct ExecPolicy {
  unsigned workers = 1;
};

struct Block {
  std::size_t row_begin, row_end, col_begin, col_end;

  std::size_t area() const noexcept { return (row_end - row_begin) * (col_end - col_begin); }
};

/// Entries of an M x K weight matrix that participate in a product.
struct KeptRegion {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Block> blocks;  // sorted by (row_begin, col_begin), non-overlapping

  std::uint64_t kept_elements() const noexcept {
    std::uint64_t n = 0;
    for (const auto& b : blocks) n += b.area();
    return n;
  }

  /// Number of distinct columns (inner indices) the region touches.
  std::size_t referenced_cols() const {
    std::vector<char> seen(cols, 0);
    for (const auto& b : blocks) std::fill(seen.begin() + b.col_begin, seen.begin() + b.col_end, 1);
    return static_cast<std::size_t>(std::count(seen.begin(), seen.end(), 1));
  }

  static KeptRegion dense(std::size_t m, std::size_t k) {
    return KeptRegion{m, k, m && k ? std::vector<Block>{{0, m, 0, k}} : std::vector<Block>{}};
  }

  static KeptRegion for_pattern(std::size_t m, std::size_t k, const DropoutPattern& pat) {
    KeptRegion r{m, k, {}};
    const MaskGeometry geom{m, k};
    if (pat.kind() == PatternKind::Row) {
      for (std::size_t i : kept_row_indices(geom, pat)) r.blocks.push_back({i, i + 1, 0, k});
    } else {
      const TileGrid grid(geom, pat.tile_shape());
      for (std::size_t t : kept_tile_indices(geom, pat)) {
        r.blocks.push_back({grid.row_begin(t), grid.row_end(t), grid.col_begin(t), grid.col_end(t)});
      }
    }
    return r;
  }
};

namespace detail {

template <typename Fn>
void parallel_ranges(std::size_t n, unsigned workers, Fn&& fn) {
  const std::size_t w = std::max<std::size_t>(1, std::min<std::size_t>(workers, n));
  if (w == 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(w - 1);
  const std::size_t chunk = (n + w - 1) / w;
  for (std::size_t t = 1; t < w; ++t) {
    const std::size_t lo = std::min(n, t * chunk);
    const std::size_t hi = std::min(n, lo + chunk);
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  fn(std::size_t{0}, std::min(n, chunk));
}

template <typename T>
inline void axpy(T* __restrict y, const T* __restrict x, T a, std::size_t n) noexcept {
  for (std::size_t j = 0; j < n; ++j) y[j] += a * x[j];
}

inline void check_inner(std::size_t wc, std::size_t xr, const char* op) {
  if (wc != xr) {
    throw DimensionMismatch(std::string(op) + ": inner dimensions differ (" + std::to_string(wc) + " vs " +
                            std::to_string(xr) + ")");
  }
}

}  // namespace detail

/// Y = (W restricted to region) * X. Rows of Y with no kept entries are zero.
template <typename T>
Matrix<T> region_gemm(const Matrix<T>& w, const Matrix<T>& x, const KeptRegion& region, MacCounter& ctr,
                      ExecPolicy exec = {}) {
  detail::check_inner(w.cols(), x.rows(), "gemm");
  if (region.rows != w.rows() || region.cols != w.cols()) throw DimensionMismatch("gemm: region does not match W");
  const std::size_t batch = x.cols();
  Matrix<T> y(w.rows(), batch, T(0));
  detail::parallel_ranges(w.rows(), exec.workers, [&](std::size_t lo, std::size_t hi) {
    for (const auto& b : region.blocks) {
      const std::size_t r0 = std::max(b.row_begin, lo), r1 = std::min(b.row_end, hi);
      for (std::size_t i = r0; i < r1; ++i) {
        T* yi = y.row(i).data();
        const T* wi = w.row(i).data();
        for (std::size_t k = b.col_begin; k < b.col_end; ++k) detail::axpy(yi, x.row(k).data(), wi[k], batch);
      }
    }
  });
  ctr.add(region.kept_elements() * batch,
          (region.kept_elements() + region.referenced_cols() * batch) * sizeof(T));
  return y;
}

/// dW = (dZ * A^T) restricted to region; entries outside the region are zero.
template <typename T>
Matrix<T> region_grad_weight(const Matrix<T>& dz, const Matrix<T>& a, const KeptRegion& region, MacCounter& ctr,
                             ExecPolicy exec = {}) {
  if (dz.cols() != a.cols()) throw DimensionMismatch("grad_weight: batch sizes differ");
  if (region.rows != dz.rows() || region.cols != a.rows()) throw DimensionMismatch("grad_weight: region mismatch");
  const std::size_t batch = dz.cols();
  const std::size_t k_dim = a.rows();
  Matrix<T> at(batch, k_dim);
  for (std::size_t k = 0; k < k_dim; ++k)
    for (std::size_t j = 0; j < batch; ++j) at(j, k) = a(k, j);

  Matrix<T> dw(dz.rows(), k_dim, T(0));
  detail::parallel_ranges(dz.rows(), exec.workers, [&](std::size_t lo, std::size_t hi) {
    for (const auto& b : region.blocks) {
      const std::size_t r0 = std::max(b.row_begin, lo), r1 = std::min(b.row_end, hi);
      const std::size_t width = b.col_end - b.col_begin;
      for (std::size_t i = r0; i < r1; ++i) {
        T* out = dw.row(i).data() + b.col_begin;
        const T* g = dz.row(i).data();
        for (std::size_t j = 0; j < batch; ++j) detail::axpy(out, at.row(j).data() + b.col_begin, g[j], width);
      }
    }
  });
  ctr.add(region.kept_elements() * batch,
          (region.kept_elements() + region.referenced_cols() * batch) * sizeof(T));
  return dw;
}

/// dA = (W restricted to region)^T * dZ.
template <typename T>
Matrix<T> region_grad_input(const Matrix<T>& w, const Matrix<T>& dz, const KeptRegion& region, MacCounter& ctr,
                            ExecPolicy exec = {}) {
  if (w.rows() != dz.rows()) throw DimensionMismatch("grad_input: W rows differ from dZ rows");
  if (region.rows != w.rows() || region.cols != w.cols()) throw DimensionMismatch("grad_input: region mismatch");
  const std::size_t batch = dz.cols();
  Matrix<T> da(w.cols(), batch, T(0));
  // Partitioned over inner index k so each worker owns whole rows of dA.
  detail::parallel_ranges(w.cols(), exec.workers, [&](std::size_t lo, std::size_t hi) {
    for (const auto& b : region.blocks) {
      const std::size_t c0 = std::max(b.col_begin, lo), c1 = std::min(b.col_end, hi);
      if (c0 >= c1) continue;
      for (std::size_t i = b.row_begin; i < b.row_end; ++i) {
        const T* wi = w.row(i).data();
        const T* g = dz.row(i).data();
        for (std::size_t k = c0; k < c1; ++k) detail::axpy(da.row(k).data(), g, wi[k], batch);
      }
    }
  });
  std::size_t kept_rows = 0;
  {
    std::vector<char> seen(w.rows(), 0);
    for (const auto& b : region.blocks) std::fill(seen.begin() + b.row_begin, seen.begin() + b.row_end, 1);
    kept_rows = static_cast<std::size_t>(std::count(seen.begin(), seen.end(), 1));
  }
  ctr.add(region.kept_elements() * batch, (region.kept_elements() + kept_rows * batch) * sizeof(T));
  return da;
}

/// Reference product, ascending-k summation per element.
template <typename T>
Matrix<T> dense_gemm(const Matrix<T>& w, const Matrix<T>& x, MacCounter& ctr, ExecPolicy exec = {}) {
  detail::check_inner(w.cols(), x.rows(), "dense_gemm");
  return region_gemm(w, x, KeptRegion::dense(w.rows(), w.cols()), ctr, exec);
}

/// Computes only the kept rows; dropped rows of the result are zero.
template <typename T>
Matrix<T> rdp_gemm(const Matrix<T>& w, const Matrix<T>& x, const DropoutPattern& pat, MacCounter& ctr,
                   ExecPolicy exec = {}) {
  if (pat.kind() != PatternKind::Row) throw std::invalid_argument("rdp_gemm needs a Row pattern");
  detail::check_inner(w.cols(), x.rows(), "rdp_gemm");
  return region_gemm(w, x, KeptRegion::for_pattern(w.rows(), w.cols(), pat), ctr, exec);
}

/// (W masked by kept tiles) * X, skipping every MAC whose weight lies in a dropped tile.
template <typename T>
Matrix<T> tdp_gemm(const Matrix<T>& w, const Matrix<T>& x, const DropoutPattern& pat, MacCounter& ctr,
                   ExecPolicy exec = {}) {
  if (pat.kind() != PatternKind::Tile) throw std::invalid_argument("tdp_gemm needs a Tile pattern");
  detail::check_inner(w.cols(), x.rows(), "tdp_gemm");
  return region_gemm(w, x, KeptRegion::for_pattern(w.rows(), w.cols(), pat), ctr, exec);
}

/// Cache-blocked dense product: (tile.rows x tile.cols) blocks of W against
/// column panels of X. Same MAC count as dense_gemm.
template <typename T>
Matrix<T> tiled_dense_gemm(const Matrix<T>& w, const Matrix<T>& x, TileShape tile, MacCounter& ctr,
                           std::size_t panel = 256) {
  detail::check_inner(w.cols(), x.rows(), "tiled_dense_gemm");
  if (tile.rows < 1 || tile.cols < 1 || panel < 1) throw std::invalid_argument("tile and panel must be >= 1");
  const std::size_t m = w.rows(), kd = w.cols(), batch = x.cols();
  Matrix<T> y(m, batch, T(0));
  for (std::size_t i0 = 0; i0 < m; i0 += tile.rows) {
    const std::size_t i1 = std::min(m, i0 + tile.rows);
    for (std::size_t k0 = 0; k0 < kd; k0 += tile.cols) {
      const std::size_t k1 = std::min(kd, k0 + tile.cols);
      for (std::size_t j0 = 0; j0 < batch; j0 += panel) {
        const std::size_t j1 = std::min(batch, j0 + panel);
        for (std::size_t i = i0; i < i1; ++i) {
          T* yi = y.row(i).data() + j0;
          for (std::size_t k = k0; k < k1; ++k) detail::axpy(yi, x.row(k).data() + j0, w(i, k), j1 - j0);
        }
      }
    }
  }
  ctr.add(static_cast<std::uint64_t>(m) * kd * batch, (m * kd + kd * batch) * sizeof(T));
  return y;
}

/// Error of y against (W .* mask) X evaluated in double, per element relative to
/// sum_k |mask w_ik x_kj|. That sum bounds the rounding error of any summation
/// order, so the measure stays meaningful under cancellation.
template <typename T>
double masked_product_error(const Matrix<T>& y, const Matrix<T>& w, const Matrix<T>& x, const Matrix<T>& mask) {
  detail::check_inner(w.cols(), x.rows(), "masked_product_error");
  if (y.rows() != w.rows() || y.cols() != x.cols() || mask.rows() != w.rows() || mask.cols() != w.cols()) {
    throw DimensionMismatch("masked_product_error: shape mismatch");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < w.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      double sum = 0.0, mag = 0.0;
      for (std::size_t k = 0; k < w.cols(); ++k) {
        const double t = static_cast<double>(mask(i, k)) * static_cast<double>(w(i, k)) * static_cast<double>(x(k, j));
        sum += t;
        mag += std::abs(t);
      }
      const double err = std::abs(static_cast<double>(y(i, j)) - sum);
      worst = std::max(worst, mag > 0.0 ? err / mag : err);
    }
  }
  return worst;
}

}  // namespace ardrop
