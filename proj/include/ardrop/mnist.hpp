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

// IDX reader for the MNIST distribution files.
//
// Layout (all integers big-endian):
//   images: u32 magic 0x00000803, u32 count, u32 rows, u32 cols, count*rows*cols u8 pixels
//   labels: u32 magic 0x00000801, u32 count, count u8 labels

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

namespace ardrop {

struct Dataset {
  std::size_t image_rows = 0;
  std::size_t image_cols = 0;
  std::vector<float> pixels;  // size() * dim(), one sample per contiguous run, scaled to [0, 1]
  std::vector<std::uint8_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return image_rows * image_cols; }
  const float* sample(std::size_t i) const noexcept { return pixels.data() + i * dim(); }

  /// First n samples (or all, if fewer).
  Dataset head(std::size_t n) const {
    Dataset d;
    d.image_rows = image_rows;
    d.image_cols = image_cols;
    n = std::min(n, size());
    d.pixels.assign(pixels.begin(), pixels.begin() + static_cast<std::ptrdiff_t>(n * dim()));
    d.labels.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n));
    return d;
  }
};

class IdxError : public std::runtime_error {
 public:
  enum class Kind { BadMagic, Truncated, CountMismatch, Io };

  IdxError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

  static const char* name(Kind k) {
    switch (k) {
      case Kind::BadMagic: return "bad-magic";
      case Kind::Truncated: return "truncated-file";
      case Kind::CountMismatch: return "count-mismatch";
      case Kind::Io: return "io";
    }
    return "unknown";
  }

 private:
  Kind kind_;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

namespace detail {

inline std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError(IdxError::Kind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& buf, std::size_t off, const std::string& file) {
  if (buf.size() < off + 4) throw IdxError(IdxError::Kind::Truncated, file + ": header truncated");
  return (std::uint32_t{buf[off]} << 24) | (std::uint32_t{buf[off + 1]} << 16) | (std::uint32_t{buf[off + 2]} << 8) |
         std::uint32_t{buf[off + 3]};
}

}  // namespace detail

inline Dataset load_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const auto img = detail::read_all(images_path);
  const auto lab = detail::read_all(labels_path);
  const std::string img_name = images_path.string(), lab_name = labels_path.string();

  const std::uint32_t img_magic = detail::read_be32(img, 0, img_name);
  if (img_magic != kIdxImageMagic) {
    throw IdxError(IdxError::Kind::BadMagic, img_name + ": expected image magic 0x00000803");
  }
  const std::uint32_t lab_magic = detail::read_be32(lab, 0, lab_name);
  if (lab_magic != kIdxLabelMagic) {
    throw IdxError(IdxError::Kind::BadMagic, lab_name + ": expected label magic 0x00000801");
  }

  const std::size_t count = detail::read_be32(img, 4, img_name);
  const std::size_t rows = detail::read_be32(img, 8, img_name);
  const std::size_t cols = detail::read_be32(img, 12, img_name);
  const std::size_t label_count = detail::read_be32(lab, 4, lab_name);
  if (count != label_count) {
    throw IdxError(IdxError::Kind::CountMismatch, "image count " + std::to_string(count) +
                                                      " != label count " + std::to_string(label_count));
  }
  const std::size_t want_img = 16 + count * rows * cols;
  if (img.size() < want_img) throw IdxError(IdxError::Kind::Truncated, img_name + ": pixel data truncated");
  if (lab.size() < 8 + count) throw IdxError(IdxError::Kind::Truncated, lab_name + ": label data truncated");

  Dataset d;
  d.image_rows = rows;
  d.image_cols = cols;
  d.pixels.resize(count * rows * cols);
  std::transform(img.begin() + 16, img.begin() + static_cast<std::ptrdiff_t>(want_img), d.pixels.begin(),
                 [](std::uint8_t b) { return static_cast<float>(b) / 255.0f; });
  d.labels.assign(lab.begin() + 8, lab.begin() + 8 + static_cast<std::ptrdiff_t>(count));
  return d;
}

/// Standard file names inside an MNIST directory.
struct MnistFiles {
  std::filesystem::path train_images, train_labels, test_images, test_labels;

  explicit MnistFiles(const std::filesystem::path& root)
      : train_images(root / "train-images-idx3-ubyte"),
        train_labels(root / "train-labels-idx1-ubyte"),
        test_images(root / "t10k-images-idx3-ubyte"),
        test_labels(root / "t10k-labels-idx1-ubyte") {}
};

}  // namespace ardrop
