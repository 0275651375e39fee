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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <vector>

#include <gtest/gtest.h>

#include "ardrop/bench.hpp"
#include "ardrop/mnist.hpp"

namespace ardrop {
namespace {

namespace fs = std::filesystem;
using Bytes = std::vector<std::uint8_t>;

void put_be32(Bytes& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

class IdxFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("ardrop_idx_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const Bytes& bytes) {
    const auto p = dir_ / name;
    std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                             static_cast<std::streamsize>(bytes.size()));
    return p;
  }

  // Two 2x3 images with pixels 0..5 and 250..255, labels 7 and 3.
  static Bytes images() {
    Bytes b;
    put_be32(b, 0x803);
    put_be32(b, 2);
    put_be32(b, 2);
    put_be32(b, 3);
    for (int i = 0; i < 6; ++i) b.push_back(static_cast<std::uint8_t>(i));
    for (int i = 250; i < 256; ++i) b.push_back(static_cast<std::uint8_t>(i));
    return b;
  }
  static Bytes labels(std::uint32_t count = 2) {
    Bytes b;
    put_be32(b, 0x801);
    put_be32(b, count);
    b.push_back(7);
    b.push_back(3);
    return b;
  }

  fs::path dir_;
};

TEST_F(IdxFixture, RoundTripsPixelsAndLabels) {
  const auto d = load_mnist_idx(write("img", images()), write("lab", labels()));
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.image_rows, 2u);
  EXPECT_EQ(d.image_cols, 3u);
  EXPECT_EQ(d.labels, (std::vector<std::uint8_t>{7, 3}));
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(d.sample(0)[i], static_cast<float>(i) / 255.0f);
    EXPECT_EQ(d.sample(1)[i], static_cast<float>(250 + i) / 255.0f);
  }
  EXPECT_EQ(d.sample(1)[5], 1.0f);
  EXPECT_EQ(d.head(1).size(), 1u);
  EXPECT_EQ(d.head(1).pixels.size(), 6u);
}

TEST_F(IdxFixture, LabelMagicInImageSlotIsBadMagic) {
  auto img = images();
  img[3] = 0x01;
  try {
    load_mnist_idx(write("img", img), write("lab", labels()));
    FAIL();
  } catch (const IdxError& e) {
    EXPECT_EQ(e.kind(), IdxError::Kind::BadMagic);
  }
}

TEST_F(IdxFixture, ImageMagicInLabelSlotIsBadMagic) {
  auto lab = labels();
  lab[3] = 0x03;
  try {
    load_mnist_idx(write("img", images()), write("lab", lab));
    FAIL();
  } catch (const IdxError& e) {
    EXPECT_EQ(e.kind(), IdxError::Kind::BadMagic);
    EXPECT_STREQ(IdxError::name(e.kind()), "bad-magic");
  }
}

TEST_F(IdxFixture, TruncatedPixelsAndHeaders) {
  auto img = images();
  img.pop_back();
  try {
    load_mnist_idx(write("img", img), write("lab", labels()));
    FAIL();
  } catch (const IdxError& e) {
    EXPECT_EQ(e.kind(), IdxError::Kind::Truncated);
  }
  try {
    load_mnist_idx(write("img2", Bytes{0, 0, 8}), write("lab", labels()));
    FAIL();
  } catch (const IdxError& e) {
    EXPECT_EQ(e.kind(), IdxError::Kind::Truncated);
  }
}

TEST_F(IdxFixture, CountMismatch) {
  try {
    load_mnist_idx(write("img", images()), write("lab", labels(3)));
    FAIL();
  } catch (const IdxError& e) {
    EXPECT_EQ(e.kind(), IdxError::Kind::CountMismatch);
  }
}

TEST_F(IdxFixture, MissingFileIsIoError) {
  try {
    load_mnist_idx(dir_ / "nope", dir_ / "nope2");
    FAIL();
  } catch (const IdxError& e) {
    EXPECT_EQ(e.kind(), IdxError::Kind::Io);
  }
}

TEST(MnistData, CanonicalFilesHaveStandardShape) {
  const char* root = std::getenv(kDataEnv);
  if (!root || !fs::exists(MnistFiles(root).train_images)) GTEST_SKIP() << "MNIST not available";
  const MnistFiles files(root);
  const auto train = load_mnist_idx(files.train_images, files.train_labels);
  EXPECT_EQ(train.size(), 60000u);
  EXPECT_EQ(train.image_rows, 28u);
  EXPECT_EQ(train.image_cols, 28u);
  const auto test = load_mnist_idx(files.test_images, files.test_labels);
  EXPECT_EQ(test.size(), 10000u);
  for (auto l : train.labels) ASSERT_LT(l, 10);
}

}  // namespace
}  // namespace ardrop
