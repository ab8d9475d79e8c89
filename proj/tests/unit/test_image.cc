/*
 * Copyright 2026 The R2VA Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "r2va/image.h"

#include <gtest/gtest.h>

#include <string>

#include "test_support.h"

namespace r2va {
namespace {

Image random_image(int w, int h, int c, std::uint64_t seed) {
  Rng rng(seed);
  Image im(w, h, c);
  for (auto& p : im.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  return im;
}

TEST(Image, PpmEncodingIsStandard) {
  Image im(2, 1, 3);
  im.pixels = {1, 2, 3, 4, 5, 6};
  const auto bytes = encode_pnm(im);
  const std::string header = "P6\n2 1\n255\n";
  ASSERT_EQ(bytes.size(), header.size() + 6);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + static_cast<long>(header.size())), header);
  EXPECT_EQ(bytes.back(), 6);
}

TEST(Image, PnmRoundTrip) {
  for (int c : {1, 3}) {
    const Image im = random_image(7, 5, c, static_cast<std::uint64_t>(c));
    EXPECT_EQ(decode_pnm(encode_pnm(im)), im);
  }
}

TEST(Image, DecodeToleratesCommentsAndRejectsGarbage) {
  const std::string text = "P5\n# made by hand\n2 2\n255\n";
  std::vector<std::uint8_t> bytes(text.begin(), text.end());
  for (std::uint8_t v : {9, 8, 7, 6}) bytes.push_back(v);
  const Image im = decode_pnm(bytes);
  EXPECT_EQ(im.channels, 1);
  EXPECT_EQ(im.at(1, 1), 6);
  std::vector<std::uint8_t> junk = {'P', '3', '\n'};
  EXPECT_THROW(decode_pnm(junk), std::runtime_error);
  bytes.pop_back();
  EXPECT_THROW(decode_pnm(bytes), std::runtime_error);
}

TEST(Image, FlipHorizontalReversesColumns) {
  Image im(2, 2, 1);
  im.pixels = {1, 2, 3, 4};
  const Image f = flip_horizontal(im);
  EXPECT_EQ(f.pixels, (std::vector<std::uint8_t>{2, 1, 4, 3}));
  const Image r = random_image(9, 4, 3, 5);
  EXPECT_EQ(flip_horizontal(flip_horizontal(r)), r);
}

TEST(Image, ReadMissingFileNamesPath) {
  try {
    read_pnm("/nonexistent/dir/x.ppm");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/x.ppm"), std::string::npos);
  }
}

TEST(Image, FileRoundTrip) {
  r2va::testing::TempDir dir("image");
  const Image im = random_image(4, 6, 3, 8);
  write_pnm(dir.path() / "a.ppm", im);
  EXPECT_EQ(read_pnm(dir.path() / "a.ppm"), im);
}

}  // namespace
}  // namespace r2va
