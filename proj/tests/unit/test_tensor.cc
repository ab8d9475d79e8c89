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

#include "r2va/tensor.h"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace r2va::nn {
namespace {

TEST(Tensor, ShapeAndFill) {
  Tensor t({2, 3, 4}, 1.5);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_EQ(t.dim(1), 3u);
  for (double v : t.values()) EXPECT_EQ(v, 1.5);
  EXPECT_EQ(shape_to_string(t.shape()), "(2, 3, 4)");
}

TEST(Tensor, RejectsZeroDimensionAndSizeMismatch) {
  EXPECT_THROW(Tensor({2, 0, 3}), std::invalid_argument);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>(3)), std::invalid_argument);
}

TEST(Tensor, RowMajorAccessor) {
  Tensor t({2, 2, 2, 3});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  EXPECT_EQ(t.at(1, 0, 1, 2), 1 * 12 + 0 * 6 + 1 * 3 + 2);
}

TEST(Tensor, ReshapeKeepsData) {
  Tensor t({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  const Tensor r = t.reshaped({3, 2});
  EXPECT_EQ(r.shape(), (Shape{3, 2}));
  EXPECT_EQ(r[5], 6.0);
  EXPECT_THROW(t.reshaped({4, 2}), std::invalid_argument);
}

TEST(Tensor, RowsSliceAndStack) {
  Tensor t({3, 2}, std::vector<double>{1, 2, 3, 4, 5, 6});
  const Tensor mid = t.rows(1, 2);
  EXPECT_EQ(mid.shape(), (Shape{2, 2}));
  EXPECT_EQ(mid[0], 3.0);
  EXPECT_THROW(t.rows(2, 2), std::out_of_range);

  std::vector<Tensor> items = {Tensor({2}, 1.0), Tensor({2}, 2.0)};
  const Tensor s = stack(items);
  EXPECT_EQ(s.shape(), (Shape{2, 2}));
  EXPECT_EQ(s[3], 2.0);
  items.push_back(Tensor({3}, 0.0));
  EXPECT_THROW(stack(items), std::invalid_argument);
}

TEST(Tensor, AllFinite) {
  Tensor t({2}, 0.0);
  EXPECT_TRUE(t.all_finite());
  t[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(t.all_finite());
}

}  // namespace
}  // namespace r2va::nn
