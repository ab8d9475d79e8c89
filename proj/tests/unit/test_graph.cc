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

#include "r2va/graph.h"

#include <gtest/gtest.h>

#include <cmath>

#include "test_support.h"

namespace r2va::nn {
namespace {

using r2va::testing::random_graph;
using r2va::testing::random_tensor;
using r2va::testing::small_vgg_options;

LayerGraph single_conv(std::size_t in_ch, std::size_t out_ch, std::size_t k,
                       std::size_t stride, std::size_t pad, std::size_t h,
                       std::size_t w, std::uint64_t seed) {
  LayerGraph g;
  g.input_shape = {in_ch, h, w};
  const std::size_t oh = (h + 2 * pad - k) / stride + 1;
  const std::size_t ow = (w + 2 * pad - k) / stride + 1;
  g.num_classes = out_ch * oh * ow;
  g.layers = {LayerSpec::conv2d("c", in_ch, out_ch, k, stride, pad),
              LayerSpec::flatten("f"), LayerSpec::softmax_xent_head("h")};
  g.params["c.weight"] = random_tensor({out_ch, in_ch, k, k}, seed);
  g.params["c.bias"] = random_tensor({out_ch}, seed + 1);
  return g;
}

TEST(Forward, IdentityDenseReturnsInput) {
  LayerGraph g;
  g.input_shape = {1, 2, 2};
  g.num_classes = 4;
  g.layers = {LayerSpec::flatten("f"), LayerSpec::dense("d", 4, 4),
              LayerSpec::softmax_xent_head("h")};
  Tensor eye({4, 4});
  for (std::size_t i = 0; i < 4; ++i) eye[i * 4 + i] = 1.0;
  g.params["d.weight"] = eye;
  g.params["d.bias"] = Tensor({4});
  const Tensor x = random_tensor({3, 1, 2, 2}, 5);
  const Tensor y = forward(g, x);
  ASSERT_EQ(y.shape(), (Shape{3, 4}));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Forward, ZeroInputConvYieldsBias) {
  LayerGraph g = single_conv(2, 3, 3, 1, 1, 4, 4, 11);
  const Tensor y = forward(g, Tensor({1, 2, 4, 4}));
  const Tensor& b = g.params["c.bias"];
  for (std::size_t oc = 0; oc < 3; ++oc) {
    for (std::size_t p = 0; p < 16; ++p) EXPECT_EQ(y[oc * 16 + p], b[oc]);
  }
}

// Direct convolution oracle.
Tensor conv_oracle(const Tensor& x, const Tensor& w, const Tensor& b,
                   std::size_t stride, std::size_t pad) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t oc = w.dim(0), k = w.dim(2);
  const std::size_t oh = (h + 2 * pad - k) / stride + 1;
  const std::size_t ow = (wd + 2 * pad - k) / stride + 1;
  Tensor out({n, oc, oh, ow});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t o = 0; o < oc; ++o)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx) {
          double acc = b[o];
          for (std::size_t ci = 0; ci < c; ++ci)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long iy = static_cast<long>(y * stride + ky) - static_cast<long>(pad);
                const long ix = static_cast<long>(xx * stride + kx) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) ||
                    ix >= static_cast<long>(wd))
                  continue;
                acc += x.at(s, ci, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) *
                       w.at(o, ci, ky, kx);
              }
          out.at(s, o, y, xx) = acc;
        }
  return out;
}

TEST(Forward, ConvMatchesNestedLoopOracle) {
  LayerGraph g = single_conv(1, 1, 3, 1, 0, 5, 5, 21);
  const Tensor x = random_tensor({1, 1, 5, 5}, 22);
  const Tensor y = forward(g, x);
  const Tensor ref = conv_oracle(x, g.params["c.weight"], g.params["c.bias"], 1, 0);
  ASSERT_EQ(y.size(), ref.size());
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-6);
}

TEST(Forward, ConvWithStridePaddingAndChannelsMatchesOracle) {
  struct Case { std::size_t ic, oc, k, s, p, h, w; };
  const Case cases[] = {{3, 4, 3, 1, 1, 7, 6}, {2, 5, 3, 2, 1, 9, 9},
                        {4, 2, 2, 2, 0, 6, 8}, {1, 3, 5, 1, 2, 5, 5}};
  std::uint64_t seed = 100;
  for (const Case& c : cases) {
    LayerGraph g = single_conv(c.ic, c.oc, c.k, c.s, c.p, c.h, c.w, seed);
    const Tensor x = random_tensor({2, c.ic, c.h, c.w}, seed + 7);
    const Tensor y = forward(g, x);
    const Tensor ref = conv_oracle(x, g.params["c.weight"], g.params["c.bias"], c.s, c.p);
    ASSERT_EQ(y.size(), ref.size());
    for (std::size_t i = 0; i < y.size(); ++i) ASSERT_NEAR(y[i], ref[i], 1e-9);
    seed += 10;
  }
}

TEST(Forward, AvgPoolAveragesWindows) {
  LayerGraph g;
  g.input_shape = {1, 4, 4};
  g.num_classes = 4;
  g.layers = {LayerSpec::avgpool2d("p", 2), LayerSpec::flatten("f"),
              LayerSpec::softmax_xent_head("h")};
  Tensor x({1, 1, 4, 4});
  for (std::size_t i = 0; i < 16; ++i) x[i] = static_cast<double>(i);
  const Tensor y = forward(g, x);
  EXPECT_DOUBLE_EQ(y[0], (0 + 1 + 4 + 5) / 4.0);
  EXPECT_DOUBLE_EQ(y[3], (10 + 11 + 14 + 15) / 4.0);
}

TEST(Forward, ReluClampsNegatives) {
  LayerGraph g;
  g.input_shape = {1, 1, 3};
  g.num_classes = 3;
  g.layers = {LayerSpec::relu("r"), LayerSpec::flatten("f"),
              LayerSpec::softmax_xent_head("h")};
  const Tensor y = forward(g, Tensor({1, 1, 1, 3}, std::vector<double>{-2.0, 0.0, 3.5}));
  EXPECT_EQ(y[0], 0.0);
  EXPECT_EQ(y[1], 0.0);
  EXPECT_EQ(y[2], 3.5);
}

TEST(Forward, ShapeMismatchNamesTheLayer) {
  LayerGraph g = random_graph(small_vgg_options(), 3);
  try {
    forward(g, Tensor({1, 3, 9, 8}));
    FAIL() << "expected a shape error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("layer 0"), std::string::npos) << e.what();
  }
  g.params["fc1.weight"] = Tensor({2, 2});
  try {
    validate(g);
    FAIL() << "expected a parameter shape error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("fc1"), std::string::npos) << e.what();
  }
}

TEST(Forward, KernelLargerThanInputRejected) {
  LayerGraph g;
  g.input_shape = {1, 2, 2};
  g.num_classes = 1;
  g.layers = {LayerSpec::conv2d("c", 1, 1, 3), LayerSpec::flatten("f"),
              LayerSpec::softmax_xent_head("h")};
  g.params["c.weight"] = Tensor({1, 1, 3, 3});
  g.params["c.bias"] = Tensor({1});
  EXPECT_THROW(validate(g), std::invalid_argument);
}

TEST(Forward, ShapeAlgebraMatchesForwardOnRandomGraphs) {
  Rng rng(77);
  for (int trial = 0; trial < 25; ++trial) {
    MiniVggOptions o;
    o.num_classes = static_cast<std::size_t>(rng.uniform_int(2, 7));
    o.conv_channels.clear();
    const int blocks = static_cast<int>(rng.uniform_int(1, 2));
    for (int b = 0; b < blocks; ++b)
      o.conv_channels.push_back(static_cast<std::size_t>(rng.uniform_int(1, 4)));
    o.hidden_units = static_cast<std::size_t>(rng.uniform_int(1, 6));
    o.stem_pool = static_cast<std::size_t>(rng.uniform_int(1, 2));
    // Every pooling stage must tile its input.
    const std::size_t hw = o.stem_pool * (std::size_t{1} << blocks) *
                           static_cast<std::size_t>(rng.uniform_int(1, 4));
    o.input_shape = {static_cast<std::size_t>(rng.uniform_int(1, 3)), hw, hw};
    LayerGraph g = make_mini_vgg(o);
    initialize_parameters(g, static_cast<std::uint64_t>(trial));
    const std::vector<Shape> shapes = propagate_shapes(g);
    ASSERT_EQ(shapes.back(), (Shape{o.num_classes}));
    const ForwardTrace tr = forward_trace(
        g, random_tensor({2, o.input_shape[0], hw, hw}, static_cast<std::uint64_t>(trial)));
    ASSERT_EQ(tr.activations.size(), g.layers.size() + 1);
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      Shape expect = {2};
      expect.insert(expect.end(), shapes[i].begin(), shapes[i].end());
      ASSERT_EQ(tr.activations[i + 1].shape(), expect) << "layer " << i;
    }
  }
}

TEST(Forward, LinearGraphIsAdditiveAndHomogeneous) {
  LayerGraph g = single_conv(2, 2, 3, 1, 1, 5, 5, 31);
  g.params["c.bias"].fill(0.0);
  const Tensor a = random_tensor({1, 2, 5, 5}, 32);
  const Tensor b = random_tensor({1, 2, 5, 5}, 33);
  Tensor sum = a;
  Tensor scaled = a;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum[i] += b[i];
    scaled[i] *= 2.5;
  }
  const Tensor fa = forward(g, a), fb = forward(g, b);
  const Tensor fs = forward(g, sum), fk = forward(g, scaled);
  for (std::size_t i = 0; i < fa.size(); ++i) {
    EXPECT_NEAR(fs[i], fa[i] + fb[i], 1e-12);
    EXPECT_NEAR(fk[i], 2.5 * fa[i], 1e-12);
  }
}

TEST(Forward, IsDeterministic) {
  const LayerGraph g1 = random_graph(small_vgg_options(), 9);
  const LayerGraph g2 = random_graph(small_vgg_options(), 9);
  EXPECT_EQ(g1, g2);
  const Tensor x = random_tensor({3, 3, 8, 8}, 10, 0.0, 1.0);
  EXPECT_EQ(forward(g1, x), forward(g2, x));
}

TEST(Backward, UniformLogitsGiveLogK) {
  LayerGraph g = r2va::testing::linear_graph({1, 2, 2}, 6, 1);
  g.params["fc.weight"].fill(0.0);
  g.params["fc.bias"].fill(0.25);
  const std::vector<int> labels = {0, 3, 5};
  const BackwardResult r = backward(g, random_tensor({3, 1, 2, 2}, 2), labels);
  EXPECT_NEAR(r.loss, std::log(6.0), 1e-12);
  EXPECT_NEAR(r.loss, 1.791759, 1e-6);
}

TEST(Backward, IdenticalClassRowsGiveIdenticalGradientRows) {
  LayerGraph g = r2va::testing::linear_graph({1, 2, 2}, 3, 4);
  Tensor& w = g.params["fc.weight"];
  for (std::size_t c = 1; c < 3; ++c)
    for (std::size_t j = 0; j < 4; ++j) w[c * 4 + j] = w[j];
  g.params["fc.bias"].fill(0.1);
  const Tensor x = random_tensor({4, 1, 2, 2}, 5);
  const std::vector<int> balanced = {0, 1, 2};
  const BackwardResult r = backward(g, x.rows(0, 3), balanced);
  const Tensor& gw = r.grads.at("fc.weight");
  // With identical logits every softmax is uniform; the gradient row for
  // class c is mean_i (1/3 - [y_i == c]) x_i.
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t j = 0; j < 4; ++j) {
      double expect = 0.0;
      for (std::size_t i = 0; i < 3; ++i)
        expect += (1.0 / 3.0 - (static_cast<std::size_t>(balanced[i]) == c ? 1.0 : 0.0)) *
                  x[i * 4 + j];
      EXPECT_NEAR(gw[c * 4 + j], expect / 3.0, 1e-12);
    }
  }
  // Same labels everywhere: rows of the non-label classes coincide.
  const std::vector<int> same = {2, 2, 2};
  const BackwardResult r2 = backward(g, x.rows(0, 3), same);
  const Tensor& g2 = r2.grads.at("fc.weight");
  for (std::size_t j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(g2[j], g2[4 + j]);
}

TEST(Backward, LabelOutOfRangeRejected) {
  const LayerGraph g = random_graph(small_vgg_options(), 1);
  const Tensor x = random_tensor({2, 3, 8, 8}, 2);
  const std::vector<int> bad = {0, 4};
  EXPECT_THROW(backward(g, x, bad), std::invalid_argument);
  const std::vector<int> neg = {-1, 0};
  EXPECT_THROW(backward(g, x, neg), std::invalid_argument);
}

TEST(Backward, GradientsCoverEveryParameter) {
  const LayerGraph g = random_graph(small_vgg_options(), 3);
  const std::vector<int> labels = {1, 2};
  const BackwardResult r = backward(g, random_tensor({2, 3, 8, 8}, 4), labels);
  for (const auto& [name, t] : g.params) {
    ASSERT_TRUE(r.grads.count(name)) << name;
    EXPECT_EQ(r.grads.at(name).shape(), t.shape());
  }
}

TEST(Backward, FrozenParametersGetZeroGradients) {
  const LayerGraph g = random_graph(small_vgg_options(), 3);
  const std::vector<int> labels = {1, 2};
  const Tensor x = random_tensor({2, 3, 8, 8}, 4);
  std::set<std::string> frozen;
  for (const auto& [name, t] : g.params)
    if (g.is_conv_param(name)) frozen.insert(name);
  const BackwardResult full = backward(g, x, labels);
  const BackwardResult part = backward(g, x, labels, Objective::kSoftmaxCrossEntropy, &frozen);
  EXPECT_EQ(full.loss, part.loss);
  for (const auto& [name, t] : g.params) {
    if (frozen.count(name)) {
      for (double v : part.grads.at(name).values()) EXPECT_EQ(v, 0.0);
    } else {
      EXPECT_EQ(part.grads.at(name), full.grads.at(name)) << name;
    }
  }
}

TEST(Backward, SmallStepDecreasesLoss) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    LayerGraph g = random_graph(small_vgg_options(), seed);
    const Tensor x = random_tensor({4, 3, 8, 8}, seed + 50, 0.0, 1.0);
    const std::vector<int> labels = {0, 1, 2, 3};
    const BackwardResult r = backward(g, x, labels);
    for (auto& [name, t] : g.params) {
      const Tensor& gr = r.grads.at(name);
      for (std::size_t i = 0; i < t.size(); ++i) t[i] -= 1e-4 * gr[i];
    }
    EXPECT_LT(loss(g, x, labels), r.loss) << "seed " << seed;
  }
}

TEST(MiniVgg, ParameterNamesAreUniqueAndOrdered) {
  const LayerGraph g = make_mini_vgg({});
  const std::vector<std::string> order = g.param_order();
  EXPECT_EQ(order.size(), g.params.size());
  std::set<std::string> seen(order.begin(), order.end());
  EXPECT_EQ(seen.size(), order.size());
  EXPECT_NO_THROW(validate(g));
}

TEST(MiniVgg, GlorotInitWithinBoundsAndFloatRounded) {
  LayerGraph g = make_mini_vgg(small_vgg_options());
  initialize_parameters(g, 42);
  for (const auto& [name, t] : g.params) {
    if (name.ends_with(".bias")) {
      for (double v : t.values()) EXPECT_EQ(v, 0.0);
      continue;
    }
    const Shape& s = t.shape();
    double fan_in, fan_out;
    if (s.size() == 4) {
      fan_in = static_cast<double>(s[1] * s[2] * s[3]);
      fan_out = static_cast<double>(s[0] * s[2] * s[3]);
    } else {
      fan_in = static_cast<double>(s[1]);
      fan_out = static_cast<double>(s[0]);
    }
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (double v : t.values()) {
      EXPECT_LE(std::abs(v), bound * (1 + 1e-6)) << name;
      EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
    }
  }
}

}  // namespace
}  // namespace r2va::nn
