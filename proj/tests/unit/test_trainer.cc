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

#include "r2va/trainer.h"

#include <gtest/gtest.h>

#include <cmath>

#include "r2va/weights_io.h"
#include "test_support.h"

namespace r2va::train {
namespace {

DatasetManifest labelled(std::size_t per_class, std::size_t classes) {
  DatasetManifest m;
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t i = 0; i < per_class; ++i) {
      LabeledImage item;
      item.relative_path = std::to_string(c) + "_" + std::to_string(i);
      item.label = static_cast<int>(c);
      item.image = Image(4, 4, 3, static_cast<std::uint8_t>(i));
      m.items.push_back(std::move(item));
    }
  return m;
}

// Two classes of solid-colour images whose colours come from well separated
// Gaussian blobs.
DatasetManifest blob_dataset(std::size_t per_class, int size, std::uint64_t seed) {
  Rng rng(seed);
  DatasetManifest m;
  const double centres[2][3] = {{70, 90, 60}, {180, 160, 200}};
  for (int c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < per_class; ++i) {
      LabeledImage item;
      item.relative_path = "blob" + std::to_string(c) + "_" + std::to_string(i);
      item.label = c;
      item.image = Image(size, size, 3);
      std::uint8_t rgb[3];
      for (int ch = 0; ch < 3; ++ch) {
        // Box-Muller, sigma 12.
        const double u1 = 1.0 - rng.uniform(), u2 = rng.uniform();
        const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2 * M_PI * u2);
        rgb[ch] = static_cast<std::uint8_t>(std::clamp(centres[c][ch] + 12.0 * z, 0.0, 255.0));
      }
      for (std::size_t p = 0; p < item.image.pixel_count(); ++p)
        for (int ch = 0; ch < 3; ++ch) item.image.pixels[p * 3 + ch] = rgb[ch];
      m.items.push_back(std::move(item));
    }
  return m;
}

TEST(TrainConfig, DefaultsAndValidation) {
  const TrainConfig c;
  EXPECT_EQ(c.learning_rate, 0.01);
  EXPECT_EQ(c.batch_size, 16u);
  EXPECT_EQ(c.epochs, 20u);
  EXPECT_EQ(c.val_fraction, 0.3);
  EXPECT_NO_THROW(c.validate());
  TrainConfig bad = c;
  bad.learning_rate = -1;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = c;
  bad.val_fraction = 1.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = c;
  bad.batch_size = 0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Split, SeventyThirtyPerClass) {
  const SplitResult s = split(labelled(100, 3), 0.3, 1);
  EXPECT_EQ(s.train.size(), 210u);
  EXPECT_EQ(s.val.size(), 90u);
  for (const auto& [c, n] : s.val.class_histogram()) EXPECT_EQ(n, 30u) << c;
}

TEST(Split, FloorOnValidation) {
  const SplitResult s = split(labelled(10, 1), 0.3, 1);
  EXPECT_EQ(s.train.size(), 7u);
  EXPECT_EQ(s.val.size(), 3u);
  const SplitResult t = split(labelled(5, 2), 0.3, 1);
  EXPECT_EQ(t.val.size(), 2u);
}

TEST(Split, DisjointExhaustiveDeterministic) {
  const DatasetManifest d = labelled(20, 4);
  const SplitResult a = split(d, 0.25, 9), b = split(d, 0.25, 9);
  std::set<std::string> seen;
  for (const auto& it : a.train.items) seen.insert(it.relative_path);
  for (const auto& it : a.val.items) EXPECT_TRUE(seen.insert(it.relative_path).second);
  EXPECT_EQ(seen.size(), d.size());
  ASSERT_EQ(a.val.size(), b.val.size());
  for (std::size_t i = 0; i < a.val.size(); ++i)
    EXPECT_EQ(a.val.items[i].relative_path, b.val.items[i].relative_path);
  const SplitResult c = split(d, 0.25, 10);
  bool differs = false;
  for (std::size_t i = 0; i < a.val.size(); ++i)
    differs |= a.val.items[i].relative_path != c.val.items[i].relative_path;
  EXPECT_TRUE(differs);
}

TEST(Split, RejectsSingletonClassAndEmpty) {
  DatasetManifest d = labelled(3, 2);
  d.items.pop_back();
  d.items.pop_back();
  EXPECT_THROW(split(d, 0.3, 1), std::invalid_argument);
  EXPECT_THROW(split(DatasetManifest{}, 0.3, 1), std::invalid_argument);
}

TEST(Report, AccuracyMatchesConfusionTrace) {
  const std::vector<int> y = {0, 0, 1, 1, 2, 2};
  const std::vector<int> p = {0, 1, 1, 1, 0, 2};
  const EvalReport r = make_report(y, p, 3);
  EXPECT_EQ(r.n_samples, 6u);
  std::size_t total = 0, trace = 0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      total += r.confusion[i][j];
      if (i == j) trace += r.confusion[i][j];
    }
  EXPECT_EQ(total, 6u);
  EXPECT_DOUBLE_EQ(r.accuracy, static_cast<double>(trace) / 6.0);
  EXPECT_DOUBLE_EQ(r.per_class_accuracy.at(0), 0.5);
  EXPECT_DOUBLE_EQ(r.per_class_accuracy.at(1), 1.0);
  EXPECT_EQ(r.confusion[2][0], 1u);
}

TEST(Report, ArgmaxTiesGoLow) {
  const std::vector<double> v = {1.0, 3.0, 3.0};
  EXPECT_EQ(argmax(v), 1);
  const std::vector<double> flat = {2.0, 2.0, 2.0};
  EXPECT_EQ(argmax(flat), 0);
}

TEST(Evaluate, ConstantLogitModelScoresOneOverK) {
  nn::LayerGraph g = r2va::testing::linear_graph({3, 4, 4}, 6, 1);
  g.params["fc.weight"].fill(0.0);
  g.params["fc.bias"].fill(0.5);
  const EvalReport r = evaluate(g, labelled(5, 6));
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0 / 6.0);
  EXPECT_EQ(r.confusion[0][0], 5u);
  for (std::size_t c = 1; c < 6; ++c) EXPECT_EQ(r.confusion[c][0], 5u);
}

TEST(Evaluate, LookupModelIsPerfect) {
  // Class c images have value c in pixel 0, red channel, so a one-hot
  // dense layer reading that coordinate acts as an oracle lookup.
  DatasetManifest m = labelled(3, 4);
  for (auto& it : m.items) it.image.pixels[0] = static_cast<std::uint8_t>(60 * it.label);
  nn::LayerGraph g = r2va::testing::linear_graph({3, 4, 4}, 4, 1);
  nn::Tensor& w = g.params["fc.weight"];
  nn::Tensor& b = g.params["fc.bias"];
  w.fill(0.0);
  // logit_c = -(v - c*60/255)^2 expanded is not linear; use the tent
  // logit_c = 2 c t v - c^2 t^2 with t = 60/255, maximized at c = v / t.
  const double t = 60.0 / 255.0;
  for (std::size_t c = 0; c < 4; ++c) {
    w[c * 48] = 2.0 * static_cast<double>(c) * t;
    b[c] = -static_cast<double>(c * c) * t * t;
  }
  EXPECT_DOUBLE_EQ(evaluate(g, m).accuracy, 1.0);
}

TEST(Fit, ZeroLearningRateLeavesParametersBitIdentical) {
  const nn::LayerGraph g = r2va::testing::random_graph(r2va::testing::small_vgg_options(4), 3);
  DatasetManifest m = labelled(4, 4);
  TrainConfig c;
  c.learning_rate = 0.0;
  c.epochs = 3;
  const FitResult r = fit(g, m, c);
  EXPECT_EQ(nn::serialize_weights(r.graph), nn::serialize_weights(g));
  EXPECT_EQ(r.history.size(), 3u);
}

TEST(Fit, RejectsEmptyTrainingSetAndUnknownFrozen) {
  const nn::LayerGraph g = r2va::testing::random_graph(r2va::testing::small_vgg_options(4), 3);
  EXPECT_THROW(fit(g, DatasetManifest{}, TrainConfig{}), std::invalid_argument);
  TrainConfig c;
  c.frozen_params = {"nope.weight"};
  EXPECT_THROW(fit(g, labelled(2, 2), c), std::invalid_argument);
}

TEST(Fit, UnreadableImageAbortsWithPath) {
  const nn::LayerGraph g = r2va::testing::random_graph(r2va::testing::small_vgg_options(4), 3);
  DatasetManifest m = labelled(1, 1);
  m.root = "/nonexistent";
  m.items[0].image = Image();
  m.items[0].relative_path = "missing_0.ppm";
  try {
    fit(g, m, TrainConfig{});
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("missing_0.ppm"), std::string::npos);
  }
}

TEST(Fit, SeedDeterminismAndHistoryFormat) {
  const nn::LayerGraph g = r2va::testing::random_graph(r2va::testing::small_vgg_options(8), 3);
  const DatasetManifest m = blob_dataset(6, 8, 4);
  TrainConfig c;
  c.epochs = 2;
  c.seed = 77;
  const FitResult a = fit(g, m, c), b = fit(g, m, c);
  EXPECT_EQ(nn::serialize_weights(a.graph), nn::serialize_weights(b.graph));
  const std::string h = format_history(a.history);
  EXPECT_EQ(std::count(h.begin(), h.end(), '\n'), 2);
  EXPECT_EQ(h.rfind("1,", 0), 0u);
}

TEST(Fit, GaussianBlobsReachPerfectTrainAccuracy) {
  nn::LayerGraph g = nn::make_mini_vgg({});
  nn::initialize_parameters(g, 5);
  const DatasetManifest m = blob_dataset(160, 64, 6);
  TrainConfig c;  // lr 0.01, batch 16, 20 epochs
  const FitResult r = fit(g, m, c);
  ASSERT_EQ(r.history.size(), 20u);
  EXPECT_DOUBLE_EQ(r.history.back().train_accuracy, 1.0) << format_history(r.history);
  EXPECT_DOUBLE_EQ(evaluate(r.graph, m).accuracy, 1.0);
}

TEST(Transfer, FreezesConvAndKeepsBytes) {
  const nn::LayerGraph g = r2va::testing::random_graph(r2va::testing::small_vgg_options(8), 8);
  const DatasetManifest m = blob_dataset(4, 8, 9);
  TrainConfig c;
  c.epochs = 2;
  c.learning_rate = 0.05;
  const nn::LayerGraph t = transfer_learn(g, m, c);
  bool head_changed = false;
  for (const auto& [name, p] : g.params) {
    const auto before = nn::serialize_tensor_record(name, p);
    const auto after = nn::serialize_tensor_record(name, t.params.at(name));
    if (g.is_conv_param(name)) {
      EXPECT_EQ(before, after) << name;
    } else {
      head_changed |= before != after;
    }
  }
  EXPECT_TRUE(head_changed);
}

TEST(Transfer, FreezingEverythingIsIdentity) {
  const nn::LayerGraph g = r2va::testing::random_graph(r2va::testing::small_vgg_options(8), 8);
  TrainConfig c;
  for (const auto& [name, p] : g.params) c.frozen_params.insert(name);
  EXPECT_EQ(transfer_learn(g, blob_dataset(3, 8, 1), c), g);
}

TEST(Transfer, ErrorsOnUnknownFrozenMissingClassOrUnfrozenConv) {
  const nn::LayerGraph g = r2va::testing::random_graph(r2va::testing::small_vgg_options(8), 8);
  const DatasetManifest m = blob_dataset(3, 8, 1);
  TrainConfig c;
  c.frozen_params = {"zzz"};
  EXPECT_THROW(transfer_learn(g, m, c), std::invalid_argument);
  c.frozen_params = {"fc1.weight"};
  EXPECT_THROW(transfer_learn(g, m, c), std::invalid_argument);
  const std::vector<int> need = {0, 1, 2};
  EXPECT_THROW(transfer_learn(g, m, TrainConfig{}, need), std::invalid_argument);
  EXPECT_THROW(transfer_learn(g, DatasetManifest{}, TrainConfig{}), std::invalid_argument);
}

TEST(TakePerClass, TakesFirstInOrder) {
  const DatasetManifest m = labelled(5, 3);
  const DatasetManifest t = take_per_class(m, 2);
  ASSERT_EQ(t.size(), 6u);
  EXPECT_EQ(t.items[0].relative_path, "0_0");
  EXPECT_EQ(t.items[5].relative_path, "2_1");
}

}  // namespace
}  // namespace r2va::train
