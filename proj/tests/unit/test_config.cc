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

#include "r2va/config.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>

#include "test_support.h"

namespace r2va::config {
namespace {

using pipeline::PipelineConfig;

TEST(Config, EmptyTextGivesDefaults) {
  EXPECT_EQ(parse_config(""), PipelineConfig{});
  EXPECT_EQ(parse_config("# only a comment\n\n   \n"), PipelineConfig{});
}

TEST(Config, LibraryDefaultsWhereNotOverridden) {
  const PipelineConfig c;
  EXPECT_EQ(c.transfer_images_per_class, 20u);
  EXPECT_DOUBLE_EQ(c.accuracy_threshold, 0.70);
  EXPECT_EQ(c.train.batch_size, 16u);
  EXPECT_EQ(c.max_curation_iterations, 2u);
}

TEST(Config, SetsScalarKeys) {
  const PipelineConfig c = parse_config(
      "train.learning_rate = 0.01\n"
      "  train.epochs=20  \n"
      "seed = 42\n"
      "pipeline.halt_on_weak_model = false\n");
  EXPECT_DOUBLE_EQ(c.train.learning_rate, 0.01);
  EXPECT_EQ(c.train.epochs, 20u);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_FALSE(c.halt_on_weak_model);
}

TEST(Config, SetsListAndSceneKeys) {
  const PipelineConfig c = parse_config(
      "model.conv_channels = 8, 16\n"
      "venv.palette = skin_tone\n"
      "venv.positions = center,left_offset\n"
      "venv.classes = fist,palm\n"
      "pipeline.curation_schedule = distances+=far | handedness+=left\n");
  EXPECT_EQ(c.model.conv_channels, (std::vector<std::size_t>{8, 16}));
  EXPECT_EQ(c.venv.palette, scene::Palette::kSkinTone);
  EXPECT_EQ(c.venv.positions,
            (std::set<scene::Position>{scene::Position::kCenter, scene::Position::kLeftOffset}));
  EXPECT_EQ(c.venv_classes, (std::vector<GestureClass>{GestureClass::kFist, GestureClass::kPalm}));
  ASSERT_EQ(c.curation_schedule.size(), 2u);
  EXPECT_EQ(c.curation_schedule[1], scene::parse_delta("handedness+=left"));
}

TEST(Config, UnknownKeyReportsLine) {
  try {
    parse_config("seed = 1\n# c\ntrain.momentum = 0.9\n", "a.cfg");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_EQ(e.key(), "train.momentum");
    EXPECT_EQ(e.source(), "a.cfg");
    EXPECT_NE(std::string(e.what()).find("a.cfg:3"), std::string::npos);
  }
}

TEST(Config, RejectsMalformedInput) {
  EXPECT_THROW(parse_config("seed 1\n"), ConfigError);
  EXPECT_THROW(parse_config("= 1\n"), ConfigError);
  EXPECT_THROW(parse_config("seed = 1\nseed = 2\n"), ConfigError);
  EXPECT_THROW(parse_config("train.epochs = -1\n"), ConfigError);
  EXPECT_THROW(parse_config("train.epochs = 0\n"), ConfigError);
  EXPECT_THROW(parse_config("train.learning_rate = abc\n"), ConfigError);
  EXPECT_THROW(parse_config("train.learning_rate = nan\n"), ConfigError);
  EXPECT_THROW(parse_config("train.shuffle = yes\n"), ConfigError);
  EXPECT_THROW(parse_config("pipeline.accuracy_threshold = 1.5\n"), ConfigError);
  EXPECT_THROW(parse_config("venv.palette = gold\n"), ConfigError);
  EXPECT_THROW(parse_config("venv.classes = fist,fist\n"), ConfigError);
  EXPECT_THROW(parse_config("pipeline.curation_schedule = colour=red\n"), ConfigError);
}

TEST(Config, WholeConfigValidation) {
  // Each value is fine alone; together they are inconsistent.
  EXPECT_THROW(parse_config("renv.classes = fist,palm\nvenv.classes = ok\n"), ConfigError);
  EXPECT_THROW(parse_config("pipeline.curation_schedule = \n"), ConfigError);
  EXPECT_NO_THROW(parse_config(
      "pipeline.curation_schedule = \npipeline.max_curation_iterations = 0\n"));
  EXPECT_THROW(parse_config("pipeline.transfer_images_per_class = 31\n"), ConfigError);
  EXPECT_THROW(parse_config("venv.image_size = 48x48\n"), ConfigError);
}

TEST(Config, RoundTrip) {
  PipelineConfig c;
  c.seed = 987654321;
  c.train.learning_rate = 0.123456789012345;
  c.train.val_fraction = 0.1 + 0.2;
  c.augment.shear_deg = 1e-7;
  c.venv.illumination_min = 0.3;
  c.venv.handedness = {scene::Handedness::kLeft, scene::Handedness::kRight};
  c.venv.include_body = false;
  c.renv.background_range = {{1, 2, 3}, {4, 5, 6}};
  c.model.conv_channels = {5, 7, 9};
  c.curation_schedule = {scene::parse_delta("palette=custom; custom_palette=10-20,10-20,10-20")};
  c.max_curation_iterations = 1;
  c.diagnose.top_k = 0;
  const std::string text = serialize_config(c);
  EXPECT_EQ(parse_config(text), c) << text;
  EXPECT_EQ(serialize_config(parse_config(text)), text);
}

TEST(Config, SerializedFormListsEveryKey) {
  const std::string text = serialize_config(PipelineConfig{});
  for (const std::string& k : config_keys()) {
    EXPECT_NE(text.find("\n" + k + " = "), std::string::npos) << k;
  }
  std::vector<std::string> keys(config_keys().begin(), config_keys().end());
  std::sort(keys.begin(), keys.end());
  EXPECT_EQ(std::adjacent_find(keys.begin(), keys.end()), keys.end());
}

TEST(Config, GetAndSetValue) {
  PipelineConfig c;
  for (const std::string& k : config_keys()) {
    const std::string v = get_value(c, k);
    PipelineConfig d;
    set_value(d, k, v);
    EXPECT_EQ(d, c) << k << " = " << v;
  }
  EXPECT_THROW(get_value(c, "nope"), ConfigError);
}

TEST(Config, OverrideAssignment) {
  PipelineConfig c;
  apply_override(c, "train.epochs=3");
  apply_override(c, " venv.distances = near,far ");
  EXPECT_EQ(c.train.epochs, 3u);
  EXPECT_EQ(c.venv.distances.size(), 2u);
  EXPECT_THROW(apply_override(c, "train.epochs"), ConfigError);
  EXPECT_THROW(apply_override(c, "bogus=1"), ConfigError);
}

TEST(Config, ReadsFile) {
  r2va::testing::TempDir dir("config");
  const auto path = dir.path() / "x.cfg";
  std::ofstream(path) << "train.batch_size = 8\n";
  EXPECT_EQ(read_config_file(path).train.batch_size, 8u);
  EXPECT_THROW(read_config_file(dir.path() / "missing.cfg"), std::exception);
}

}  // namespace
}  // namespace r2va::config
