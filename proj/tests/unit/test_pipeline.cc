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

#include "r2va/pipeline.h"

#include <gtest/gtest.h>

#include <fstream>

#include "json.hpp"
#include "r2va/config.h"
#include "r2va/fs_util.h"
#include "test_support.h"

namespace r2va::pipeline {
namespace {

namespace fs = std::filesystem;

train::EvalReport report_with(double accuracy) {
  train::EvalReport r;
  r.accuracy = accuracy;
  return r;
}

TEST(Decide, Branches) {
  EXPECT_EQ(decide(report_with(0.75), 0.70, 2), Branch::kDeploy);
  EXPECT_EQ(decide(report_with(0.70), 0.70, 0), Branch::kDeploy);
  EXPECT_EQ(decide(report_with(0.09), 0.70, 2), Branch::kCurate);
  EXPECT_EQ(decide(report_with(0.17), 0.70, 0), Branch::kTransfer);
  EXPECT_EQ(decide(report_with(0.0), 0.0, 0), Branch::kDeploy);
  EXPECT_EQ(branch_name(Branch::kCurate), "curate");
}

PipelineConfig tiny_config() {
  PipelineConfig c;
  c.seed = 11;
  config::set_value(c, "renv.image_size", "32x32");
  config::set_value(c, "venv.image_size", "32x32");
  c.model.conv_channels = {4};
  c.model.hidden_units = 8;
  c.model.stem_pool = 4;
  c.train.epochs = 2;
  c.renv_images_per_class = 6;
  c.venv_images_per_class = 4;
  c.transfer_images_per_class = 2;
  c.transfer_epochs = 2;
  c.halt_on_weak_model = false;
  c.diagnose = {.samples = 3, .baselines = 2, .grid = 4, .top_k = 2, .heatmaps = 2};
  return c;
}

TEST(PipelineConfig, ValidateRejectsInconsistentSettings) {
  EXPECT_NO_THROW(tiny_config().validate());
  PipelineConfig c = tiny_config();
  c.curation_schedule.clear();
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.max_curation_iterations = 0;
  EXPECT_NO_THROW(c.validate());
  c = tiny_config();
  c.transfer_images_per_class = 3;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = tiny_config();
  c.venv_classes.push_back(GestureClass::kPointer);
  c.renv_classes = {GestureClass::kFist};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = tiny_config();
  c.diagnose.grid = 33;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Pipeline, ZeroThresholdDeploysImmediately) {
  PipelineConfig c = tiny_config();
  c.accuracy_threshold = 0.0;
  const RunResult r = run(c);
  EXPECT_EQ(r.report.outcome, "deployed_model0");
  ASSERT_EQ(r.report.decision_trace.size(), 1u);
  EXPECT_EQ(r.report.decision_trace[0].branch, "deploy");
  EXPECT_EQ(r.report.curation_iterations, 0u);
  EXPECT_FALSE(r.model1.has_value());
  ASSERT_NE(r.report.stage("venv_0"), nullptr);
  EXPECT_FALSE(r.report.stage("venv_0")->attribution.has_value());
}

TEST(Pipeline, NoBudgetGoesStraightToTransfer) {
  PipelineConfig c = tiny_config();
  c.accuracy_threshold = 1.0;
  c.max_curation_iterations = 0;
  const RunResult r = run(c);
  ASSERT_EQ(r.report.decision_trace.size(), 1u);
  EXPECT_EQ(r.report.decision_trace[0].branch, "transfer");
  EXPECT_EQ(r.report.outcome, "model1");
  ASSERT_TRUE(r.model1.has_value());
  ASSERT_NE(r.report.stage("model1"), nullptr);
  EXPECT_EQ(r.report.model1_history.size(), 2u);
}

TEST(Pipeline, CuratesThenTransfersAndWritesOutputs) {
  PipelineConfig c = tiny_config();
  c.accuracy_threshold = 1.0;
  r2va::testing::TempDir dir("pipeline");
  const RunResult r = run(c, &dir.path());
  const PipelineReport& rep = r.report;
  ASSERT_EQ(rep.decision_trace.size(), 3u);
  EXPECT_EQ(rep.decision_trace[0].branch, "curate");
  EXPECT_EQ(rep.decision_trace[0].iterations_left, 2u);
  EXPECT_EQ(rep.decision_trace[1].branch, "curate");
  EXPECT_EQ(rep.decision_trace[2].branch, "transfer");
  EXPECT_EQ(rep.decision_trace[2].iterations_left, 0u);
  EXPECT_EQ(rep.curation_iterations, 2u);
  EXPECT_EQ(rep.outcome, "model1");
  EXPECT_EQ(rep.final_model_path, "model1.r2va");
  EXPECT_EQ(rep.stage("venv_1")->dataset_id, "venv_1[palette=skin_tone]");

  for (const char* stage : {"venv_0", "venv_1", "venv_2"}) {
    const StageRecord* s = rep.stage(stage);
    ASSERT_NE(s, nullptr) << stage;
    ASSERT_TRUE(s->attribution.has_value()) << stage;
    EXPECT_EQ(s->attribution->samples, 3u);
    EXPECT_LE(s->attribution->max_abs_residual, 1e-4);
    ASSERT_EQ(s->heatmaps.size(), 2u);
    for (const auto& h : s->heatmaps) EXPECT_TRUE(fs::exists(dir.path() / h)) << h;
  }

  for (const char* f : {"config.cfg", "model0.r2va", "model0_history.csv", "model1.r2va",
                        "model1_history.csv", "report.json"}) {
    EXPECT_TRUE(fs::exists(dir.path() / f)) << f;
  }
  EXPECT_FALSE(fs::exists(dir.path() / "heatmaps" / "venv_0.tmp"));
  EXPECT_EQ(config::read_config_file(dir.path() / "config.cfg"), c);

  const auto j = nlohmann::json::parse(read_text_file(dir.path() / "report.json"));
  EXPECT_EQ(j["outcome"], "model1");
  EXPECT_EQ(j["decision_trace"].size(), 3u);
  EXPECT_EQ(j["stage_log"].size(), 5u);
  EXPECT_TRUE(j["stage_log"][0]["attribution"].is_null());

  for (const auto& [name, t] : r.model0.params) {
    if (name.rfind("conv", 0) != 0) continue;
    EXPECT_EQ(r.model1->params.at(name), t) << name;
  }
}

TEST(Pipeline, WeakModelHalts) {
  PipelineConfig c = tiny_config();
  c.renv_threshold = 1.0;
  c.halt_on_weak_model = true;
  const RunResult r = run(c);
  EXPECT_EQ(r.report.outcome, "halted");
  ASSERT_EQ(r.report.decision_trace.size(), 1u);
  EXPECT_EQ(r.report.decision_trace[0].branch, "halt");
  EXPECT_EQ(r.report.flags.size(), 1u);
  EXPECT_EQ(r.report.stage_log.size(), 1u);
}

TEST(Pipeline, Deterministic) {
  PipelineConfig c = tiny_config();
  c.accuracy_threshold = 1.0;
  c.max_curation_iterations = 1;
  r2va::testing::TempDir a("det_a"), b("det_b");
  run(c, &a.path());
  run(c, &b.path());
  for (const char* f : {"report.json", "model0.r2va", "model1.r2va"}) {
    EXPECT_EQ(read_text_file(a.path() / f), read_text_file(b.path() / f)) << f;
  }
}

DatasetManifest small_venv(std::size_t per_class, std::uint64_t seed) {
  scene::SceneConfig s = scene::default_venv_config();
  s.height = s.width = 32;
  const std::vector<GestureClass> classes{GestureClass::kFist, GestureClass::kPalm};
  return scene::generate_dataset(classes, s, per_class, seed, "v");
}

TEST(Diagnose, ConstantLogitsAreDegenerate) {
  const DatasetManifest data = small_venv(2, 3);
  nn::LayerGraph g = r2va::testing::linear_graph({3, 32, 32}, kNumGestureClasses, 1);
  g.params["fc.weight"].fill(0.0);
  const Diagnosis dx = diagnose(g, data, data, {.samples = 4, .baselines = 2, .grid = 4}, 5);
  EXPECT_EQ(dx.summary.samples, 4u);
  EXPECT_TRUE(dx.summary.is_degenerate());
  EXPECT_FALSE(dx.summary.in_mask_fraction.has_value());
  for (const auto& pc : dx.summary.per_class) EXPECT_TRUE(pc.top_cells.empty());
}

TEST(Diagnose, FigureTemplateModelAttributesInsideMask) {
  const DatasetManifest data = small_venv(1, 8);
  DatasetManifest one = data;
  one.items.resize(1);
  DatasetManifest pool = data;
  pool.items.erase(pool.items.begin());
  const Image& mask = *one.items[0].mask;
  nn::LayerGraph g = r2va::testing::linear_graph({3, 32, 32}, kNumGestureClasses, 1);
  nn::Tensor& w = g.params["fc.weight"];
  const std::size_t n = 3 * 32 * 32, plane = 32 * 32;
  w.fill(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (mask.pixels[i % plane]) w[i] = 1.0;  // class 0 reads the figure only
  }
  g.params["fc.bias"].fill(0.0);
  g.params["fc.bias"][0] = 1.0;
  const Diagnosis dx = diagnose(g, one, pool, {.samples = 1, .baselines = 1, .grid = 4}, 2);
  ASSERT_TRUE(dx.summary.in_mask_fraction.has_value());
  EXPECT_GT(*dx.summary.in_mask_fraction, 0.5);
  EXPECT_FALSE(dx.summary.is_degenerate());
}

TEST(Diagnose, StratifiesMisclassified) {
  const DatasetManifest data = small_venv(3, 4);
  nn::LayerGraph g = r2va::testing::linear_graph({3, 32, 32}, kNumGestureClasses, 1);
  g.params["fc.weight"].fill(0.0);
  g.params["fc.bias"].fill(0.0);
  g.params["fc.bias"][0] = 1.0;  // always predicts fist: palm items are wrong
  const Diagnosis dx = diagnose(g, data, data, {.samples = 4, .baselines = 1, .grid = 4}, 9);
  EXPECT_EQ(dx.summary.misclassified, 2u);
  ASSERT_EQ(dx.summary.explained.size(), 4u);
  EXPECT_NE(data.items[dx.summary.explained[0]].label, 0);
  EXPECT_NE(data.items[dx.summary.explained[1]].label, 0);
  EXPECT_EQ(data.items[dx.summary.explained[2]].label, 0);
  EXPECT_THROW(diagnose(g, data, data, {.samples = 7}, 1), std::invalid_argument);
}

}  // namespace
}  // namespace r2va::pipeline
