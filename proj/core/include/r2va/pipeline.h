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

#ifndef R2VA_PIPELINE_H_
#define R2VA_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "r2va/attribution.h"
#include "r2va/augment.h"
#include "r2va/dataset.h"
#include "r2va/graph.h"
#include "r2va/scenegen.h"
#include "r2va/trainer.h"

namespace r2va::pipeline {

struct DiagnoseOptions {
  std::size_t samples = 12;
  std::size_t baselines = 8;
  std::size_t grid = 8;
  std::size_t top_k = 3;
  // Heatmaps written per diagnosed stage.
  std::size_t heatmaps = 6;

  friend bool operator==(const DiagnoseOptions&, const DiagnoseOptions&) = default;
};

struct PipelineConfig {
  std::uint64_t seed = 1;
  scene::SceneConfig renv = scene::default_renv_config();
  scene::SceneConfig venv = scene::default_venv_config();
  std::vector<GestureClass> renv_classes{kAllGestures.begin(), kAllGestures.end()};
  std::vector<GestureClass> venv_classes{kVirtualGestures.begin(), kVirtualGestures.end()};
  nn::MiniVggOptions model = default_model();
  train::TrainConfig train = default_train();
  augment::AugmentSpec augment;
  // Augmented copies per REnv training image (0 trains model0 on the raw set).
  std::size_t augment_copies = 0;

  std::size_t renv_images_per_class = 900;
  std::size_t venv_images_per_class = 60;
  // Share of every VEnv dataset held out as its test set; the rest is the
  // pool transfer learning draws from.
  double venv_test_fraction = 0.5;

  double accuracy_threshold = 0.70;
  double renv_threshold = 0.90;
  // Stop with a "halt" decision when model0 misses renv_threshold.
  bool halt_on_weak_model = true;
  std::size_t max_curation_iterations = 2;
  std::vector<scene::CurationDelta> curation_schedule = default_schedule();

  std::size_t transfer_images_per_class = 20;
  double transfer_lr_scale = 0.1;
  std::size_t transfer_epochs = 100;

  DiagnoseOptions diagnose;

  // Throws std::invalid_argument naming the offending setting.
  void validate() const;

  static nn::MiniVggOptions default_model();
  static train::TrainConfig default_train();
  static std::vector<scene::CurationDelta> default_schedule();

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

enum class Branch { kDeploy, kCurate, kTransfer };
std::string_view branch_name(Branch b);

// deploy iff accuracy >= threshold; else curate iff iterations_left > 0;
// else transfer.
Branch decide(const train::EvalReport& eval, double threshold,
              std::size_t iterations_left);

struct ClassAttribution {
  int label = 0;
  std::size_t samples = 0;
  // Samples whose attribution mass is zero.
  std::size_t degenerate = 0;
  // Means over the non-degenerate samples; empty when all are degenerate.
  std::optional<double> in_mask_fraction;
  std::optional<double> out_mask_fraction;
  std::vector<std::string> top_cells;
};

struct AttributionSummary {
  std::size_t samples = 0;
  std::size_t misclassified = 0;
  std::size_t degenerate = 0;
  // Mean |attribution| mass fractions inside and outside the figure mask,
  // over non-degenerate samples; both empty when every sample is degenerate.
  std::optional<double> in_mask_fraction;
  std::optional<double> out_mask_fraction;
  std::optional<double> in_mask_fraction_misclassified;
  std::optional<double> in_mask_fraction_correct;
  double max_abs_residual = 0.0;
  double mean_abs_residual = 0.0;
  std::vector<ClassAttribution> per_class;
  // Dataset indices that were explained, in explanation order.
  std::vector<std::size_t> explained;

  bool is_degenerate() const { return samples > 0 && degenerate == samples; }
};

struct Diagnosis {
  AttributionSummary summary;
  std::vector<attr::AttributionMap> maps;  // parallel to summary.explained
};

// DeepSHAP over up to `options.samples` items of `dataset`: up to half are
// drawn from the misclassified items and the rest from the correct ones
// (either group tops up the other when short). Baselines are
// `options.baselines` items of `baseline_pool`. Every item needs a figure
// mask; std::invalid_argument otherwise.
Diagnosis diagnose(const nn::LayerGraph& graph, const DatasetManifest& dataset,
                   const DatasetManifest& baseline_pool, const DiagnoseOptions& options,
                   std::uint64_t seed);

struct StageRecord {
  std::string stage;       // model0_renv, venv_<k>, model1
  std::string dataset_id;  // e.g. venv_1[palette=skin_tone]
  train::EvalReport eval;
  std::optional<AttributionSummary> attribution;
  std::vector<std::string> heatmaps;  // paths relative to the output dir
};

struct Decision {
  std::string stage;
  double accuracy = 0.0;
  double threshold = 0.0;
  std::size_t iterations_left = 0;
  std::string branch;  // deploy, curate, transfer, halt
  std::string note;
};

struct PipelineReport {
  std::string outcome;  // deployed_model0, model1, halted
  std::vector<StageRecord> stage_log;
  std::vector<Decision> decision_trace;
  std::size_t curation_iterations = 0;
  std::vector<std::string> flags;
  std::string final_model_path;
  std::vector<train::EpochRecord> model0_history;
  std::vector<train::EpochRecord> model1_history;

  const StageRecord* stage(std::string_view name) const;
};

// Structured text form (JSON, keys documented in the README).
std::string report_to_json(const PipelineReport& report);
std::string summary_to_json(const AttributionSummary& summary);

// Writes the first `limit` maps of `dx` as heatmap PPMs plus raw .attr files
// into <out_dir>/heatmaps/<name>/, built in a temporary sibling and renamed
// into place. Returns the PPM paths relative to out_dir.
std::vector<std::string> write_heatmaps(const std::filesystem::path& out_dir,
                                        const std::string& name,
                                        const DatasetManifest& dataset, const Diagnosis& dx,
                                        const attr::FeatureGrouping& grid, std::size_t limit);

struct RunResult {
  PipelineReport report;
  nn::LayerGraph model0;
  std::optional<nn::LayerGraph> model1;
};

// Executes the framework loop. With `out_dir`, writes model0.r2va,
// model0_history.csv, heatmaps/<stage>/..., model1.r2va (when trained),
// model1_history.csv and report.json; each file and heatmap directory
// appears atomically and the report is written last.
RunResult run(const PipelineConfig& config,
              const std::filesystem::path* out_dir = nullptr);

}  // namespace r2va::pipeline

#endif  // R2VA_PIPELINE_H_
