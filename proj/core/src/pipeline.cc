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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

#include "r2va/config.h"
#include "r2va/fs_util.h"
#include "r2va/rng.h"
#include "r2va/weights_io.h"

namespace r2va::pipeline {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

nn::MiniVggOptions PipelineConfig::default_model() {
  nn::MiniVggOptions o;
  o.conv_channels = {16, 32};
  o.hidden_units = 64;
  o.stem_pool = 2;
  return o;
}

train::TrainConfig PipelineConfig::default_train() {
  train::TrainConfig t;
  t.learning_rate = 0.1;
  t.epochs = 16;
  return t;
}

std::vector<scene::CurationDelta> PipelineConfig::default_schedule() {
  return {scene::parse_delta("palette=skin_tone"),
          scene::parse_delta("positions+=left_offset,right_offset; distances+=far")};
}

void PipelineConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("pipeline config: " + what);
  };
  renv.validate();
  venv.validate();
  train.validate();
  augment.validate();
  if (renv.height != venv.height || renv.width != venv.width) {
    fail("renv and venv image sizes differ");
  }
  if (renv_classes.empty() || venv_classes.empty()) fail("class lists must be non-empty");
  for (GestureClass g : venv_classes) {
    if (std::find(renv_classes.begin(), renv_classes.end(), g) == renv_classes.end()) {
      fail("venv class '" + std::string(gesture_name(g)) + "' is not a renv class");
    }
  }
  if (renv_images_per_class < 2) fail("renv_images_per_class must be >= 2");
  if (!(venv_test_fraction > 0.0 && venv_test_fraction < 1.0)) {
    fail("venv_test_fraction must be in (0, 1)");
  }
  const auto held_out = static_cast<std::size_t>(
      std::floor(static_cast<double>(venv_images_per_class) * venv_test_fraction + 1e-9));
  if (held_out == 0) fail("venv_images_per_class leaves no test images");
  if (venv_images_per_class - held_out < transfer_images_per_class) {
    fail("the VEnv transfer pool (" + std::to_string(venv_images_per_class - held_out) +
         " per class) is smaller than transfer_images_per_class (" +
         std::to_string(transfer_images_per_class) + ")");
  }
  if (transfer_images_per_class == 0) fail("transfer_images_per_class must be >= 1");
  if (!(accuracy_threshold >= 0.0 && accuracy_threshold <= 1.0)) {
    fail("accuracy_threshold must be in [0, 1]");
  }
  if (!(renv_threshold >= 0.0 && renv_threshold <= 1.0)) fail("renv_threshold must be in [0, 1]");
  if (max_curation_iterations > 0 && curation_schedule.empty()) {
    fail("max_curation_iterations > 0 needs a non-empty curation_schedule");
  }
  if (!(transfer_lr_scale >= 0.0)) fail("transfer_lr_scale must be >= 0");
  if (transfer_epochs == 0) fail("transfer_epochs must be >= 1");
  if (diagnose.grid == 0 || diagnose.grid > static_cast<std::size_t>(renv.height) ||
      diagnose.grid > static_cast<std::size_t>(renv.width)) {
    fail("diagnose.grid must be between 1 and the image size");
  }
  if (diagnose.baselines == 0) fail("diagnose.baselines must be >= 1");
  // Every schedule entry must name real fields with parsable values.
  scene::SceneConfig probe = venv;
  for (const auto& delta : curation_schedule) {
    for (const auto& edit : delta.edits) scene::apply_edit(probe, edit);
  }
  nn::MiniVggOptions m = model;
  m.input_shape = {3, static_cast<std::size_t>(renv.height), static_cast<std::size_t>(renv.width)};
  m.num_classes = kNumGestureClasses;
  nn::validate(nn::make_mini_vgg(m));
}

std::string_view branch_name(Branch b) {
  switch (b) {
    case Branch::kDeploy: return "deploy";
    case Branch::kCurate: return "curate";
    case Branch::kTransfer: return "transfer";
  }
  return "?";
}

Branch decide(const train::EvalReport& eval, double threshold, std::size_t iterations_left) {
  if (eval.accuracy >= threshold) return Branch::kDeploy;
  return iterations_left > 0 ? Branch::kCurate : Branch::kTransfer;
}

const StageRecord* PipelineReport::stage(std::string_view name) const {
  for (const auto& s : stage_log) {
    if (s.stage == name) return &s;
  }
  return nullptr;
}

namespace {

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

Diagnosis diagnose(const nn::LayerGraph& graph, const DatasetManifest& dataset,
                   const DatasetManifest& baseline_pool, const DiagnoseOptions& options,
                   std::uint64_t seed) {
  if (dataset.empty()) throw std::invalid_argument("diagnose: empty dataset");
  if (baseline_pool.empty()) throw std::invalid_argument("diagnose: empty baseline pool");
  if (options.samples > dataset.size()) {
    throw std::invalid_argument("diagnose: " + std::to_string(options.samples) +
                                " samples requested from " + std::to_string(dataset.size()) +
                                " items");
  }
  for (const auto& item : dataset.items) {
    if (!item.mask) {
      throw std::invalid_argument("diagnose: item '" + item.relative_path +
                                  "' has no figure mask (diagnosis needs generated data)");
    }
  }
  const std::vector<int> predicted = train::predict(graph, dataset);
  std::vector<std::size_t> wrong, right;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    (predicted[i] == dataset.items[i].label ? right : wrong).push_back(i);
  }
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(wrong));
  rng.shuffle(std::span<std::size_t>(right));
  const std::size_t n = options.samples;
  std::size_t n_wrong = std::min(n / 2, wrong.size());
  const std::size_t n_right = std::min(n - n_wrong, right.size());
  n_wrong = std::min(n - n_right, wrong.size());

  std::vector<std::size_t> pool(baseline_pool.size());
  std::iota(pool.begin(), pool.end(), 0);
  rng.shuffle(std::span<std::size_t>(pool));
  std::vector<nn::Tensor> baselines;
  for (std::size_t j = 0; j < std::min(options.baselines, pool.size()); ++j) {
    baselines.push_back(item_tensor(baseline_pool.items[pool[j]], baseline_pool.root));
  }

  const nn::Shape& chw = graph.input_shape;
  const attr::FeatureGrouping grid = attr::grid_grouping(chw, options.grid, options.grid);
  const std::size_t plane = chw[1] * chw[2];

  Diagnosis out;
  AttributionSummary& s = out.summary;
  s.explained.assign(wrong.begin(), wrong.begin() + static_cast<std::ptrdiff_t>(n_wrong));
  s.explained.insert(s.explained.end(), right.begin(),
                     right.begin() + static_cast<std::ptrdiff_t>(n_right));
  s.samples = s.explained.size();
  s.misclassified = n_wrong;

  std::vector<double> in_all, in_wrong, in_right;
  std::map<int, ClassAttribution> classes;
  std::map<int, std::vector<double>> class_in;
  std::map<int, std::vector<double>> class_cells;
  double residual_sum = 0.0;
  for (std::size_t k = 0; k < s.explained.size(); ++k) {
    const std::size_t idx = s.explained[k];
    const LabeledImage& item = dataset.items[idx];
    const nn::Tensor x = item_tensor(item, dataset.root);
    attr::AttributionMap map = attr::deep_shap(graph, x, baselines,
                                               static_cast<std::size_t>(predicted[idx]), &grid);
    const double r = std::abs(map.completeness_residual);
    s.max_abs_residual = std::max(s.max_abs_residual, r);
    residual_sum += r;

    double in = 0.0, total = 0.0;
    for (std::size_t i = 0; i < map.values.size(); ++i) {
      const double a = std::abs(map.values[i]);
      total += a;
      if (item.mask->pixels[i % plane]) in += a;
    }
    ClassAttribution& ca = classes[item.label];
    ca.label = item.label;
    ++ca.samples;
    auto& cells = class_cells[item.label];
    cells.resize(grid.num_cells(), 0.0);
    if (total > 0.0) {
      const double f = in / total;
      in_all.push_back(f);
      (k < n_wrong ? in_wrong : in_right).push_back(f);
      class_in[item.label].push_back(f);
      for (std::size_t c = 0; c < grid.num_cells(); ++c) cells[c] += std::abs(map.cell_values[c]);
    } else {
      ++s.degenerate;
      ++ca.degenerate;
    }
    out.maps.push_back(std::move(map));
  }
  if (s.samples > 0) residual_sum /= static_cast<double>(s.samples);
  s.mean_abs_residual = residual_sum;
  s.in_mask_fraction = mean_of(in_all);
  if (s.in_mask_fraction) s.out_mask_fraction = 1.0 - *s.in_mask_fraction;
  s.in_mask_fraction_misclassified = mean_of(in_wrong);
  s.in_mask_fraction_correct = mean_of(in_right);
  for (auto& [label, ca] : classes) {
    ca.in_mask_fraction = mean_of(class_in[label]);
    if (ca.in_mask_fraction) {
      ca.out_mask_fraction = 1.0 - *ca.in_mask_fraction;
      const auto& cells = class_cells[label];
      std::vector<std::size_t> order(cells.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return cells[a] > cells[b]; });
      for (std::size_t j = 0; j < std::min(options.top_k, order.size()); ++j) {
        if (cells[order[j]] <= 0.0) break;
        ca.top_cells.push_back(grid.names[order[j]]);
      }
    }
    s.per_class.push_back(ca);
  }
  return out;
}

namespace {

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json eval_json(const train::EvalReport& e) {
  Json j;
  j["accuracy"] = e.accuracy;
  j["n_samples"] = e.n_samples;
  Json per = Json::object();
  for (const auto& [c, a] : e.per_class_accuracy) per[std::string(gesture_name(c))] = a;
  j["per_class_accuracy"] = per;
  j["confusion"] = e.confusion;
  return j;
}

Json summary_json(const AttributionSummary& s) {
  Json j;
  j["status"] = s.is_degenerate() ? "degenerate" : "ok";
  j["samples"] = s.samples;
  j["misclassified"] = s.misclassified;
  j["degenerate_samples"] = s.degenerate;
  j["in_mask_fraction"] = optional_json(s.in_mask_fraction);
  j["out_mask_fraction"] = optional_json(s.out_mask_fraction);
  j["in_mask_fraction_misclassified"] = optional_json(s.in_mask_fraction_misclassified);
  j["in_mask_fraction_correct"] = optional_json(s.in_mask_fraction_correct);
  j["residual_max_abs"] = s.max_abs_residual;
  j["residual_mean_abs"] = s.mean_abs_residual;
  Json per = Json::array();
  for (const auto& c : s.per_class) {
    Json pc;
    pc["class"] = std::string(gesture_name(c.label));
    pc["samples"] = c.samples;
    pc["degenerate_samples"] = c.degenerate;
    pc["in_mask_fraction"] = optional_json(c.in_mask_fraction);
    pc["out_mask_fraction"] = optional_json(c.out_mask_fraction);
    pc["top_cells"] = c.top_cells;
    per.push_back(pc);
  }
  j["per_class"] = per;
  j["explained_items"] = s.explained;
  return j;
}

Json history_json(const std::vector<train::EpochRecord>& h) {
  Json arr = Json::array();
  for (const auto& r : h) {
    Json e;
    e["epoch"] = r.epoch;
    e["train_loss"] = finite_or_null(r.train_loss);
    e["train_accuracy"] = r.train_accuracy;
    e["val_accuracy"] = finite_or_null(r.val_accuracy);
    arr.push_back(e);
  }
  return arr;
}

}  // namespace

std::string report_to_json(const PipelineReport& report) {
  Json j;
  j["format"] = "r2va-pipeline-report 1";
  j["outcome"] = report.outcome;
  j["final_model_path"] = report.final_model_path;
  j["curation_iterations"] = report.curation_iterations;
  j["flags"] = report.flags;
  Json trace = Json::array();
  for (const auto& d : report.decision_trace) {
    Json e;
    e["stage"] = d.stage;
    e["accuracy"] = d.accuracy;
    e["threshold"] = d.threshold;
    e["iterations_left"] = d.iterations_left;
    e["branch"] = d.branch;
    e["note"] = d.note;
    trace.push_back(e);
  }
  j["decision_trace"] = trace;
  Json stages = Json::array();
  for (const auto& s : report.stage_log) {
    Json e;
    e["stage"] = s.stage;
    e["dataset"] = s.dataset_id;
    e["eval"] = eval_json(s.eval);
    e["attribution"] = s.attribution ? summary_json(*s.attribution) : Json(nullptr);
    e["heatmaps"] = s.heatmaps;
    stages.push_back(e);
  }
  j["stage_log"] = stages;
  j["model0_history"] = history_json(report.model0_history);
  j["model1_history"] = history_json(report.model1_history);
  return j.dump(2) + "\n";
}

std::string summary_to_json(const AttributionSummary& summary) {
  return summary_json(summary).dump(2) + "\n";
}

std::vector<std::string> write_heatmaps(const fs::path& out, const std::string& stage,
                                        const DatasetManifest& data, const Diagnosis& dx,
                                        const attr::FeatureGrouping& grid, std::size_t limit) {
  const fs::path final_dir = out / "heatmaps" / stage;
  const fs::path tmp_dir = out / "heatmaps" / (stage + ".tmp");
  fs::remove_all(tmp_dir);
  fs::create_directories(tmp_dir);
  std::vector<std::string> names;
  for (std::size_t k = 0; k < std::min(limit, dx.maps.size()); ++k) {
    const LabeledImage& item = data.items[dx.summary.explained[k]];
    const attr::AttributionMap& map = dx.maps[k];
    char stem[128];
    std::snprintf(stem, sizeof(stem), "%02zu_%s_as_%s", k,
                  std::string(gesture_name(item.label)).c_str(),
                  std::string(gesture_name(static_cast<int>(map.target_class))).c_str());
    write_pnm(tmp_dir / (std::string(stem) + ".ppm"), attr::render_heatmap(map, item.image, &grid));
    attr::write_attribution_file(tmp_dir / (std::string(stem) + ".attr"), map);
    names.push_back((fs::path("heatmaps") / stage / (std::string(stem) + ".ppm")).generic_string());
  }
  fs::remove_all(final_dir);
  fs::rename(tmp_dir, final_dir);
  return names;
}

namespace {

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string describe_delta(const std::vector<std::string>& applied) {
  if (applied.empty()) return "";
  std::string s = "[";
  for (std::size_t i = 0; i < applied.size(); ++i) {
    if (i) s += " | ";
    s += applied[i];
  }
  return s + "]";
}

}  // namespace

RunResult run(const PipelineConfig& config, const fs::path* out_dir) {
  config.validate();
  const std::uint64_t root = config.seed;
  if (out_dir) {
    fs::create_directories(*out_dir);
    write_file_atomic(*out_dir / "config.cfg", config::serialize_config(config));
  }
  auto stage_error = [](const std::string& stage, const std::exception& e) {
    return std::runtime_error("pipeline stage " + stage + ": " + e.what());
  };

  RunResult result;
  PipelineReport& report = result.report;

  // (1) REnv data and model0.
  DatasetManifest renv_train, renv_val;
  try {
    const DatasetManifest renv = scene::generate_dataset(
        config.renv_classes, config.renv, config.renv_images_per_class,
        derive_seed(root, "renv/data"), "renv");
    train::SplitResult sp = train::split(renv, config.train.val_fraction,
                                         derive_seed(root, "renv/split"));
    renv_train = std::move(sp.train);
    renv_val = std::move(sp.val);
  } catch (const std::exception& e) {
    throw stage_error("renv_data", e);
  }

  try {
    DatasetManifest fit_set = renv_train;
    if (config.augment_copies > 0) {
      augment::AugmentSpec spec = config.augment;
      spec.seed = derive_seed(root, "augment");
      fit_set = augment::expand_manifest(renv_train, spec, config.augment_copies);
    }
    nn::MiniVggOptions m = config.model;
    m.input_shape = {3, static_cast<std::size_t>(config.renv.height),
                     static_cast<std::size_t>(config.renv.width)};
    m.num_classes = kNumGestureClasses;
    nn::LayerGraph g = nn::make_mini_vgg(m);
    nn::initialize_parameters(g, derive_seed(root, "model0/init"));
    train::TrainConfig tc = config.train;
    tc.seed = derive_seed(root, "model0/fit");
    tc.frozen_params.clear();
    train::FitResult fr = train::fit(g, fit_set, tc, &renv_val);
    result.model0 = std::move(fr.graph);
    report.model0_history = std::move(fr.history);
  } catch (const std::exception& e) {
    throw stage_error("model0", e);
  }
  if (out_dir) {
    nn::write_weights_file(result.model0, *out_dir / "model0.r2va");
    write_file_atomic(*out_dir / "model0_history.csv", train::format_history(report.model0_history));
  }

  StageRecord renv_stage;
  renv_stage.stage = "model0_renv";
  renv_stage.dataset_id = "renv_val";
  renv_stage.eval = train::evaluate(result.model0, renv_val);
  const double renv_acc = renv_stage.eval.accuracy;
  report.stage_log.push_back(std::move(renv_stage));
  if (renv_acc < config.renv_threshold) {
    report.flags.push_back("model0 REnv accuracy " + fixed3(renv_acc) +
                           " is below the required " + fixed3(config.renv_threshold));
    if (config.halt_on_weak_model) {
      report.decision_trace.push_back({"model0_renv", renv_acc, config.renv_threshold, 0,
                                       "halt", "model0 is not well-performing on REnv"});
      report.outcome = "halted";
      report.final_model_path = "model0.r2va";
      if (out_dir) write_file_atomic(*out_dir / "report.json", report_to_json(report));
      return result;
    }
  }

  // (2)-(6) VEnv loop.
  const std::size_t budget = std::min(config.max_curation_iterations, config.curation_schedule.size());
  const attr::FeatureGrouping grid = attr::grid_grouping(
      result.model0.input_shape, config.diagnose.grid, config.diagnose.grid);
  std::vector<int> venv_labels;
  for (GestureClass g : config.venv_classes) venv_labels.push_back(static_cast<int>(g));

  scene::SceneConfig venv = config.venv;
  std::vector<std::string> applied;
  for (std::size_t k = 0;; ++k) {
    const std::string stage = "venv_" + std::to_string(k);
    DatasetManifest pool, test;
    try {
      const DatasetManifest data = scene::generate_dataset(
          config.venv_classes, venv, config.venv_images_per_class,
          derive_seed(root, stage + "/data"), stage);
      train::SplitResult sp =
          train::split(data, config.venv_test_fraction, derive_seed(root, stage + "/split"));
      pool = std::move(sp.train);
      test = std::move(sp.val);
    } catch (const std::exception& e) {
      throw stage_error(stage, e);
    }

    StageRecord rec;
    rec.stage = stage;
    rec.dataset_id = stage + describe_delta(applied);
    rec.eval = train::evaluate(result.model0, test);
    const std::size_t left = budget - report.curation_iterations;
    const Branch branch = decide(rec.eval, config.accuracy_threshold, left);
    Decision d{stage, rec.eval.accuracy, config.accuracy_threshold, left,
               std::string(branch_name(branch)), ""};

    if (branch != Branch::kDeploy && config.diagnose.samples > 0) {
      try {
        DiagnoseOptions opt = config.diagnose;
        opt.samples = std::min(opt.samples, test.size());
        const Diagnosis dx =
            diagnose(result.model0, test, renv_train, opt, derive_seed(root, stage + "/diagnose"));
        if (out_dir) {
          rec.heatmaps = write_heatmaps(*out_dir, stage, test, dx, grid, opt.heatmaps);
        }
        rec.attribution = dx.summary;
      } catch (const std::exception& e) {
        throw stage_error(stage + "/diagnose", e);
      }
    }

    if (branch == Branch::kDeploy) {
      d.note = "accuracy meets the threshold";
      report.stage_log.push_back(std::move(rec));
      report.decision_trace.push_back(std::move(d));
      report.outcome = "deployed_model0";
      report.final_model_path = "model0.r2va";
      break;
    }
    if (branch == Branch::kCurate) {
      const scene::CurationDelta& delta = config.curation_schedule[report.curation_iterations];
      d.note = "apply " + scene::format_delta(delta);
      report.stage_log.push_back(std::move(rec));
      report.decision_trace.push_back(std::move(d));
      try {
        venv = scene::apply_curation(venv, delta);
      } catch (const std::exception& e) {
        throw stage_error(stage + "/curate", e);
      }
      applied.push_back(scene::format_delta(delta));
      ++report.curation_iterations;
      continue;
    }

    // Transfer learning on the latest VEnv pool.
    d.note = "transfer with " + std::to_string(config.transfer_images_per_class) +
             " images per class";
    report.stage_log.push_back(std::move(rec));
    report.decision_trace.push_back(std::move(d));
    try {
      const DatasetManifest small = train::take_per_class(pool, config.transfer_images_per_class);
      train::TrainConfig tc = config.train;
      tc.learning_rate = config.train.learning_rate * config.transfer_lr_scale;
      tc.epochs = config.transfer_epochs;
      tc.seed = derive_seed(root, "model1/fit");
      tc.frozen_params.clear();
      result.model1 = train::transfer_learn(result.model0, small, tc, venv_labels,
                                            &report.model1_history);
    } catch (const std::exception& e) {
      throw stage_error("model1", e);
    }
    if (out_dir) {
      nn::write_weights_file(*result.model1, *out_dir / "model1.r2va");
      write_file_atomic(*out_dir / "model1_history.csv",
                        train::format_history(report.model1_history));
    }
    StageRecord m1;
    m1.stage = "model1";
    m1.dataset_id = stage + describe_delta(applied);
    m1.eval = train::evaluate(*result.model1, test);
    report.stage_log.push_back(std::move(m1));
    report.outcome = "model1";
    report.final_model_path = "model1.r2va";
    break;
  }

  if (out_dir) write_file_atomic(*out_dir / "report.json", report_to_json(report));
  return result;
}

}  // namespace r2va::pipeline
