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

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "r2va/attribution.h"
#include "r2va/augment.h"
#include "r2va/config.h"
#include "r2va/dataset.h"
#include "r2va/fs_util.h"
#include "r2va/pipeline.h"
#include "r2va/rng.h"
#include "r2va/scenegen.h"
#include "r2va/selftest.h"
#include "r2va/trainer.h"
#include "r2va/weights_io.h"

namespace fs = std::filesystem;
using namespace r2va;
using pipeline::PipelineConfig;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kRuntime = 2;

// Raised for invocation problems detected after option parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
};

PipelineConfig load_config(const Globals& g) {
  PipelineConfig c;
  if (!g.config_path.empty()) {
    if (!fs::is_regular_file(g.config_path)) {
      throw UsageError("config file '" + g.config_path + "' does not exist");
    }
    c = config::read_config_file(g.config_path);
  }
  for (const auto& o : g.overrides) config::apply_override(c, o);
  if (g.seed) c.seed = *g.seed;
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw config::ConfigError("--set", 0, "", e.what());
  }
  return c;
}

fs::path require_out(const Globals& g, const char* sub) {
  if (g.out.empty()) throw UsageError(std::string(sub) + " requires --out");
  return g.out;
}

nn::LayerGraph model_for(const PipelineConfig& c, const DatasetManifest& data) {
  if (data.empty()) throw std::runtime_error("dataset '" + data.name + "' is empty");
  const Image& img = data.items.front().image;
  nn::MiniVggOptions m = c.model;
  m.input_shape = {3, static_cast<std::size_t>(img.height), static_cast<std::size_t>(img.width)};
  m.num_classes = kNumGestureClasses;
  return nn::make_mini_vgg(m);
}

nn::LayerGraph load_model(const PipelineConfig& c, const DatasetManifest& data,
                          const std::string& path) {
  nn::LayerGraph g = model_for(c, data);
  nn::read_weights_file(g, path);
  return g;
}

// Writes a dataset into a temporary sibling and renames it to `dir`.
void write_dataset_atomic(const DatasetManifest& data, const fs::path& dir) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    throw std::runtime_error("output directory '" + dir.string() + "' exists and is not empty");
  }
  const fs::path tmp = dir.string() + ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  write_dataset(data, tmp);
  fs::remove_all(dir);
  if (dir.has_parent_path()) fs::create_directories(dir.parent_path());
  fs::rename(tmp, dir);
}

int cmd_gen(const Globals& g, const std::string& domain, std::optional<std::size_t> per_class,
            std::size_t curation) {
  const PipelineConfig c = load_config(g);
  const fs::path out = require_out(g, "gen");
  DatasetManifest data;
  if (domain == "renv") {
    if (curation > 0) throw UsageError("--curation only applies to --domain venv");
    data = scene::generate_dataset(c.renv_classes, c.renv,
                                   per_class.value_or(c.renv_images_per_class),
                                   derive_seed(c.seed, "renv/data"), "renv");
  } else {
    if (curation > c.curation_schedule.size()) {
      throw UsageError("--curation " + std::to_string(curation) + " exceeds the " +
                       std::to_string(c.curation_schedule.size()) + "-entry curation schedule");
    }
    scene::SceneConfig s = c.venv;
    for (std::size_t k = 0; k < curation; ++k) s = scene::apply_curation(s, c.curation_schedule[k]);
    const std::string stage = "venv_" + std::to_string(curation);
    data = scene::generate_dataset(c.venv_classes, s, per_class.value_or(c.venv_images_per_class),
                                   derive_seed(c.seed, stage + "/data"), stage);
  }
  write_dataset_atomic(data, out);
  std::cout << "wrote " << data.size() << " images to " << out.string() << "\n";
  return kOk;
}

int cmd_train(const Globals& g, const std::string& data_dir) {
  const PipelineConfig c = load_config(g);
  const fs::path out = require_out(g, "train");
  const DatasetManifest data = read_dataset(data_dir);
  train::SplitResult sp = train::split(data, c.train.val_fraction, derive_seed(c.seed, "renv/split"));
  DatasetManifest fit_set = sp.train;
  if (c.augment_copies > 0) {
    augment::AugmentSpec spec = c.augment;
    spec.seed = derive_seed(c.seed, "augment");
    fit_set = augment::expand_manifest(sp.train, spec, c.augment_copies);
  }
  nn::LayerGraph graph = model_for(c, data);
  nn::initialize_parameters(graph, derive_seed(c.seed, "model0/init"));
  train::TrainConfig tc = c.train;
  tc.seed = derive_seed(c.seed, "model0/fit");
  const train::FitResult fr = train::fit(graph, fit_set, tc, sp.val.empty() ? nullptr : &sp.val);
  fs::create_directories(out);
  nn::write_weights_file(fr.graph, out / "model.r2va");
  write_file_atomic(out / "history.csv", train::format_history(fr.history));
  if (!sp.val.empty()) {
    const std::string text = train::evaluate(fr.graph, sp.val).to_text();
    write_file_atomic(out / "eval.txt", text);
    std::cout << text;
  }
  return kOk;
}

int cmd_eval(const Globals& g, const std::string& model, const std::string& data_dir) {
  const PipelineConfig c = load_config(g);
  const DatasetManifest data = read_dataset(data_dir);
  const std::string text = train::evaluate(load_model(c, data, model), data).to_text();
  if (!g.out.empty()) {
    fs::create_directories(g.out);
    write_file_atomic(fs::path(g.out) / "eval.txt", text);
  }
  std::cout << text;
  return kOk;
}

int cmd_explain(const Globals& g, const std::string& model, const std::string& data_dir,
                const std::string& baseline_dir) {
  const PipelineConfig c = load_config(g);
  const fs::path out = require_out(g, "explain");
  const DatasetManifest data = read_dataset(data_dir);
  const DatasetManifest pool = baseline_dir.empty() ? data : read_dataset(baseline_dir);
  const nn::LayerGraph graph = load_model(c, data, model);
  pipeline::DiagnoseOptions opt = c.diagnose;
  opt.samples = std::min(opt.samples == 0 ? data.size() : opt.samples, data.size());
  const pipeline::Diagnosis dx =
      pipeline::diagnose(graph, data, pool, opt, derive_seed(c.seed, "explain"));
  const attr::FeatureGrouping grid =
      attr::grid_grouping(graph.input_shape, opt.grid, opt.grid);
  fs::create_directories(out);
  pipeline::write_heatmaps(out, "explain", data, dx, grid, opt.heatmaps);
  const std::string summary = pipeline::summary_to_json(dx.summary);
  write_file_atomic(out / "summary.json", summary);
  std::cout << summary;
  return kOk;
}

int cmd_adapt(const Globals& g, const std::string& model, const std::string& data_dir) {
  const PipelineConfig c = load_config(g);
  const fs::path out = require_out(g, "adapt");
  const DatasetManifest data = read_dataset(data_dir);
  const nn::LayerGraph graph = load_model(c, data, model);
  const train::SplitResult sp =
      train::split(data, c.venv_test_fraction, derive_seed(c.seed, "adapt/split"));
  const DatasetManifest small = train::take_per_class(sp.train, c.transfer_images_per_class);
  train::TrainConfig tc = c.train;
  tc.learning_rate = c.train.learning_rate * c.transfer_lr_scale;
  tc.epochs = c.transfer_epochs;
  tc.seed = derive_seed(c.seed, "model1/fit");
  std::vector<int> required;
  for (const auto& [label, n] : data.class_histogram()) required.push_back(label);
  std::vector<train::EpochRecord> history;
  const nn::LayerGraph adapted = train::transfer_learn(graph, small, tc, required, &history);
  fs::create_directories(out);
  nn::write_weights_file(adapted, out / "model1.r2va");
  write_file_atomic(out / "history.csv", train::format_history(history));
  const std::string text = train::evaluate(adapted, sp.val).to_text();
  write_file_atomic(out / "eval.txt", text);
  std::cout << text;
  return kOk;
}

int cmd_pipeline(const Globals& g) {
  const PipelineConfig c = load_config(g);
  const fs::path out = require_out(g, "pipeline");
  const pipeline::RunResult r = pipeline::run(c, &out);
  for (const auto& d : r.report.decision_trace) {
    std::printf("%-12s accuracy %.3f threshold %.2f -> %s  %s\n", d.stage.c_str(), d.accuracy,
                d.threshold, d.branch.c_str(), d.note.c_str());
  }
  for (const auto& f : r.report.flags) std::printf("flag: %s\n", f.c_str());
  std::printf("outcome %s (%s)\n", r.report.outcome.c_str(), r.report.final_model_path.c_str());
  return kOk;
}

int cmd_check(const Globals& g) {
  const PipelineConfig c = load_config(g);
  const selftest::SelfTestReport r = selftest::run_self_tests(derive_seed(c.seed, "check"));
  const std::string text = r.to_text();
  if (!g.out.empty()) {
    fs::create_directories(g.out);
    write_file_atomic(fs::path(g.out) / "check.txt", text);
  }
  std::cout << text;
  return r.passed() ? kOk : kRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"r2va: real-to-virtual domain adaptation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "Config file (dotted key = value lines)");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--seed", g.seed, "Root seed, overriding the config");
  app.add_option("--set", g.overrides, "Override one config key (key=value), repeatable")
      ->allow_extra_args(false);

  std::string domain = "venv", data_dir, model, baselines;
  std::optional<std::size_t> per_class;
  std::size_t curation = 0;

  CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen->add_option("--domain", domain, "renv or venv")->check(CLI::IsMember({"renv", "venv"}));
  gen->add_option("--per-class", per_class, "Images per class")->check(CLI::PositiveNumber);
  gen->add_option("--curation", curation, "Apply the first K curation deltas (venv)");

  CLI::App* trn = app.add_subcommand("train", "Fit a MiniVGG on a dataset");
  trn->add_option("--data", data_dir, "Dataset directory")->required();

  CLI::App* ev = app.add_subcommand("eval", "Evaluate a model on a dataset");
  ev->add_option("--model", model, "Weights file")->required();
  ev->add_option("--data", data_dir, "Dataset directory")->required();

  CLI::App* ex = app.add_subcommand("explain", "DeepSHAP heatmaps and attribution summary");
  ex->add_option("--model", model, "Weights file")->required();
  ex->add_option("--data", data_dir, "Dataset directory (generated, with masks)")->required();
  ex->add_option("--baselines", baselines, "Baseline pool dataset (default: --data)");

  CLI::App* ad = app.add_subcommand("adapt", "Transfer-learn the dense head on a small set");
  ad->add_option("--model", model, "Weights file")->required();
  ad->add_option("--data", data_dir, "Target-domain dataset directory")->required();

  CLI::App* pl = app.add_subcommand("pipeline", "Run the full adaptation loop");
  CLI::App* ck = app.add_subcommand("check", "Numerical self-tests");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_gen(g, domain, per_class, curation);
    if (*trn) return cmd_train(g, data_dir);
    if (*ev) return cmd_eval(g, model, data_dir);
    if (*ex) return cmd_explain(g, model, data_dir, baselines);
    if (*ad) return cmd_adapt(g, model, data_dir);
    if (*pl) return cmd_pipeline(g);
    if (*ck) return cmd_check(g);
  } catch (const UsageError& e) {
    std::cerr << "r2va: " << e.what() << "\n\n" << app.help();
    return kUsage;
  } catch (const config::ConfigError& e) {
    std::cerr << "r2va: config error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "r2va: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
