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

#ifndef R2VA_TRAINER_H_
#define R2VA_TRAINER_H_

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "r2va/dataset.h"
#include "r2va/graph.h"

namespace r2va::train {

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t batch_size = 16;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
  double val_fraction = 0.3;
  std::set<std::string> frozen_params;
  bool shuffle = true;

  // Throws std::invalid_argument on out-of-range values.
  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;  // NaN when no validation set was given
};

// One `epoch,train_loss,train_acc,val_acc` line per record, no header.
std::string format_history(std::span<const EpochRecord> history);

struct EvalReport {
  double accuracy = 0.0;
  std::map<int, double> per_class_accuracy;  // classes present in the labels
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::size_t n_samples = 0;

  std::string to_text() const;
};

// Builds a report from predictions; checks labels and predictions are in
// [0, num_classes).
EvalReport make_report(std::span<const int> labels, std::span<const int> predictions,
                       std::size_t num_classes);

// Index of the largest value, ties toward the lower index.
int argmax(std::span<const double> values);

struct SplitResult {
  DatasetManifest train;
  DatasetManifest val;
};

// Stratified split: per class, floor(n * val_fraction) items go to val and
// the rest to train. Items keep their original relative order.
SplitResult split(const DatasetManifest& dataset, double val_fraction,
                  std::uint64_t seed);

struct FitResult {
  nn::LayerGraph graph;
  std::vector<EpochRecord> history;
};

// Plain minibatch SGD, w <- w - lr * grad, on every non-frozen parameter.
// Parameters are rounded to float32 after each step.
FitResult fit(const nn::LayerGraph& graph, const DatasetManifest& train,
              const TrainConfig& config, const DatasetManifest* val = nullptr);

std::vector<int> predict(const nn::LayerGraph& graph,
                         const DatasetManifest& dataset);
EvalReport evaluate(const nn::LayerGraph& graph, const DatasetManifest& test);

std::set<std::string> conv_parameter_names(const nn::LayerGraph& graph);

// Fine-tunes a copy of `graph` on a small target-domain set with the
// convolutional feature extractor frozen. An empty config.frozen_params
// means "all conv parameters". `required_classes` lists classes that must
// each have at least one example (empty: the classes present).
nn::LayerGraph transfer_learn(const nn::LayerGraph& graph,
                              const DatasetManifest& small_set,
                              TrainConfig config,
                              std::span<const int> required_classes = {},
                              std::vector<EpochRecord>* history = nullptr);

// First `n_per_class` items of each class, in manifest order.
DatasetManifest take_per_class(const DatasetManifest& dataset,
                               std::size_t n_per_class);

}  // namespace r2va::train

#endif  // R2VA_TRAINER_H_
