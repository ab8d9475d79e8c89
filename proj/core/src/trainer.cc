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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "r2va/rng.h"

namespace r2va::train {

namespace {

constexpr std::size_t kEvalBatch = 32;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("train config: learning_rate must be >= 0");
  }
  if (batch_size == 0) throw std::invalid_argument("train config: batch_size must be positive");
  if (epochs == 0) throw std::invalid_argument("train config: epochs must be positive");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("train config: val_fraction must be in (0, 1)");
  }
}

std::string format_history(std::span<const EpochRecord> history) {
  std::string out;
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + "," + format_double(r.train_loss) + "," +
           format_double(r.train_accuracy) + "," +
           format_double(r.val_accuracy) + "\n";
  }
  return out;
}

std::string EvalReport::to_text() const {
  std::string out = "n_samples " + std::to_string(n_samples) + "\n";
  out += "accuracy " + format_double(accuracy) + "\n";
  for (const auto& [c, acc] : per_class_accuracy) {
    out += "class " + std::string(gesture_name(c)) + " " + format_double(acc) + "\n";
  }
  out += "confusion (rows: true, columns: predicted)\n";
  for (const auto& row : confusion) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out += ' ';
      out += std::to_string(row[j]);
    }
    out += '\n';
  }
  return out;
}

int argmax(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("argmax of empty span");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return static_cast<int>(best);
}

EvalReport make_report(std::span<const int> labels, std::span<const int> predictions,
                       std::size_t num_classes) {
  if (labels.size() != predictions.size()) {
    throw std::invalid_argument("make_report: label/prediction count mismatch");
  }
  if (labels.empty()) throw std::invalid_argument("make_report: empty test set");
  EvalReport report;
  report.n_samples = labels.size();
  report.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i], p = predictions[i];
    if (y < 0 || p < 0 || static_cast<std::size_t>(y) >= num_classes ||
        static_cast<std::size_t>(p) >= num_classes) {
      throw std::invalid_argument("make_report: class index out of range");
    }
    ++report.confusion[static_cast<std::size_t>(y)][static_cast<std::size_t>(p)];
  }
  std::size_t correct = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    correct += report.confusion[c][c];
    const std::size_t row = std::accumulate(report.confusion[c].begin(),
                                            report.confusion[c].end(), std::size_t{0});
    if (row > 0) {
      report.per_class_accuracy[static_cast<int>(c)] =
          static_cast<double>(report.confusion[c][c]) / static_cast<double>(row);
    }
  }
  report.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  return report;
}

SplitResult split(const DatasetManifest& dataset, double val_fraction,
                  std::uint64_t seed) {
  if (dataset.empty()) throw std::invalid_argument("split: empty dataset");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("split: val_fraction must be in (0, 1)");
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < dataset.items.size(); ++i) {
    by_class[dataset.items[i].label].push_back(i);
  }
  std::vector<bool> to_val(dataset.items.size(), false);
  for (auto& [label, indices] : by_class) {
    if (indices.size() < 2) {
      throw std::invalid_argument("split: class '" + std::string(gesture_name(label)) +
                                  "' has fewer than 2 samples; cannot stratify");
    }
    Rng rng(derive_seed(seed, "split/" + std::string(gesture_name(label))));
    rng.shuffle(std::span<std::size_t>(indices));
    const auto n_val = static_cast<std::size_t>(
        std::floor(static_cast<double>(indices.size()) * val_fraction + 1e-9));
    for (std::size_t j = 0; j < n_val; ++j) to_val[indices[j]] = true;
  }
  SplitResult out;
  out.train.name = dataset.name + "/train";
  out.val.name = dataset.name + "/val";
  out.train.root = out.val.root = dataset.root;
  for (std::size_t i = 0; i < dataset.items.size(); ++i) {
    (to_val[i] ? out.val : out.train).items.push_back(dataset.items[i]);
  }
  return out;
}

std::vector<int> predict(const nn::LayerGraph& graph,
                         const DatasetManifest& dataset) {
  std::vector<int> predictions;
  predictions.reserve(dataset.size());
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < dataset.size(); begin += kEvalBatch) {
    const std::size_t end = std::min(dataset.size(), begin + kEvalBatch);
    idx.resize(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const nn::Tensor logits = nn::forward(graph, make_batch(dataset, idx));
    const std::size_t k = graph.num_classes;
    for (std::size_t s = 0; s < idx.size(); ++s) {
      predictions.push_back(argmax(logits.values().subspan(s * k, k)));
    }
  }
  return predictions;
}

EvalReport evaluate(const nn::LayerGraph& graph, const DatasetManifest& test) {
  if (test.empty()) throw std::invalid_argument("evaluate: empty test set");
  const std::vector<int> predictions = predict(graph, test);
  std::vector<int> labels;
  labels.reserve(test.size());
  for (const auto& item : test.items) labels.push_back(item.label);
  return make_report(labels, predictions, graph.num_classes);
}

FitResult fit(const nn::LayerGraph& graph, const DatasetManifest& train,
              const TrainConfig& config, const DatasetManifest* val) {
  config.validate();
  if (train.empty()) throw std::invalid_argument("fit: empty training set");
  for (const auto& name : config.frozen_params) {
    if (!graph.params.count(name)) {
      throw std::invalid_argument("fit: frozen parameter '" + name +
                                  "' is not in the graph");
    }
  }
  nn::validate(graph);

  // Resolve every image once; unreadable files abort here with their path.
  std::vector<nn::Tensor> inputs;
  std::vector<int> labels;
  inputs.reserve(train.size());
  for (const auto& item : train.items) {
    inputs.push_back(item_tensor(item, train.root));
    labels.push_back(item.label);
  }

  FitResult result{graph, {}};
  nn::LayerGraph& g = result.graph;
  std::vector<std::string> trainable;
  for (const auto& name : g.param_order()) {
    if (!config.frozen_params.count(name)) trainable.push_back(name);
  }

  Rng rng(derive_seed(config.seed, "fit"));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<nn::Tensor> batch_inputs;
  std::vector<int> batch_labels;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle) rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      batch_inputs.clear();
      batch_labels.clear();
      for (std::size_t j = begin; j < end; ++j) {
        batch_inputs.push_back(inputs[order[j]]);
        batch_labels.push_back(labels[order[j]]);
      }
      const nn::BackwardResult step =
          nn::backward(g, nn::stack(batch_inputs), batch_labels,
                       nn::Objective::kSoftmaxCrossEntropy, &config.frozen_params);
      loss_sum += step.loss * static_cast<double>(end - begin);
      const std::size_t k = g.num_classes;
      for (std::size_t s = 0; s < batch_labels.size(); ++s) {
        if (argmax(step.logits.values().subspan(s * k, k)) == batch_labels[s]) ++correct;
      }
      if (config.learning_rate == 0.0) continue;
      for (const auto& name : trainable) {
        nn::Tensor& p = g.params.at(name);
        const nn::Tensor& grad = step.grads.at(name);
        for (std::size_t j = 0; j < p.size(); ++j) {
          p[j] = static_cast<float>(p[j] - config.learning_rate * grad[j]);
        }
      }
    }
    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(order.size());
    record.train_accuracy =
        static_cast<double>(correct) / static_cast<double>(order.size());
    record.val_accuracy = val && !val->empty()
                              ? evaluate(g, *val).accuracy
                              : std::numeric_limits<double>::quiet_NaN();
    result.history.push_back(record);
  }
  return result;
}

std::set<std::string> conv_parameter_names(const nn::LayerGraph& graph) {
  std::set<std::string> names;
  for (const auto& layer : graph.layers) {
    if (layer.kind != nn::LayerKind::kConv2d) continue;
    for (auto& n : layer.param_names()) names.insert(std::move(n));
  }
  return names;
}

nn::LayerGraph transfer_learn(const nn::LayerGraph& graph,
                              const DatasetManifest& small_set,
                              TrainConfig config,
                              std::span<const int> required_classes,
                              std::vector<EpochRecord>* history) {
  if (small_set.empty()) throw std::invalid_argument("transfer_learn: empty small set");
  for (const auto& name : config.frozen_params) {
    if (!graph.params.count(name)) {
      throw std::invalid_argument("transfer_learn: frozen parameter '" + name +
                                  "' is not in the graph");
    }
  }
  const std::set<std::string> conv = conv_parameter_names(graph);
  if (config.frozen_params.empty()) {
    config.frozen_params = conv;
  } else {
    for (const auto& name : conv) {
      if (!config.frozen_params.count(name)) {
        throw std::invalid_argument("transfer_learn: conv parameter '" + name +
                                    "' must be frozen");
      }
    }
  }
  const auto histogram = small_set.class_histogram();
  for (const int c : required_classes) {
    if (!histogram.count(c)) {
      throw std::invalid_argument("transfer_learn: no example of class '" +
                                  std::string(gesture_name(c)) + "'");
    }
  }
  if (history) history->clear();
  if (config.frozen_params.size() == graph.params.size()) return graph;
  FitResult r = fit(graph, small_set, config);
  if (history) *history = std::move(r.history);
  return std::move(r.graph);
}

DatasetManifest take_per_class(const DatasetManifest& dataset,
                               std::size_t n_per_class) {
  DatasetManifest out;
  out.name = dataset.name + "/subset";
  out.root = dataset.root;
  std::map<int, std::size_t> taken;
  for (const auto& item : dataset.items) {
    if (taken[item.label] < n_per_class) {
      out.items.push_back(item);
      ++taken[item.label];
    }
  }
  return out;
}

}  // namespace r2va::train
