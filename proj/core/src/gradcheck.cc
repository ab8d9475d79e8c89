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

#include "r2va/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace r2va::nn {

namespace {

struct Probe {
  double loss;
  std::vector<std::int8_t> pattern;
};

Probe probe(const LayerGraph& graph, const Tensor& batch,
            std::span<const int> labels, Objective objective) {
  const ForwardTrace trace = forward_trace(graph, batch);
  Probe p;
  for (std::size_t i = 0; i < graph.layers.size(); ++i) {
    if (graph.layers[i].kind != LayerKind::kRelu) continue;
    for (const double v : trace.activations[i].values()) {
      p.pattern.push_back(v > 0.0 ? 1 : 0);
    }
  }
  const Tensor& logits = trace.logits();
  const std::size_t n = logits.dim(0), k = graph.num_classes;
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const double* z = logits.data() + s * k;
    const auto y = static_cast<std::size_t>(labels[s]);
    if (objective == Objective::kTargetLogit) {
      total += z[y];
      continue;
    }
    const double zmax = *std::max_element(z, z + k);
    double denom = 0.0;
    for (std::size_t c = 0; c < k; ++c) denom += std::exp(z[c] - zmax);
    total += std::log(denom) + zmax - z[y];
  }
  p.loss = total / static_cast<double>(n);
  return p;
}

}  // namespace

bool GradientCheckReport::passed() const {
  return std::none_of(params.begin(), params.end(),
                      [](const ParamCheck& p) { return p.flagged; });
}

double GradientCheckReport::max_relative_error() const {
  double m = 0.0;
  for (const auto& p : params) m = std::max(m, p.max_relative_error);
  return m;
}

std::string GradientCheckReport::to_string() const {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "gradient check: step=%.3g tol=%.3g\n",
                step, tolerance);
  out += line;
  for (const auto& p : params) {
    std::snprintf(line, sizeof(line),
                  "  %-16s max_rel=%.3e checked=%zu skipped=%zu %s\n",
                  p.name.c_str(), p.max_relative_error, p.coordinates_checked,
                  p.coordinates_skipped, p.flagged ? "FLAGGED" : "ok");
    out += line;
  }
  out += passed() ? "result: pass\n" : "result: FAIL\n";
  return out;
}

GradientCheckReport compare_to_finite_differences(
    const LayerGraph& graph, const Tensor& batch, std::span<const int> labels,
    const ParamMap& analytic, const GradientCheckOptions& options) {
  if (!(options.step > 0.0) || !(options.tolerance > 0.0)) {
    throw std::invalid_argument("gradient check: step and tol must be positive");
  }
  GradientCheckReport report;
  report.step = options.step;
  report.tolerance = options.tolerance;

  const Probe base = probe(graph, batch, labels, options.objective);
  LayerGraph work = graph;
  for (const auto& name : graph.param_order()) {
    const auto it = analytic.find(name);
    if (it == analytic.end()) {
      throw std::invalid_argument("gradient check: no analytic gradient for '" +
                                  name + "'");
    }
    ParamCheck check;
    check.name = name;
    Tensor& p = work.params.at(name);
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double original = p[j];
      p[j] = original + options.step;
      const Probe plus = probe(work, batch, labels, options.objective);
      p[j] = original - options.step;
      const Probe minus = probe(work, batch, labels, options.objective);
      p[j] = original;
      if (plus.pattern != base.pattern || minus.pattern != base.pattern) {
        ++check.coordinates_skipped;
        continue;
      }
      const double numeric = (plus.loss - minus.loss) / (2.0 * options.step);
      const double a = it->second[j];
      const double denom =
          std::max({std::abs(a), std::abs(numeric), options.abs_floor});
      check.max_relative_error =
          std::max(check.max_relative_error, std::abs(a - numeric) / denom);
      ++check.coordinates_checked;
    }
    check.flagged = check.max_relative_error > options.tolerance;
    report.params.push_back(std::move(check));
  }
  return report;
}

GradientCheckReport check_gradients(const LayerGraph& graph,
                                    const Tensor& batch,
                                    std::span<const int> labels,
                                    const GradientCheckOptions& options) {
  const BackwardResult analytic =
      backward(graph, batch, labels, options.objective);
  return compare_to_finite_differences(graph, batch, labels, analytic.grads,
                                       options);
}

}  // namespace r2va::nn
