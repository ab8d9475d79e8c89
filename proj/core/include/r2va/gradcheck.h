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

#ifndef R2VA_GRADCHECK_H_
#define R2VA_GRADCHECK_H_

#include <span>
#include <string>
#include <vector>

#include "r2va/graph.h"

namespace r2va::nn {

struct GradientCheckOptions {
  double step = 1e-3;
  double tolerance = 1e-3;
  Objective objective = Objective::kSoftmaxCrossEntropy;
  // Relative error denominator is max(|analytic|, |numeric|, abs_floor).
  double abs_floor = 1e-8;
};

struct ParamCheck {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  // Coordinates whose +-step perturbation flips a ReLU input sign.
  std::size_t coordinates_skipped = 0;
  bool flagged = false;
};

struct GradientCheckReport {
  double step = 0.0;
  double tolerance = 0.0;
  std::vector<ParamCheck> params;

  bool passed() const;
  double max_relative_error() const;
  std::string to_string() const;
};

// Central differences over every coordinate of every parameter against the
// analytic gradient from backward().
GradientCheckReport check_gradients(const LayerGraph& graph,
                                    const Tensor& batch,
                                    std::span<const int> labels,
                                    const GradientCheckOptions& options = {});

// Same comparison against caller-supplied analytic gradients.
GradientCheckReport compare_to_finite_differences(
    const LayerGraph& graph, const Tensor& batch, std::span<const int> labels,
    const ParamMap& analytic, const GradientCheckOptions& options = {});

}  // namespace r2va::nn

#endif  // R2VA_GRADCHECK_H_
