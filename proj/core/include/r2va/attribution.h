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

#ifndef R2VA_ATTRIBUTION_H_
#define R2VA_ATTRIBUTION_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "r2va/graph.h"
#include "r2va/image.h"

namespace r2va::attr {

// Membership flags of a coalition, one per player (1 = in the coalition).
using Coalition = std::span<const std::uint8_t>;
using ValueFn = std::function<double(Coalition)>;

inline constexpr std::size_t kMaxExactPlayers = 20;

// Exact Shapley values by enumerating all 2^k coalitions. Throws
// std::invalid_argument when k is 0 or above kMaxExactPlayers.
std::vector<double> exact_shapley(const ValueFn& value, std::size_t k);

// Permutation-sampling estimate: mean marginal contribution over
// n_permutations uniformly random orderings.
std::vector<double> sampling_shapley(const ValueFn& value, std::size_t k,
                                     std::size_t n_permutations, std::uint64_t seed);

// Partition of the input coordinates (C*H*W, row-major) into cells.
struct FeatureGrouping {
  std::vector<std::string> names;
  std::vector<std::size_t> cell_of;  // per input coordinate

  std::size_t num_cells() const { return names.size(); }
  // Throws std::invalid_argument unless every coordinate of an input with
  // `input_size` elements maps to a valid cell and every cell is non-empty.
  void validate(std::size_t input_size) const;
};

// rows x cols spatial grid spanning all channels; cell (r, c) is named
// "r<r>c<c>" and covers pixels with y*rows/H == r and x*cols/W == c.
FeatureGrouping grid_grouping(const nn::Shape& chw, std::size_t rows, std::size_t cols);
// One cell per input coordinate.
FeatureGrouping identity_grouping(std::size_t input_size);

// Masking game: v(S) is the target logit on the input that takes x on the
// cells in S and the baseline elsewhere. The returned function refers to
// `graph`, which must outlive it.
ValueFn model_value_fn(const nn::LayerGraph& graph, const nn::Tensor& x,
                       const nn::Tensor& baseline, const FeatureGrouping& grouping,
                       std::size_t target_class);

struct AttributionMap {
  std::size_t target_class = 0;
  nn::Tensor values{nn::Shape{1}};            // same shape as the input
  nn::Tensor baseline_summary{nn::Shape{1}};  // mean baseline
  double target_logit = 0.0;                  // f_c(x)
  double mean_baseline_logit = 0.0;           // mean_b f_c(b)
  double completeness_residual = 0.0;  // sum(values) - (f_c(x) - mean_b f_c(b))
  std::vector<double> per_baseline_residuals;
  std::vector<double> cell_values;  // filled when a grouping was supplied

  double delta() const { return target_logit - mean_baseline_logit; }
};

struct DeepShapOptions {
  double completeness_tolerance = 1e-4;  // relative to max(1, |delta logit|)
  double rescale_epsilon = 1e-7;
};

// DeepSHAP with the DeepLIFT rescale rule, averaged over baselines. x and
// every baseline have the graph's per-sample input shape (C, H, W). Throws
// std::invalid_argument on shape mismatches or unsupported layers, and
// std::logic_error when a baseline violates the completeness tolerance.
AttributionMap deep_shap(const nn::LayerGraph& graph, const nn::Tensor& x,
                         std::span<const nn::Tensor> baselines, std::size_t target_class,
                         const FeatureGrouping* grouping = nullptr,
                         const DeepShapOptions& options = {});

// Signed overlay. Every pixel first gets the neutral tint
// 0.75 * underlay + 0.25 * 128; pixels with attribution v are then blended
// toward red (v > 0) or blue (v < 0) with opacity |v| / max|v|. A pixel's
// value is the channel sum of the map, or its cell's total when a grouping is
// given (cells are looked up through channel 0).
Image render_heatmap(const AttributionMap& map, const Image& underlay,
                     const FeatureGrouping* grouping = nullptr);

// File form: text header, then the values as raw little-endian float32.
//   R2VA-ATTRIBUTION 1
//   shape <C> <H> <W>
//   target_class <c>
//   residual <r>
//   end
std::vector<std::uint8_t> serialize_attribution(const AttributionMap& map);
AttributionMap parse_attribution(std::span<const std::uint8_t> bytes);
void write_attribution_file(const std::filesystem::path& path, const AttributionMap& map);
AttributionMap read_attribution_file(const std::filesystem::path& path);

}  // namespace r2va::attr

#endif  // R2VA_ATTRIBUTION_H_
