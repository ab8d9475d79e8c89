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

#include "r2va/attribution.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "r2va/fs_util.h"
#include "r2va/rng.h"

namespace r2va::attr {

using nn::LayerKind;
using nn::Shape;
using nn::Tensor;

std::vector<double> exact_shapley(const ValueFn& value, std::size_t k) {
  if (k == 0) throw std::invalid_argument("exact_shapley: need at least one player");
  if (k > kMaxExactPlayers) {
    const double evals = std::ldexp(1.0, static_cast<int>(k));
    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "exact_shapley: k = %zu exceeds the enumeration bound %zu "
                  "(would need 2^%zu = %.0f value evaluations); use sampling_shapley",
                  k, kMaxExactPlayers, k, evals);
    throw std::invalid_argument(buf);
  }
  const std::size_t n = std::size_t{1} << k;
  std::vector<double> v(n);
  std::vector<std::uint8_t> members(k);
  for (std::size_t mask = 0; mask < n; ++mask) {
    for (std::size_t i = 0; i < k; ++i) members[i] = (mask >> i) & 1u;
    v[mask] = value(members);
  }
  // weight[s] = s! (k - s - 1)! / k! = 1 / (k * C(k - 1, s))
  std::vector<double> weight(k);
  double binom = 1.0;
  for (std::size_t s = 0; s < k; ++s) {
    weight[s] = 1.0 / (static_cast<double>(k) * binom);
    binom = binom * static_cast<double>(k - 1 - s) / static_cast<double>(s + 1);
  }
  std::vector<double> phi(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    double acc = 0.0;
    for (std::size_t mask = 0; mask < n; ++mask) {
      if (mask & bit) continue;
      const auto s = static_cast<std::size_t>(std::popcount(mask));
      acc += weight[s] * (v[mask | bit] - v[mask]);
    }
    phi[i] = acc;
  }
  return phi;
}

std::vector<double> sampling_shapley(const ValueFn& value, std::size_t k,
                                     std::size_t n_permutations, std::uint64_t seed) {
  if (k == 0) throw std::invalid_argument("sampling_shapley: need at least one player");
  if (n_permutations == 0) {
    throw std::invalid_argument("sampling_shapley: n_permutations must be >= 1");
  }
  Rng rng(seed);
  std::vector<std::size_t> order(k);
  std::vector<std::uint8_t> members(k, 0);
  const double empty_value = value(members);
  std::vector<double> phi(k, 0.0);
  for (std::size_t p = 0; p < n_permutations; ++p) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    std::fill(members.begin(), members.end(), 0);
    double prev = empty_value;
    for (const std::size_t player : order) {
      members[player] = 1;
      const double cur = value(members);
      phi[player] += cur - prev;
      prev = cur;
    }
  }
  for (double& x : phi) x /= static_cast<double>(n_permutations);
  return phi;
}

void FeatureGrouping::validate(std::size_t input_size) const {
  if (names.empty()) throw std::invalid_argument("grouping: no cells");
  if (cell_of.size() != input_size) {
    throw std::invalid_argument("grouping: covers " + std::to_string(cell_of.size()) +
                                " coordinates, input has " + std::to_string(input_size));
  }
  std::vector<std::size_t> count(names.size(), 0);
  for (const std::size_t c : cell_of) {
    if (c >= names.size()) {
      throw std::invalid_argument("grouping: cell index " + std::to_string(c) +
                                  " out of range");
    }
    ++count[c];
  }
  for (std::size_t c = 0; c < count.size(); ++c) {
    if (count[c] == 0) throw std::invalid_argument("grouping: cell '" + names[c] + "' is empty");
  }
}

FeatureGrouping grid_grouping(const Shape& chw, std::size_t rows, std::size_t cols) {
  if (chw.size() != 3) throw std::invalid_argument("grid_grouping: expected (C, H, W)");
  const std::size_t c = chw[0], h = chw[1], w = chw[2];
  if (rows == 0 || cols == 0 || rows > h || cols > w) {
    throw std::invalid_argument("grid_grouping: grid " + std::to_string(rows) + "x" +
                                std::to_string(cols) + " does not fit " +
                                nn::shape_to_string(chw));
  }
  FeatureGrouping g;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t q = 0; q < cols; ++q) {
      g.names.push_back("r" + std::to_string(r) + "c" + std::to_string(q));
    }
  }
  g.cell_of.resize(c * h * w);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        g.cell_of[(ch * h + y) * w + x] = (y * rows / h) * cols + x * cols / w;
      }
    }
  }
  return g;
}

FeatureGrouping identity_grouping(std::size_t input_size) {
  FeatureGrouping g;
  g.cell_of.resize(input_size);
  for (std::size_t i = 0; i < input_size; ++i) {
    g.names.push_back("x" + std::to_string(i));
    g.cell_of[i] = i;
  }
  return g;
}

namespace {

void check_input(const nn::LayerGraph& graph, const Tensor& t, const char* what) {
  if (t.shape() != graph.input_shape) {
    throw std::invalid_argument(std::string(what) + " has shape " +
                                nn::shape_to_string(t.shape()) + ", model expects " +
                                nn::shape_to_string(graph.input_shape));
  }
}

void check_target(const nn::LayerGraph& graph, std::size_t target) {
  if (target >= graph.num_classes) {
    throw std::invalid_argument("target class " + std::to_string(target) +
                                " outside [0, " + std::to_string(graph.num_classes) + ")");
  }
}

Tensor as_batch(const Tensor& t) {
  Shape s = t.shape();
  s.insert(s.begin(), 1);
  return t.reshaped(std::move(s));
}

}  // namespace

ValueFn model_value_fn(const nn::LayerGraph& graph, const Tensor& x,
                       const Tensor& baseline, const FeatureGrouping& grouping,
                       std::size_t target_class) {
  check_input(graph, x, "model_value_fn: input");
  check_input(graph, baseline, "model_value_fn: baseline");
  check_target(graph, target_class);
  grouping.validate(x.size());
  return [&graph, x, baseline, grouping, target_class](Coalition s) {
    if (s.size() != grouping.num_cells()) {
      throw std::invalid_argument("masking game: coalition has " + std::to_string(s.size()) +
                                  " flags for " + std::to_string(grouping.num_cells()) +
                                  " cells");
    }
    Tensor composite = baseline;
    for (std::size_t i = 0; i < composite.size(); ++i) {
      if (s[grouping.cell_of[i]]) composite[i] = x[i];
    }
    const Tensor logits = nn::forward(graph, as_batch(composite));
    return logits[target_class];
  };
}

AttributionMap deep_shap(const nn::LayerGraph& graph, const Tensor& x,
                         std::span<const Tensor> baselines, std::size_t target_class,
                         const FeatureGrouping* grouping, const DeepShapOptions& options) {
  if (baselines.empty()) throw std::invalid_argument("deep_shap: need at least one baseline");
  check_input(graph, x, "deep_shap: input");
  for (const auto& b : baselines) check_input(graph, b, "deep_shap: baseline");
  check_target(graph, target_class);
  if (grouping) grouping->validate(x.size());
  for (std::size_t i = 0; i < graph.layers.size(); ++i) {
    const auto& layer = graph.layers[i];
    const bool last = i + 1 == graph.layers.size();
    const bool ok = layer.kind == LayerKind::kConv2d || layer.kind == LayerKind::kDense ||
                    layer.kind == LayerKind::kRelu || layer.kind == LayerKind::kAvgPool2d ||
                    layer.kind == LayerKind::kFlatten ||
                    (last && layer.kind == LayerKind::kSoftmaxXentHead);
    if (!ok) {
      throw std::invalid_argument("deep_shap: layer " + std::to_string(i) + " '" + layer.name +
                                  "' (" + std::string(nn::layer_kind_name(layer.kind)) +
                                  ") is not supported by the rescale rule");
    }
  }
  const std::vector<Shape> shapes = nn::propagate_shapes(graph);
  const std::size_t nb = baselines.size();

  // Row 0 is x, rows 1..nb the baselines.
  std::vector<Tensor> rows;
  rows.reserve(nb + 1);
  rows.push_back(x);
  rows.insert(rows.end(), baselines.begin(), baselines.end());
  const nn::ForwardTrace trace = nn::forward_trace(graph, nn::stack(rows));
  const Tensor& logits = trace.logits();
  const std::size_t k = graph.num_classes;

  Tensor mult({nb, k}, 0.0);
  for (std::size_t j = 0; j < nb; ++j) mult[j * k + target_class] = 1.0;

  for (std::size_t i = graph.layers.size(); i-- > 0;) {
    const auto& layer = graph.layers[i];
    const Shape& in = i == 0 ? graph.input_shape : shapes[i - 1];
    if (layer.kind == LayerKind::kRelu) {
      const Tensor& act = trace.activations[i];
      const std::size_t per = mult.size() / nb;
      for (std::size_t j = 0; j < nb; ++j) {
        for (std::size_t u = 0; u < per; ++u) {
          const double xv = act[u];
          const double bv = act[(j + 1) * per + u];
          const double d = xv - bv;
          double m;
          if (std::abs(d) < options.rescale_epsilon) {
            m = xv > 0.0 ? 1.0 : 0.0;
          } else {
            m = (std::max(xv, 0.0) - std::max(bv, 0.0)) / d;
          }
          mult[j * per + u] *= m;
        }
      }
    } else {
      mult = nn::backward_input(graph, i, in, mult);
    }
  }

  AttributionMap out;
  out.target_class = target_class;
  out.values = Tensor(x.shape(), 0.0);
  out.baseline_summary = Tensor(x.shape(), 0.0);
  out.target_logit = logits[target_class];
  const std::size_t n = x.size();
  const double inv = 1.0 / static_cast<double>(nb);
  double baseline_logit_sum = 0.0;
  for (std::size_t j = 0; j < nb; ++j) {
    const Tensor& b = baselines[j];
    const double fb = logits[(j + 1) * k + target_class];
    baseline_logit_sum += fb;
    double sum = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
      const double a = mult[j * n + u] * (x[u] - b[u]);
      sum += a;
      out.values[u] += a;
      out.baseline_summary[u] += b[u];
    }
    const double delta = out.target_logit - fb;
    const double residual = sum - delta;
    out.per_baseline_residuals.push_back(residual);
    const double bound = options.completeness_tolerance * std::max(1.0, std::abs(delta));
    if (!(std::abs(residual) <= bound)) {
      char buf[200];
      std::snprintf(buf, sizeof(buf),
                    "deep_shap: completeness violated for baseline %zu: residual %.3g "
                    "exceeds %.3g (delta logit %.6g)",
                    j, residual, bound, delta);
      throw std::logic_error(buf);
    }
  }
  for (std::size_t u = 0; u < n; ++u) {
    out.values[u] *= inv;
    out.baseline_summary[u] *= inv;
  }
  out.mean_baseline_logit = baseline_logit_sum * inv;
  double total = 0.0;
  for (std::size_t u = 0; u < n; ++u) total += out.values[u];
  out.completeness_residual = total - out.delta();
  if (grouping) {
    out.cell_values.assign(grouping->num_cells(), 0.0);
    for (std::size_t u = 0; u < n; ++u) out.cell_values[grouping->cell_of[u]] += out.values[u];
  }
  return out;
}

Image render_heatmap(const AttributionMap& map, const Image& underlay,
                     const FeatureGrouping* grouping) {
  const Shape& s = map.values.shape();
  if (s.size() != 3 || s[1] != static_cast<std::size_t>(underlay.height) ||
      s[2] != static_cast<std::size_t>(underlay.width) || underlay.channels != 3) {
    throw std::invalid_argument("render_heatmap: map " + nn::shape_to_string(s) +
                                " does not match a " + std::to_string(underlay.width) + "x" +
                                std::to_string(underlay.height) + " RGB underlay");
  }
  const std::size_t c = s[0], h = s[1], w = s[2];
  std::vector<double> pixel(h * w, 0.0);
  if (grouping) {
    grouping->validate(map.values.size());
    std::vector<double> cells(grouping->num_cells(), 0.0);
    for (std::size_t u = 0; u < map.values.size(); ++u) {
      cells[grouping->cell_of[u]] += map.values[u];
    }
    for (std::size_t p = 0; p < h * w; ++p) pixel[p] = cells[grouping->cell_of[p]];
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t p = 0; p < h * w; ++p) pixel[p] += map.values[ch * h * w + p];
    }
  }
  double peak = 0.0;
  for (const double v : pixel) peak = std::max(peak, std::abs(v));

  Image out(underlay.width, underlay.height, 3);
  for (std::size_t p = 0; p < h * w; ++p) {
    const double alpha = peak > 0.0 ? std::abs(pixel[p]) / peak : 0.0;
    const double target[3] = {pixel[p] > 0.0 ? 255.0 : 0.0, 0.0,
                              pixel[p] < 0.0 ? 255.0 : 0.0};
    for (int k = 0; k < 3; ++k) {
      const double neutral = 0.75 * underlay.pixels[p * 3 + k] + 0.25 * 128.0;
      const double v = (1.0 - alpha) * neutral + alpha * target[k];
      out.pixels[p * 3 + k] =
          static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
    }
  }
  return out;
}

std::vector<std::uint8_t> serialize_attribution(const AttributionMap& map) {
  const Shape& s = map.values.shape();
  if (s.size() != 3) throw std::invalid_argument("serialize_attribution: expected (C, H, W)");
  char residual[64];
  std::snprintf(residual, sizeof(residual), "%.17g", map.completeness_residual);
  std::ostringstream header;
  header << "R2VA-ATTRIBUTION 1\n"
         << "shape " << s[0] << ' ' << s[1] << ' ' << s[2] << '\n'
         << "target_class " << map.target_class << '\n'
         << "residual " << residual << '\n'
         << "end\n";
  const std::string text = header.str();
  std::vector<std::uint8_t> out(text.begin(), text.end());
  for (const double v : map.values.values()) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
  }
  return out;
}

AttributionMap parse_attribution(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() {
    const auto* begin = bytes.data() + pos;
    const auto* end = bytes.data() + bytes.size();
    const auto* nl = std::find(begin, end, std::uint8_t{'\n'});
    if (nl == end) throw std::runtime_error("attribution file: truncated header");
    pos += static_cast<std::size_t>(nl - begin) + 1;
    return std::string(reinterpret_cast<const char*>(begin), static_cast<std::size_t>(nl - begin));
  };
  if (next_line() != "R2VA-ATTRIBUTION 1") {
    throw std::runtime_error("attribution file: bad magic line");
  }
  AttributionMap map;
  Shape shape;
  bool have_shape = false;
  for (;;) {
    const std::string line = next_line();
    if (line == "end") break;
    std::istringstream is(line);
    std::string key;
    is >> key;
    if (key == "shape") {
      shape.assign(3, 0);
      is >> shape[0] >> shape[1] >> shape[2];
      have_shape = true;
    } else if (key == "target_class") {
      is >> map.target_class;
    } else if (key == "residual") {
      std::string v;
      is >> v;
      map.completeness_residual = std::stod(v);
    } else {
      throw std::runtime_error("attribution file: unknown header key '" + key + "'");
    }
    if (is.fail()) throw std::runtime_error("attribution file: bad header line '" + line + "'");
  }
  if (!have_shape) throw std::runtime_error("attribution file: missing shape");
  const std::size_t n = nn::shape_size(shape);
  if (bytes.size() - pos != 4 * n) {
    throw std::runtime_error("attribution file: expected " + std::to_string(4 * n) +
                             " data bytes, found " + std::to_string(bytes.size() - pos));
  }
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= std::uint32_t{bytes[pos + 4 * i + b]} << (8 * b);
    values[i] = std::bit_cast<float>(bits);
  }
  map.values = Tensor(shape, std::move(values));
  map.baseline_summary = Tensor(shape, 0.0);
  return map;
}

void write_attribution_file(const std::filesystem::path& path, const AttributionMap& map) {
  write_file_atomic(path, serialize_attribution(map));
}

AttributionMap read_attribution_file(const std::filesystem::path& path) {
  try {
    return parse_attribution(read_file_bytes(path));
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace r2va::attr
