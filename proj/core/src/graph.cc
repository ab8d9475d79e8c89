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

#include "r2va/graph.h"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "gemm.h"
#include "r2va/rng.h"

namespace r2va::nn {

namespace {

using std::ptrdiff_t;

[[noreturn]] void layer_error(const LayerSpec& layer, std::size_t index,
                              const std::string& what) {
  throw std::invalid_argument("layer " + std::to_string(index) + " '" +
                              layer.name + "' (" +
                              std::string(layer_kind_name(layer.kind)) +
                              "): " + what);
}

std::size_t conv_out_extent(std::size_t in, std::size_t kernel,
                            std::size_t stride, std::size_t padding) {
  return (in + 2 * padding - kernel) / stride + 1;
}

// Range of output columns whose input column ox*stride + kx - padding lies in
// [0, width).
std::pair<ptrdiff_t, ptrdiff_t> valid_out_range(ptrdiff_t kx, ptrdiff_t stride,
                                                ptrdiff_t padding,
                                                ptrdiff_t width,
                                                ptrdiff_t out_width) {
  ptrdiff_t lo = 0;
  const ptrdiff_t shift = kx - padding;
  if (shift < 0) lo = (-shift + stride - 1) / stride;
  ptrdiff_t hi = out_width - 1;
  const ptrdiff_t last = width - 1 - shift;
  if (last < 0) return {0, -1};
  hi = std::min(hi, last / stride);
  return {lo, hi};
}

struct ConvGeometry {
  ptrdiff_t in_ch, out_ch, height, width, kernel, stride, padding, out_h, out_w;
};

ConvGeometry conv_geometry(const LayerSpec& layer, const Shape& in) {
  ConvGeometry g{};
  g.in_ch = static_cast<ptrdiff_t>(layer.in_channels);
  g.out_ch = static_cast<ptrdiff_t>(layer.out_channels);
  g.height = static_cast<ptrdiff_t>(in[1]);
  g.width = static_cast<ptrdiff_t>(in[2]);
  g.kernel = static_cast<ptrdiff_t>(layer.kernel);
  g.stride = static_cast<ptrdiff_t>(layer.stride);
  g.padding = static_cast<ptrdiff_t>(layer.padding);
  g.out_h = static_cast<ptrdiff_t>(
      conv_out_extent(in[1], layer.kernel, layer.stride, layer.padding));
  g.out_w = static_cast<ptrdiff_t>(
      conv_out_extent(in[2], layer.kernel, layer.stride, layer.padding));
  return g;
}

// col[(ic * k + ky) * k + kx][oy * out_w + ox], zero where the tap falls in
// the padding.
void im2col(const ConvGeometry& g, const double* in, double* col) {
  const ptrdiff_t plane_out = g.out_h * g.out_w;
  for (ptrdiff_t ic = 0; ic < g.in_ch; ++ic) {
    const double* in_plane = in + ic * g.height * g.width;
    for (ptrdiff_t ky = 0; ky < g.kernel; ++ky) {
      for (ptrdiff_t kx = 0; kx < g.kernel; ++kx) {
        double* row = col + ((ic * g.kernel + ky) * g.kernel + kx) * plane_out;
        const auto [lo, hi] = valid_out_range(kx, g.stride, g.padding, g.width, g.out_w);
        for (ptrdiff_t oy = 0; oy < g.out_h; ++oy) {
          double* dst = row + oy * g.out_w;
          const ptrdiff_t iy = oy * g.stride + ky - g.padding;
          if (iy < 0 || iy >= g.height || hi < lo) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* in_row = in_plane + iy * g.width + kx - g.padding;
          for (ptrdiff_t ox = 0; ox < lo; ++ox) dst[ox] = 0.0;
          for (ptrdiff_t ox = lo; ox <= hi; ++ox) dst[ox] = in_row[ox * g.stride];
          for (ptrdiff_t ox = hi + 1; ox < g.out_w; ++ox) dst[ox] = 0.0;
        }
      }
    }
  }
}

// Adds every column entry back onto the input position it was copied from.
void col2im_add(const ConvGeometry& g, const double* col, double* in) {
  const ptrdiff_t plane_out = g.out_h * g.out_w;
  for (ptrdiff_t ic = 0; ic < g.in_ch; ++ic) {
    double* in_plane = in + ic * g.height * g.width;
    for (ptrdiff_t ky = 0; ky < g.kernel; ++ky) {
      for (ptrdiff_t kx = 0; kx < g.kernel; ++kx) {
        const double* row = col + ((ic * g.kernel + ky) * g.kernel + kx) * plane_out;
        const auto [lo, hi] = valid_out_range(kx, g.stride, g.padding, g.width, g.out_w);
        for (ptrdiff_t oy = 0; oy < g.out_h; ++oy) {
          const ptrdiff_t iy = oy * g.stride + ky - g.padding;
          if (iy < 0 || iy >= g.height) continue;
          double* in_row = in_plane + iy * g.width + kx - g.padding;
          const double* src = row + oy * g.out_w;
          for (ptrdiff_t ox = lo; ox <= hi; ++ox) in_row[ox * g.stride] += src[ox];
        }
      }
    }
  }
}

std::size_t conv_taps(const ConvGeometry& g) {
  return static_cast<std::size_t>(g.in_ch * g.kernel * g.kernel);
}
std::size_t conv_pixels(const ConvGeometry& g) {
  return static_cast<std::size_t>(g.out_h * g.out_w);
}

void conv_forward_sample(const ConvGeometry& g, const double* in,
                         const double* weight, const double* bias, double* out,
                         std::vector<double>& col) {
  const std::size_t taps = conv_taps(g), pixels = conv_pixels(g);
  col.resize(taps * pixels);
  im2col(g, in, col.data());
  for (ptrdiff_t oc = 0; oc < g.out_ch; ++oc) {
    std::fill(out + oc * pixels, out + (oc + 1) * pixels, bias[oc]);
  }
  detail::gemm_nn(static_cast<std::size_t>(g.out_ch), pixels, taps, weight, col.data(),
                  out);
}

void conv_backward_input_sample(const ConvGeometry& g, const double* grad_out,
                                const double* weight, double* grad_in,
                                std::vector<double>& col) {
  const std::size_t taps = conv_taps(g), pixels = conv_pixels(g);
  col.assign(taps * pixels, 0.0);
  detail::gemm_tn(taps, pixels, static_cast<std::size_t>(g.out_ch), weight, grad_out,
                  col.data());
  col2im_add(g, col.data(), grad_in);
}

void conv_backward_params_sample(const ConvGeometry& g, const double* in,
                                 const double* grad_out, double* grad_weight,
                                 double* grad_bias, std::vector<double>& col) {
  const std::size_t taps = conv_taps(g), pixels = conv_pixels(g);
  const auto out_ch = static_cast<std::size_t>(g.out_ch);
  for (std::size_t oc = 0; oc < out_ch; ++oc) {
    const double* go_plane = grad_out + oc * pixels;
    double bias_sum = 0.0;
#pragma omp simd reduction(+ : bias_sum)
    for (std::size_t i = 0; i < pixels; ++i) bias_sum += go_plane[i];
    grad_bias[oc] += bias_sum;
  }
  col.resize(taps * pixels);
  im2col(g, in, col.data());
  detail::gemm_nt(out_ch, taps, pixels, grad_out, col.data(), grad_weight);
}

Shape batch_shape(std::size_t n, const Shape& per_sample) {
  Shape s = per_sample;
  s.insert(s.begin(), n);
  return s;
}

const Tensor& param(const LayerGraph& graph, const std::string& name) {
  const auto it = graph.params.find(name);
  if (it == graph.params.end()) {
    throw std::invalid_argument("missing parameter '" + name + "'");
  }
  return it->second;
}

// Output of layer `index` for a batch whose per-sample input shape is `in`.
Tensor layer_forward(const LayerGraph& graph, std::size_t index,
                     const Shape& in, const Tensor& x) {
  const LayerSpec& layer = graph.layers[index];
  const std::size_t n = x.dim(0);
  switch (layer.kind) {
    case LayerKind::kConv2d: {
      const ConvGeometry g = conv_geometry(layer, in);
      const Tensor& w = param(graph, layer.name + ".weight");
      const Tensor& b = param(graph, layer.name + ".bias");
      Tensor out(batch_shape(n, {layer.out_channels,
                                 static_cast<std::size_t>(g.out_h),
                                 static_cast<std::size_t>(g.out_w)}));
      const std::size_t in_stride = shape_size(in);
      const std::size_t out_stride = out.size() / n;
      std::vector<double> col;
      for (std::size_t s = 0; s < n; ++s) {
        conv_forward_sample(g, x.data() + s * in_stride, w.data(), b.data(),
                            out.data() + s * out_stride, col);
      }
      return out;
    }
    case LayerKind::kDense: {
      const Tensor& w = param(graph, layer.name + ".weight");
      const Tensor& b = param(graph, layer.name + ".bias");
      const std::size_t fin = layer.in_features, fout = layer.out_features;
      Tensor out({n, fout});
      for (std::size_t s = 0; s < n; ++s) {
        const double* xs = x.data() + s * fin;
        for (std::size_t o = 0; o < fout; ++o) {
          const double* row = w.data() + o * fin;
          double acc = 0.0;
#pragma omp simd reduction(+ : acc)
          for (std::size_t f = 0; f < fin; ++f) acc += row[f] * xs[f];
          acc += b[o];
          out[s * fout + o] = acc;
        }
      }
      return out;
    }
    case LayerKind::kRelu: {
      Tensor out = x;
      for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
      return out;
    }
    case LayerKind::kAvgPool2d: {
      const std::size_t c = in[0], h = in[1], w = in[2], k = layer.kernel;
      const std::size_t oh = h / k, ow = w / k;
      Tensor out({n, c, oh, ow});
      const double scale = 1.0 / static_cast<double>(k * k);
      for (std::size_t plane = 0; plane < n * c; ++plane) {
        const double* src = x.data() + plane * h * w;
        double* dst = out.data() + plane * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          for (std::size_t ox = 0; ox < ow; ++ox) {
            double acc = 0.0;
            for (std::size_t dy = 0; dy < k; ++dy) {
              const double* row = src + (oy * k + dy) * w + ox * k;
              for (std::size_t dx = 0; dx < k; ++dx) acc += row[dx];
            }
            dst[oy * ow + ox] = acc * scale;
          }
        }
      }
      return out;
    }
    case LayerKind::kFlatten:
      return x.reshaped({n, shape_size(in)});
    case LayerKind::kSoftmaxXentHead:
      return x;
  }
  layer_error(layer, index, "unknown layer kind");
}

}  // namespace

std::string_view layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kDense: return "dense";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kAvgPool2d: return "avgpool2d";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kSoftmaxXentHead: return "softmax_xent_head";
  }
  return "unknown";
}

std::vector<std::string> LayerSpec::param_names() const {
  if (!has_params()) return {};
  return {name + ".weight", name + ".bias"};
}

LayerSpec LayerSpec::conv2d(std::string name, std::size_t in_ch,
                            std::size_t out_ch, std::size_t kernel,
                            std::size_t stride, std::size_t padding) {
  LayerSpec l;
  l.kind = LayerKind::kConv2d;
  l.name = std::move(name);
  l.in_channels = in_ch;
  l.out_channels = out_ch;
  l.kernel = kernel;
  l.stride = stride;
  l.padding = padding;
  return l;
}

LayerSpec LayerSpec::dense(std::string name, std::size_t in, std::size_t out) {
  LayerSpec l;
  l.kind = LayerKind::kDense;
  l.name = std::move(name);
  l.in_features = in;
  l.out_features = out;
  return l;
}

LayerSpec LayerSpec::relu(std::string name) {
  LayerSpec l;
  l.kind = LayerKind::kRelu;
  l.name = std::move(name);
  return l;
}

LayerSpec LayerSpec::avgpool2d(std::string name, std::size_t window) {
  LayerSpec l;
  l.kind = LayerKind::kAvgPool2d;
  l.name = std::move(name);
  l.kernel = window;
  l.stride = window;
  return l;
}

LayerSpec LayerSpec::flatten(std::string name) {
  LayerSpec l;
  l.kind = LayerKind::kFlatten;
  l.name = std::move(name);
  return l;
}

LayerSpec LayerSpec::softmax_xent_head(std::string name) {
  LayerSpec l;
  l.kind = LayerKind::kSoftmaxXentHead;
  l.name = std::move(name);
  return l;
}

std::vector<std::string> LayerGraph::param_order() const {
  std::vector<std::string> names;
  for (const auto& layer : layers) {
    for (auto& n : layer.param_names()) names.push_back(std::move(n));
  }
  return names;
}

bool LayerGraph::is_conv_param(const std::string& name) const {
  for (const auto& layer : layers) {
    if (layer.kind != LayerKind::kConv2d) continue;
    for (const auto& n : layer.param_names()) {
      if (n == name) return true;
    }
  }
  return false;
}

std::vector<Shape> propagate_shapes(const LayerGraph& graph) {
  if (graph.input_shape.size() != 3) {
    throw std::invalid_argument("graph input_shape must be (C, H, W), got " +
                                shape_to_string(graph.input_shape));
  }
  if (graph.num_classes == 0) {
    throw std::invalid_argument("graph num_classes must be positive");
  }
  if (graph.layers.empty()) throw std::invalid_argument("graph has no layers");

  std::vector<std::string> seen;
  std::vector<Shape> shapes;
  Shape cur = graph.input_shape;
  for (std::size_t i = 0; i < graph.layers.size(); ++i) {
    const LayerSpec& layer = graph.layers[i];
    for (const auto& name : layer.param_names()) {
      if (std::find(seen.begin(), seen.end(), name) != seen.end()) {
        layer_error(layer, i, "duplicate parameter name '" + name + "'");
      }
      seen.push_back(name);
    }
    switch (layer.kind) {
      case LayerKind::kConv2d: {
        if (cur.size() != 3) layer_error(layer, i, "expects a (C, H, W) input");
        if (cur[0] != layer.in_channels) {
          layer_error(layer, i, "expects " + std::to_string(layer.in_channels) +
                                    " input channels, got " +
                                    std::to_string(cur[0]));
        }
        if (layer.kernel == 0 || layer.stride == 0 || layer.out_channels == 0) {
          layer_error(layer, i, "kernel, stride and out_channels must be positive");
        }
        if (layer.kernel > cur[1] + 2 * layer.padding ||
            layer.kernel > cur[2] + 2 * layer.padding) {
          layer_error(layer, i, "kernel " + std::to_string(layer.kernel) +
                                    " exceeds padded input " +
                                    shape_to_string(cur));
        }
        const Shape wshape = {layer.out_channels, layer.in_channels,
                              layer.kernel, layer.kernel};
        const auto w = graph.params.find(layer.name + ".weight");
        const auto b = graph.params.find(layer.name + ".bias");
        if (w == graph.params.end() || w->second.shape() != wshape) {
          layer_error(layer, i, "weight must have shape " + shape_to_string(wshape));
        }
        if (b == graph.params.end() ||
            b->second.shape() != Shape{layer.out_channels}) {
          layer_error(layer, i, "bias must have shape (" +
                                    std::to_string(layer.out_channels) + ")");
        }
        cur = {layer.out_channels,
               conv_out_extent(cur[1], layer.kernel, layer.stride, layer.padding),
               conv_out_extent(cur[2], layer.kernel, layer.stride, layer.padding)};
        break;
      }
      case LayerKind::kDense: {
        if (cur.size() != 1) {
          layer_error(layer, i, "expects a flattened input, got " +
                                    shape_to_string(cur));
        }
        if (cur[0] != layer.in_features) {
          layer_error(layer, i, "expects " + std::to_string(layer.in_features) +
                                    " features, got " + std::to_string(cur[0]));
        }
        if (layer.out_features == 0) layer_error(layer, i, "zero out_features");
        const Shape wshape = {layer.out_features, layer.in_features};
        const auto w = graph.params.find(layer.name + ".weight");
        const auto b = graph.params.find(layer.name + ".bias");
        if (w == graph.params.end() || w->second.shape() != wshape) {
          layer_error(layer, i, "weight must have shape " + shape_to_string(wshape));
        }
        if (b == graph.params.end() ||
            b->second.shape() != Shape{layer.out_features}) {
          layer_error(layer, i, "bias must have shape (" +
                                    std::to_string(layer.out_features) + ")");
        }
        cur = {layer.out_features};
        break;
      }
      case LayerKind::kRelu:
        break;
      case LayerKind::kAvgPool2d: {
        if (cur.size() != 3) layer_error(layer, i, "expects a (C, H, W) input");
        if (layer.kernel == 0 || cur[1] % layer.kernel != 0 ||
            cur[2] % layer.kernel != 0) {
          layer_error(layer, i, "window " + std::to_string(layer.kernel) +
                                    " does not tile input " +
                                    shape_to_string(cur));
        }
        cur = {cur[0], cur[1] / layer.kernel, cur[2] / layer.kernel};
        break;
      }
      case LayerKind::kFlatten:
        cur = {shape_size(cur)};
        break;
      case LayerKind::kSoftmaxXentHead:
        if (i + 1 != graph.layers.size()) {
          layer_error(layer, i, "head must be the last layer");
        }
        if (cur != Shape{graph.num_classes}) {
          layer_error(layer, i, "expects " + std::to_string(graph.num_classes) +
                                    " logits, got " + shape_to_string(cur));
        }
        break;
    }
    shapes.push_back(cur);
  }
  if (graph.layers.back().kind != LayerKind::kSoftmaxXentHead) {
    throw std::invalid_argument("graph must end in a softmax_xent_head layer");
  }
  for (const auto& [name, tensor] : graph.params) {
    if (std::find(seen.begin(), seen.end(), name) == seen.end()) {
      throw std::invalid_argument("parameter '" + name +
                                  "' is not owned by any layer");
    }
  }
  return shapes;
}

void validate(const LayerGraph& graph) { propagate_shapes(graph); }

LayerGraph make_mini_vgg(const MiniVggOptions& options) {
  LayerGraph g;
  g.input_shape = options.input_shape;
  g.num_classes = options.num_classes;
  std::size_t channels = options.input_shape.at(0);
  std::size_t h = options.input_shape.at(1), w = options.input_shape.at(2);
  if (options.stem_pool > 1) {
    g.layers.push_back(LayerSpec::avgpool2d("stem_pool", options.stem_pool));
    h /= options.stem_pool;
    w /= options.stem_pool;
  }
  for (std::size_t b = 0; b < options.conv_channels.size(); ++b) {
    const std::string id = std::to_string(b + 1);
    const std::size_t out = options.conv_channels[b];
    g.layers.push_back(LayerSpec::conv2d("conv" + id, channels, out, 3, 1, 1));
    g.layers.push_back(LayerSpec::relu("relu" + id));
    g.layers.push_back(LayerSpec::avgpool2d("pool" + id, 2));
    channels = out;
    h /= 2;
    w /= 2;
  }
  if (options.head_pool > 1) {
    g.layers.push_back(LayerSpec::avgpool2d("head_pool", options.head_pool));
    h /= options.head_pool;
    w /= options.head_pool;
  }
  g.layers.push_back(LayerSpec::flatten("flatten"));
  const std::size_t features = channels * h * w;
  g.layers.push_back(LayerSpec::dense("fc1", features, options.hidden_units));
  g.layers.push_back(LayerSpec::relu("relu_fc1"));
  g.layers.push_back(
      LayerSpec::dense("fc2", options.hidden_units, options.num_classes));
  g.layers.push_back(LayerSpec::softmax_xent_head("head"));

  for (const auto& layer : g.layers) {
    if (layer.kind == LayerKind::kConv2d) {
      g.params[layer.name + ".weight"] =
          Tensor({layer.out_channels, layer.in_channels, layer.kernel,
                  layer.kernel});
      g.params[layer.name + ".bias"] = Tensor({layer.out_channels});
    } else if (layer.kind == LayerKind::kDense) {
      g.params[layer.name + ".weight"] =
          Tensor({layer.out_features, layer.in_features});
      g.params[layer.name + ".bias"] = Tensor({layer.out_features});
    }
  }
  validate(g);
  return g;
}

void initialize_parameters(LayerGraph& graph, std::uint64_t seed) {
  for (const auto& layer : graph.layers) {
    if (!layer.has_params()) continue;
    double fan_in, fan_out;
    if (layer.kind == LayerKind::kConv2d) {
      const double area = static_cast<double>(layer.kernel * layer.kernel);
      fan_in = static_cast<double>(layer.in_channels) * area;
      fan_out = static_cast<double>(layer.out_channels) * area;
    } else {
      fan_in = static_cast<double>(layer.in_features);
      fan_out = static_cast<double>(layer.out_features);
    }
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    const std::string wname = layer.name + ".weight";
    Rng rng(derive_seed(seed, wname));
    for (double& v : graph.params.at(wname).values()) {
      v = static_cast<float>(rng.uniform(-limit, limit));
    }
    graph.params.at(layer.name + ".bias").fill(0.0);
  }
}

void round_parameters_to_float(LayerGraph& graph) {
  for (auto& [name, tensor] : graph.params) {
    for (double& v : tensor.values()) v = static_cast<float>(v);
  }
}

ForwardTrace forward_trace(const LayerGraph& graph, const Tensor& batch) {
  const std::vector<Shape> shapes = propagate_shapes(graph);
  const Shape expected = batch_shape(batch.rank() > 0 ? batch.dim(0) : 0,
                                     graph.input_shape);
  if (batch.rank() != 4 || batch.shape() != expected) {
    throw std::invalid_argument(
        "layer 0 '" + graph.layers.front().name + "': batch shape " +
        shape_to_string(batch.shape()) + " does not match (N, " +
        shape_to_string(graph.input_shape).substr(1));
  }
  ForwardTrace trace;
  trace.activations.reserve(graph.layers.size() + 1);
  trace.activations.push_back(batch);
  for (std::size_t i = 0; i < graph.layers.size(); ++i) {
    const Shape& in = i == 0 ? graph.input_shape : shapes[i - 1];
    trace.activations.push_back(
        layer_forward(graph, i, in, trace.activations.back()));
  }
  return trace;
}

Tensor forward(const LayerGraph& graph, const Tensor& batch) {
  const std::vector<Shape> shapes = propagate_shapes(graph);
  if (batch.rank() != 4 ||
      batch.shape() != batch_shape(batch.dim(0), graph.input_shape)) {
    throw std::invalid_argument(
        "layer 0 '" + graph.layers.front().name + "': batch shape " +
        shape_to_string(batch.shape()) + " does not match (N, " +
        shape_to_string(graph.input_shape).substr(1));
  }
  Tensor cur = batch;
  for (std::size_t i = 0; i < graph.layers.size(); ++i) {
    const Shape& in = i == 0 ? graph.input_shape : shapes[i - 1];
    cur = layer_forward(graph, i, in, cur);
  }
  return cur;
}

Tensor backward_input(const LayerGraph& graph, std::size_t layer_index,
                      const Shape& input_shape, const Tensor& grad_output) {
  const LayerSpec& layer = graph.layers.at(layer_index);
  const std::size_t n = grad_output.dim(0);
  Tensor grad_in(batch_shape(n, input_shape));
  switch (layer.kind) {
    case LayerKind::kConv2d: {
      const ConvGeometry g = conv_geometry(layer, input_shape);
      const Tensor& w = param(graph, layer.name + ".weight");
      const std::size_t in_stride = shape_size(input_shape);
      const std::size_t out_stride = grad_output.size() / n;
      std::vector<double> col;
      for (std::size_t s = 0; s < n; ++s) {
        conv_backward_input_sample(g, grad_output.data() + s * out_stride,
                                   w.data(), grad_in.data() + s * in_stride, col);
      }
      return grad_in;
    }
    case LayerKind::kDense: {
      const Tensor& w = param(graph, layer.name + ".weight");
      const std::size_t fin = layer.in_features, fout = layer.out_features;
      for (std::size_t s = 0; s < n; ++s) {
        double* gi = grad_in.data() + s * fin;
        for (std::size_t o = 0; o < fout; ++o) {
          const double go = grad_output[s * fout + o];
          if (go == 0.0) continue;
          const double* row = w.data() + o * fin;
          for (std::size_t f = 0; f < fin; ++f) gi[f] += go * row[f];
        }
      }
      return grad_in;
    }
    case LayerKind::kAvgPool2d: {
      const std::size_t c = input_shape[0], h = input_shape[1], w = input_shape[2];
      const std::size_t k = layer.kernel, oh = h / k, ow = w / k;
      const double scale = 1.0 / static_cast<double>(k * k);
      for (std::size_t plane = 0; plane < n * c; ++plane) {
        const double* src = grad_output.data() + plane * oh * ow;
        double* dst = grad_in.data() + plane * h * w;
        for (std::size_t y = 0; y < h; ++y) {
          const double* go_row = src + (y / k) * ow;
          double* row = dst + y * w;
          for (std::size_t x = 0; x < w; ++x) row[x] = go_row[x / k] * scale;
        }
      }
      return grad_in;
    }
    case LayerKind::kFlatten:
    case LayerKind::kSoftmaxXentHead:
      return grad_output.reshaped(batch_shape(n, input_shape));
    case LayerKind::kRelu:
      break;
  }
  layer_error(layer, layer_index,
              "backward_input needs the layer input; use the relu rule");
}

BackwardResult backward(const LayerGraph& graph, const Tensor& batch,
                        std::span<const int> labels, Objective objective,
                        const std::set<std::string>* frozen) {
  const std::size_t n = batch.rank() > 0 ? batch.dim(0) : 0;
  if (labels.size() != n) {
    throw std::invalid_argument("backward: " + std::to_string(labels.size()) +
                                " labels for a batch of " + std::to_string(n));
  }
  for (const int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= graph.num_classes) {
      throw std::invalid_argument("backward: label " + std::to_string(y) +
                                  " outside [0, " +
                                  std::to_string(graph.num_classes) + ")");
    }
  }
  const std::vector<Shape> shapes = propagate_shapes(graph);
  ForwardTrace trace = forward_trace(graph, batch);
  const Tensor& logits = trace.logits();
  const std::size_t k = graph.num_classes;

  BackwardResult result;
  Tensor grad({n, k});
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const double* z = logits.data() + s * k;
    const auto y = static_cast<std::size_t>(labels[s]);
    if (objective == Objective::kTargetLogit) {
      total += z[y];
      grad[s * k + y] = inv_n;
      continue;
    }
    const double zmax = *std::max_element(z, z + k);
    double denom = 0.0;
    for (std::size_t c = 0; c < k; ++c) denom += std::exp(z[c] - zmax);
    const double log_denom = std::log(denom);
    total += log_denom + zmax - z[y];
    for (std::size_t c = 0; c < k; ++c) {
      const double p = std::exp(z[c] - zmax - log_denom);
      grad[s * k + c] = (p - (c == y ? 1.0 : 0.0)) * inv_n;
    }
  }
  result.loss = total * inv_n;
  result.logits = logits;

  for (const auto& name : graph.param_order()) {
    result.grads[name] = Tensor(graph.params.at(name).shape());
  }

  auto trainable = [&](const LayerSpec& layer) {
    if (!layer.has_params()) return false;
    if (!frozen) return true;
    for (const auto& name : layer.param_names()) {
      if (!frozen->count(name)) return true;
    }
    return false;
  };
  std::size_t lowest = graph.layers.size();
  for (std::size_t i = 0; i < graph.layers.size(); ++i) {
    if (trainable(graph.layers[i])) {
      lowest = i;
      break;
    }
  }

  for (std::size_t i = graph.layers.size(); i-- > 0;) {
    const LayerSpec& layer = graph.layers[i];
    const Shape& in = i == 0 ? graph.input_shape : shapes[i - 1];
    const Tensor& x = trace.activations[i];
    if (!trainable(layer)) {
      // no parameter gradients for this layer
    } else if (layer.kind == LayerKind::kConv2d) {
      const ConvGeometry g = conv_geometry(layer, in);
      Tensor& gw = result.grads.at(layer.name + ".weight");
      Tensor& gb = result.grads.at(layer.name + ".bias");
      const std::size_t in_stride = shape_size(in);
      const std::size_t out_stride = grad.size() / n;
      std::vector<double> col;
      for (std::size_t s = 0; s < n; ++s) {
        conv_backward_params_sample(g, x.data() + s * in_stride,
                                    grad.data() + s * out_stride, gw.data(),
                                    gb.data(), col);
      }
    } else if (layer.kind == LayerKind::kDense) {
      Tensor& gw = result.grads.at(layer.name + ".weight");
      Tensor& gb = result.grads.at(layer.name + ".bias");
      const std::size_t fin = layer.in_features, fout = layer.out_features;
      for (std::size_t s = 0; s < n; ++s) {
        const double* xs = x.data() + s * fin;
        for (std::size_t o = 0; o < fout; ++o) {
          const double go = grad[s * fout + o];
          gb[o] += go;
          double* row = gw.data() + o * fin;
          for (std::size_t f = 0; f < fin; ++f) row[f] += go * xs[f];
        }
      }
    }
    if (i <= lowest) break;  // nothing trainable below
    if (layer.kind == LayerKind::kRelu) {
      Tensor g = grad;
      for (std::size_t j = 0; j < g.size(); ++j) {
        if (!(x[j] > 0.0)) g[j] = 0.0;
      }
      grad = std::move(g);
    } else {
      grad = backward_input(graph, i, in, grad);
    }
  }
  if (frozen) {
    for (const auto& name : *frozen) {
      const auto it = result.grads.find(name);
      if (it != result.grads.end()) it->second.fill(0.0);
    }
  }
  return result;
}

double loss(const LayerGraph& graph, const Tensor& batch,
            std::span<const int> labels, Objective objective) {
  const Tensor logits = forward(graph, batch);
  const std::size_t n = logits.dim(0), k = graph.num_classes;
  if (labels.size() != n) throw std::invalid_argument("loss: label count");
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const double* z = logits.data() + s * k;
    const auto y = static_cast<std::size_t>(labels[s]);
    if (y >= k) throw std::invalid_argument("loss: label out of range");
    if (objective == Objective::kTargetLogit) {
      total += z[y];
      continue;
    }
    const double zmax = *std::max_element(z, z + k);
    double denom = 0.0;
    for (std::size_t c = 0; c < k; ++c) denom += std::exp(z[c] - zmax);
    total += std::log(denom) + zmax - z[y];
  }
  return total / static_cast<double>(n);
}

std::vector<std::int8_t> relu_pattern(const LayerGraph& graph,
                                      const Tensor& batch) {
  const ForwardTrace trace = forward_trace(graph, batch);
  std::vector<std::int8_t> pattern;
  for (std::size_t i = 0; i < graph.layers.size(); ++i) {
    if (graph.layers[i].kind != LayerKind::kRelu) continue;
    for (const double v : trace.activations[i].values()) {
      pattern.push_back(v > 0.0 ? 1 : 0);
    }
  }
  return pattern;
}

}  // namespace r2va::nn
