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

#ifndef R2VA_GRAPH_H_
#define R2VA_GRAPH_H_

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "r2va/tensor.h"

namespace r2va::nn {

enum class LayerKind {
  kConv2d,
  kDense,
  kRelu,
  kAvgPool2d,
  kFlatten,
  kSoftmaxXentHead,
};

std::string_view layer_kind_name(LayerKind kind);

// One layer of a LayerGraph. Only the hyperparameters relevant to `kind` are
// read; parameterized layers own "<name>.weight" and "<name>.bias".
struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  std::string name;
  // conv2d
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;  // also the avgpool window
  std::size_t stride = 1;
  std::size_t padding = 0;
  // dense
  std::size_t in_features = 0;
  std::size_t out_features = 0;

  std::vector<std::string> param_names() const;
  bool has_params() const {
    return kind == LayerKind::kConv2d || kind == LayerKind::kDense;
  }

  static LayerSpec conv2d(std::string name, std::size_t in_ch,
                          std::size_t out_ch, std::size_t kernel,
                          std::size_t stride = 1, std::size_t padding = 0);
  static LayerSpec dense(std::string name, std::size_t in, std::size_t out);
  static LayerSpec relu(std::string name);
  static LayerSpec avgpool2d(std::string name, std::size_t window);
  static LayerSpec flatten(std::string name);
  static LayerSpec softmax_xent_head(std::string name);

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

using ParamMap = std::map<std::string, Tensor>;

// Ordered layer list plus named parameters. The last layer is expected to be
// a softmax_xent_head producing num_classes logits.
struct LayerGraph {
  std::vector<LayerSpec> layers;
  ParamMap params;
  Shape input_shape;  // (C, H, W)
  std::size_t num_classes = 0;

  // Parameter names in layer order (weight before bias).
  std::vector<std::string> param_order() const;
  bool is_conv_param(const std::string& name) const;

  friend bool operator==(const LayerGraph&, const LayerGraph&) = default;
};

// Per-sample output shape of every layer, i.e. result[i] is what layer i
// produces. Throws std::invalid_argument naming the offending layer when the
// graph is inconsistent or parameter tensors are missing or misshapen.
std::vector<Shape> propagate_shapes(const LayerGraph& graph);

// Validates the graph; see propagate_shapes.
void validate(const LayerGraph& graph);

// Architecture knobs for the desk-scale VGG-style backbone.
struct MiniVggOptions {
  Shape input_shape = {3, 64, 64};
  std::size_t num_classes = 7;
  // Output channels of each conv block (conv3x3 + relu + avgpool2).
  std::vector<std::size_t> conv_channels = {8, 16, 16};
  std::size_t hidden_units = 32;
  // Average pooling applied to the raw input before the first block.
  std::size_t stem_pool = 1;
  // Extra average pooling between the last block and the dense head.
  std::size_t head_pool = 1;

  friend bool operator==(const MiniVggOptions&, const MiniVggOptions&) = default;
};

// Builds the layer list with zero-filled parameters.
LayerGraph make_mini_vgg(const MiniVggOptions& options);

// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases, all
// values rounded to float32.
void initialize_parameters(LayerGraph& graph, std::uint64_t seed);

// Rounds every parameter to the nearest float32, the precision of the weights
// file.
void round_parameters_to_float(LayerGraph& graph);

enum class Objective {
  // Mean softmax cross-entropy over the batch.
  kSoftmaxCrossEntropy,
  // Mean of the labelled class logit; linear in the logits.
  kTargetLogit,
};

// Forward pass to logits (N, num_classes).
Tensor forward(const LayerGraph& graph, const Tensor& batch);

// Inputs seen by every layer plus the final output, so activations[i] is the
// input of layer i and activations.back() the logits.
struct ForwardTrace {
  std::vector<Tensor> activations;
  const Tensor& logits() const { return activations.back(); }
};
ForwardTrace forward_trace(const LayerGraph& graph, const Tensor& batch);

struct BackwardResult {
  double loss = 0.0;
  ParamMap grads;
  Tensor logits;
};

// Loss and gradients for every parameter. Parameters named in `frozen` get
// zero gradients without being computed, and propagation stops below the
// lowest trainable layer.
BackwardResult backward(const LayerGraph& graph, const Tensor& batch,
                        std::span<const int> labels,
                        Objective objective = Objective::kSoftmaxCrossEntropy,
                        const std::set<std::string>* frozen = nullptr);

double loss(const LayerGraph& graph, const Tensor& batch,
            std::span<const int> labels,
            Objective objective = Objective::kSoftmaxCrossEntropy);

// Backward step of a single non-relu, non-head layer with respect to its
// input (the transpose of the layer's linear map). Exposed for the DeepLIFT
// multiplier propagation.
Tensor backward_input(const LayerGraph& graph, std::size_t layer_index,
                      const Shape& input_shape, const Tensor& grad_output);

// Signs of every ReLU input for a forward pass; used to detect kink crossings.
std::vector<std::int8_t> relu_pattern(const LayerGraph& graph,
                                      const Tensor& batch);

}  // namespace r2va::nn

#endif  // R2VA_GRAPH_H_
