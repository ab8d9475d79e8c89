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

#ifndef R2VA_TESTS_TEST_SUPPORT_H_
#define R2VA_TESTS_TEST_SUPPORT_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "r2va/graph.h"
#include "r2va/rng.h"
#include "r2va/tensor.h"

namespace r2va::testing {

inline nn::Tensor random_tensor(const nn::Shape& shape, std::uint64_t seed,
                                double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  nn::Tensor t(shape);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Small MiniVGG so finite differences stay cheap.
inline nn::MiniVggOptions small_vgg_options(std::size_t hw = 8) {
  nn::MiniVggOptions o;
  o.input_shape = {3, hw, hw};
  o.num_classes = 4;
  o.conv_channels = {3, 4};
  o.hidden_units = 5;
  return o;
}

inline nn::LayerGraph random_graph(const nn::MiniVggOptions& options,
                                   std::uint64_t seed) {
  nn::LayerGraph g = nn::make_mini_vgg(options);
  nn::initialize_parameters(g, seed);
  Rng rng(seed ^ 0x5bd1e995u);
  for (auto& [name, t] : g.params) {
    if (name.ends_with(".bias")) {
      for (double& v : t.values()) v = rng.uniform(-0.1, 0.1);
    }
  }
  return g;
}

// Affine-only graph: flatten -> dense -> head.
inline nn::LayerGraph linear_graph(const nn::Shape& chw, std::size_t classes,
                                   std::uint64_t seed) {
  nn::LayerGraph g;
  g.input_shape = chw;
  g.num_classes = classes;
  const std::size_t n = nn::shape_size(chw);
  g.layers = {nn::LayerSpec::flatten("flat"),
              nn::LayerSpec::dense("fc", n, classes),
              nn::LayerSpec::softmax_xent_head("head")};
  g.params["fc.weight"] = random_tensor({classes, n}, seed);
  g.params["fc.bias"] = random_tensor({classes}, seed + 1);
  return g;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    Rng rng(std::hash<std::string>{}(tag) ^
            static_cast<std::uint64_t>(
                std::filesystem::file_time_type::clock::now().time_since_epoch().count()));
    path_ = std::filesystem::temp_directory_path() /
            ("r2va_" + tag + "_" + std::to_string(rng.next_u64()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace r2va::testing

#endif  // R2VA_TESTS_TEST_SUPPORT_H_
