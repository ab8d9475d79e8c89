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

#include <benchmark/benchmark.h>

#include <vector>

#include "r2va/attribution.h"
#include "r2va/pipeline.h"
#include "r2va/rng.h"

namespace {

using namespace r2va;

nn::Tensor random_input(const nn::Shape& shape, std::uint64_t seed) {
  Rng rng(seed);
  nn::Tensor t(shape);
  for (double& v : t.values()) v = rng.uniform();
  return t;
}

void BM_ExactShapley(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  std::vector<double> table(std::size_t{1} << k);
  for (auto& v : table) v = rng.uniform();
  const attr::ValueFn v = [&](attr::Coalition s) {
    std::size_t m = 0;
    for (std::size_t i = 0; i < s.size(); ++i) m |= std::size_t{s[i]} << i;
    return table[m];
  };
  for (auto _ : state) benchmark::DoNotOptimize(attr::exact_shapley(v, k));
}
BENCHMARK(BM_ExactShapley)->Arg(8)->Arg(12);

void BM_SamplingShapley(benchmark::State& state) {
  constexpr std::size_t k = 8;
  const attr::ValueFn v = [](attr::Coalition s) {
    double x = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) x += s[i] * static_cast<double>(i);
    return x * x;
  };
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        attr::sampling_shapley(v, k, static_cast<std::size_t>(state.range(0)), 9));
  }
}
BENCHMARK(BM_SamplingShapley)->Arg(20000);

void BM_DeepShapPipelineModel(benchmark::State& state) {
  nn::MiniVggOptions o = pipeline::PipelineConfig::default_model();
  nn::LayerGraph g = nn::make_mini_vgg(o);
  nn::initialize_parameters(g, 1);
  const nn::Tensor x = random_input(g.input_shape, 2);
  std::vector<nn::Tensor> baselines;
  for (int i = 0; i < state.range(0); ++i) baselines.push_back(random_input(g.input_shape, 10 + i));
  const attr::FeatureGrouping grid = attr::grid_grouping(g.input_shape, 8, 8);
  for (auto _ : state) benchmark::DoNotOptimize(attr::deep_shap(g, x, baselines, 0, &grid));
}
BENCHMARK(BM_DeepShapPipelineModel)->Arg(1)->Arg(8);

}  // namespace
