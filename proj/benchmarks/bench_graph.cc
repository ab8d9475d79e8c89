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

#include "r2va/graph.h"
#include "r2va/rng.h"

namespace {

r2va::nn::Tensor random_batch(std::size_t n, std::uint64_t seed) {
  r2va::Rng rng(seed);
  r2va::nn::Tensor t({n, 3, 64, 64});
  for (double& v : t.values()) v = rng.uniform();
  return t;
}

void BM_MiniVggForward(benchmark::State& state) {
  auto graph = r2va::nn::make_mini_vgg({});
  r2va::nn::initialize_parameters(graph, 1);
  const auto batch = random_batch(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(r2va::nn::forward(graph, batch));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MiniVggForward)->Arg(1)->Arg(16);

void BM_MiniVggBackward(benchmark::State& state) {
  auto graph = r2va::nn::make_mini_vgg({});
  r2va::nn::initialize_parameters(graph, 1);
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const auto batch = random_batch(n, 3);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(r2va::nn::backward(graph, batch, labels));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MiniVggBackward)->Arg(16);

}  // namespace

BENCHMARK_MAIN();
