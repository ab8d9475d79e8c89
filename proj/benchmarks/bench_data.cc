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

#include "r2va/augment.h"
#include "r2va/scenegen.h"

namespace {

using namespace r2va;

void BM_RenderScene(benchmark::State& state) {
  const scene::SceneConfig c =
      state.range(0) ? scene::default_venv_config() : scene::default_renv_config();
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(scene::render(GestureClass::kPalm, c, ++seed, nullptr));
  }
}
BENCHMARK(BM_RenderScene)->Arg(0)->Arg(1);

void BM_Augment(benchmark::State& state) {
  const LabeledImage item =
      scene::render(GestureClass::kOk, scene::default_renv_config(), 3, nullptr);
  const augment::AugmentSpec spec;
  Rng rng(5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(augment::apply(item, spec, augment::draw_parameters(spec, rng)));
  }
}
BENCHMARK(BM_Augment);

}  // namespace
