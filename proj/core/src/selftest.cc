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

#include "r2va/selftest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "r2va/attribution.h"
#include "r2va/gradcheck.h"
#include "r2va/graph.h"
#include "r2va/rng.h"

namespace r2va::selftest {

bool SelfTestReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::string SelfTestReport::to_text() const {
  std::string out;
  for (const auto& c : checks) {
    out += (c.passed ? "PASS " : "FAIL ") + c.name + ": " + c.detail + "\n";
  }
  out += passed() ? "all self-tests passed\n" : "self-tests FAILED\n";
  return out;
}

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

nn::Tensor random_tensor(const nn::Shape& shape, Rng& rng) {
  nn::Tensor t(shape);
  for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

nn::LayerGraph random_vgg(Rng& rng) {
  nn::MiniVggOptions o;
  o.input_shape = {3, 8, 8};
  o.num_classes = 4;
  o.conv_channels = {3, 4};
  o.hidden_units = 5;
  nn::LayerGraph g = nn::make_mini_vgg(o);
  nn::initialize_parameters(g, rng.next_u64());
  for (auto& [name, t] : g.params) {
    if (name.ends_with(".bias")) {
      for (double& v : t.values()) v = rng.uniform(-0.1, 0.1);
    }
  }
  return g;
}

CheckResult gradients(Rng& rng) {
  constexpr int kModels = 3;
  double worst = 0.0;
  bool ok = true;
  for (int m = 0; m < kModels; ++m) {
    const nn::LayerGraph g = random_vgg(rng);
    const nn::Tensor batch = random_tensor({2, 3, 8, 8}, rng);
    const std::vector<int> labels{static_cast<int>(rng.uniform_int(0, 3)),
                                  static_cast<int>(rng.uniform_int(0, 3))};
    const nn::GradientCheckReport r = nn::check_gradients(g, batch, labels);
    worst = std::max(worst, r.max_relative_error());
    ok = ok && r.passed();
  }
  return {"gradient_check", ok,
          std::to_string(kModels) + " MiniVGGs, max relative error " + sci(worst)};
}

CheckResult shapley_axioms(Rng& rng) {
  constexpr int kGames = 10;
  double worst = 0.0;
  for (int n = 0; n < kGames; ++n) {
    const auto k = static_cast<std::size_t>(rng.uniform_int(2, 8));
    const std::size_t d = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(k) - 1));
    const double dummy_gain = rng.uniform(-1.0, 1.0);
    std::vector<double> t1(std::size_t{1} << k), t2(t1.size());
    for (auto& v : t1) v = rng.uniform(-1.0, 1.0);
    for (auto& v : t2) v = rng.uniform(-1.0, 1.0);
    auto mask_of = [](attr::Coalition s) {
      std::size_t m = 0;
      for (std::size_t i = 0; i < s.size(); ++i) m |= std::size_t{s[i]} << i;
      return m;
    };
    // Player d is a dummy worth `dummy_gain` in v; w is arbitrary.
    auto v = [&](attr::Coalition s) {
      const std::size_t m = mask_of(s);
      return t1[m & ~(std::size_t{1} << d)] + (s[d] ? dummy_gain : 0.0);
    };
    auto w = [&](attr::Coalition s) { return t2[mask_of(s)]; };
    const double a = rng.uniform(-2.0, 2.0), b = rng.uniform(-2.0, 2.0);
    auto mix = [&](attr::Coalition s) { return a * v(s) + b * w(s); };
    const std::vector<double> pv = attr::exact_shapley(v, k);
    const std::vector<double> pw = attr::exact_shapley(w, k);
    const std::vector<double> pm = attr::exact_shapley(mix, k);
    std::vector<std::uint8_t> none(k, 0), all(k, 1);
    double sum = 0.0;
    for (double x : pv) sum += x;
    worst = std::max(worst, std::abs(sum - (v(all) - v(none))));
    worst = std::max(worst, std::abs(pv[d] - dummy_gain));
    for (std::size_t i = 0; i < k; ++i) {
      worst = std::max(worst, std::abs(pm[i] - (a * pv[i] + b * pw[i])));
    }
    // Players 0 and 1 made symmetric by canonicalizing the coalition.
    auto sym = [&](attr::Coalition s) {
      std::size_t m = mask_of(s);
      if (((m >> 0) & 1) != ((m >> 1) & 1)) m = (m | 1) & ~std::size_t{2};
      return t2[m];
    };
    const std::vector<double> ps = attr::exact_shapley(sym, k);
    worst = std::max(worst, std::abs(ps[0] - ps[1]));
  }
  return {"shapley_axioms", worst <= 1e-9,
          std::to_string(kGames) + " games, max axiom violation " + sci(worst)};
}

CheckResult deep_shap_completeness(Rng& rng) {
  constexpr int kPairs = 10;
  double worst = 0.0;
  const nn::LayerGraph g = random_vgg(rng);
  for (int n = 0; n < kPairs; ++n) {
    const nn::Tensor x = random_tensor({3, 8, 8}, rng);
    const std::vector<nn::Tensor> base{random_tensor({3, 8, 8}, rng)};
    const auto target = static_cast<std::size_t>(rng.uniform_int(0, 3));
    attr::DeepShapOptions opt;
    opt.completeness_tolerance = 1e300;
    const attr::AttributionMap m = attr::deep_shap(g, x, base, target, nullptr, opt);
    worst = std::max(worst, std::abs(m.completeness_residual) / std::max(1.0, std::abs(m.delta())));
  }
  return {"deepshap_completeness", worst <= 1e-4,
          std::to_string(kPairs) + " pairs, max relative residual " + sci(worst)};
}

CheckResult deep_shap_vs_exact(Rng& rng) {
  nn::LayerGraph g;
  g.input_shape = {1, 4, 4};
  g.num_classes = 3;
  g.layers = {nn::LayerSpec::flatten("flat"), nn::LayerSpec::dense("fc", 16, 3),
              nn::LayerSpec::softmax_xent_head("head")};
  g.params["fc.weight"] = random_tensor({3, 16}, rng);
  g.params["fc.bias"] = random_tensor({3}, rng);
  const attr::FeatureGrouping grid = attr::grid_grouping(g.input_shape, 2, 3);
  const nn::Tensor x = random_tensor(g.input_shape, rng);
  const nn::Tensor b = random_tensor(g.input_shape, rng);
  const attr::AttributionMap m = attr::deep_shap(g, x, std::span<const nn::Tensor>(&b, 1), 1, &grid);
  const std::vector<double> exact =
      attr::exact_shapley(attr::model_value_fn(g, x, b, grid, 1), grid.num_cells());
  double worst = 0.0;
  for (std::size_t c = 0; c < exact.size(); ++c) {
    worst = std::max(worst, std::abs(m.cell_values[c] - exact[c]));
  }
  return {"deepshap_vs_exact", worst <= 1e-5,
          std::to_string(exact.size()) + " cells, max difference " + sci(worst)};
}

}  // namespace

SelfTestReport run_self_tests(std::uint64_t seed) {
  Rng rng(seed);
  SelfTestReport r;
  auto guarded = [&](const char* name, CheckResult (*fn)(Rng&)) {
    try {
      r.checks.push_back(fn(rng));
    } catch (const std::exception& e) {
      r.checks.push_back({name, false, std::string("threw: ") + e.what()});
    }
  };
  guarded("gradient_check", gradients);
  guarded("shapley_axioms", shapley_axioms);
  guarded("deepshap_completeness", deep_shap_completeness);
  guarded("deepshap_vs_exact", deep_shap_vs_exact);
  return r;
}

}  // namespace r2va::selftest
