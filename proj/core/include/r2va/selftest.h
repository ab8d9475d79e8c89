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

#ifndef R2VA_SELFTEST_H_
#define R2VA_SELFTEST_H_

#include <cstdint>
#include <string>
#include <vector>

namespace r2va::selftest {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SelfTestReport {
  std::vector<CheckResult> checks;

  bool passed() const;
  // One "PASS|FAIL name: detail" line per check.
  std::string to_text() const;
};

// Quick numerical self-tests: finite-difference gradient checks on small
// MiniVGGs, Shapley axioms on random games, DeepSHAP completeness and
// DeepSHAP against exact Shapley values on an affine model.
SelfTestReport run_self_tests(std::uint64_t seed);

}  // namespace r2va::selftest

#endif  // R2VA_SELFTEST_H_
