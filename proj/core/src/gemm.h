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

#ifndef R2VA_SRC_GEMM_H_
#define R2VA_SRC_GEMM_H_

#include <cstddef>

namespace r2va::nn::detail {

// Dense row-major products accumulated into C (m x n):
//   nn: C += A B,    A is m x k, B is k x n
//   nt: C += A B^T,  A is m x k, B is n x k
//   tn: C += A^T B,  A is k x m, B is k x n
// Single-threaded; the summation order is fixed for a given build and CPU.
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c);
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c);

}  // namespace r2va::nn::detail

#endif  // R2VA_SRC_GEMM_H_
