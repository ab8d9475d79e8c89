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

#ifndef R2VA_WEIGHTS_IO_H_
#define R2VA_WEIGHTS_IO_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "r2va/graph.h"

namespace r2va::nn {

inline constexpr std::uint32_t kWeightsFormatVersion = 1;

// Weights file layout, all integers little-endian:
//   "R2VA" | u32 version | repeated { u32 name_len | name bytes (UTF-8) |
//   u32 rank | u32 dims[rank] | f32 values[prod(dims)] } until end of file.
// Parameters are written in layer order.
std::vector<std::uint8_t> serialize_weights(const LayerGraph& graph);

// Encodes a single named tensor as one parameter record.
std::vector<std::uint8_t> serialize_tensor_record(const std::string& name,
                                                  const Tensor& tensor);

// Parses a weights blob into named tensors in file order.
std::vector<std::pair<std::string, Tensor>> parse_weights(
    std::span<const std::uint8_t> bytes);

// Replaces the graph's parameters with those in the blob. Every graph
// parameter must be present with an identical shape; extras are rejected.
void load_weights(LayerGraph& graph, std::span<const std::uint8_t> bytes);

void write_weights_file(const LayerGraph& graph,
                        const std::filesystem::path& path);
void read_weights_file(LayerGraph& graph, const std::filesystem::path& path);

}  // namespace r2va::nn

#endif  // R2VA_WEIGHTS_IO_H_
