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

#include "r2va/weights_io.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <stdexcept>

#include "r2va/fs_util.h"

namespace r2va::nn {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float f) {
  put_u32(out, std::bit_cast<std::uint32_t>(f));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  bool done() const { return pos_ == bytes_.size(); }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw std::runtime_error("weights blob truncated at byte " +
                               std::to_string(pos_));
    }
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_tensor_record(const std::string& name,
                                                  const Tensor& tensor) {
  std::vector<std::uint8_t> out;
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.insert(out.end(), name.begin(), name.end());
  put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
  for (const auto d : tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  for (const double v : tensor.values()) put_f32(out, static_cast<float>(v));
  return out;
}

std::vector<std::uint8_t> serialize_weights(const LayerGraph& graph) {
  std::vector<std::uint8_t> out = {'R', '2', 'V', 'A'};
  put_u32(out, kWeightsFormatVersion);
  for (const auto& name : graph.param_order()) {
    const auto record = serialize_tensor_record(name, graph.params.at(name));
    out.insert(out.end(), record.begin(), record.end());
  }
  return out;
}

std::vector<std::pair<std::string, Tensor>> parse_weights(
    std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), "R2VA", 4) != 0) {
    throw std::runtime_error("weights blob: missing R2VA magic");
  }
  Reader reader(bytes.subspan(4));
  const std::uint32_t version = reader.u32();
  if (version != kWeightsFormatVersion) {
    throw std::runtime_error("weights blob: unsupported version " +
                             std::to_string(version));
  }
  std::vector<std::pair<std::string, Tensor>> out;
  while (!reader.done()) {
    const std::uint32_t name_len = reader.u32();
    std::string name = reader.text(name_len);
    const std::uint32_t rank = reader.u32();
    if (rank == 0 || rank > 8) {
      throw std::runtime_error("weights blob: bad rank for '" + name + "'");
    }
    Shape shape(rank);
    for (auto& d : shape) d = reader.u32();
    std::vector<double> data(shape_size(shape));
    for (double& v : data) v = std::bit_cast<float>(reader.u32());
    out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return out;
}

void load_weights(LayerGraph& graph, std::span<const std::uint8_t> bytes) {
  auto records = parse_weights(bytes);
  std::set<std::string> loaded;
  ParamMap params = graph.params;
  for (auto& [name, tensor] : records) {
    const auto it = params.find(name);
    if (it == params.end()) {
      throw std::runtime_error("weights blob: unknown parameter '" + name + "'");
    }
    if (it->second.shape() != tensor.shape()) {
      throw std::runtime_error("weights blob: parameter '" + name +
                               "' has shape " + shape_to_string(tensor.shape()) +
                               ", graph expects " +
                               shape_to_string(it->second.shape()));
    }
    it->second = std::move(tensor);
    loaded.insert(name);
  }
  for (const auto& [name, tensor] : params) {
    if (!loaded.count(name)) {
      throw std::runtime_error("weights blob: missing parameter '" + name + "'");
    }
  }
  graph.params = std::move(params);
}

void write_weights_file(const LayerGraph& graph,
                        const std::filesystem::path& path) {
  write_file_atomic(path, serialize_weights(graph));
}

void read_weights_file(LayerGraph& graph, const std::filesystem::path& path) {
  load_weights(graph, read_file_bytes(path));
}

}  // namespace r2va::nn
