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

#include "r2va/dataset.h"

#include <sstream>
#include <stdexcept>

#include "r2va/fs_util.h"

namespace r2va {

namespace {

constexpr std::array<std::string_view, kNumGestureClasses> kGestureNames = {
    "fist", "l", "ok", "palm", "thumb_down", "thumb_up", "pointer"};

std::string mask_path(const std::string& rel, std::string_view suffix) {
  const auto dot = rel.rfind('.');
  const std::string stem = dot == std::string::npos ? rel : rel.substr(0, dot);
  return stem + std::string(suffix);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::string_view gesture_name(GestureClass g) {
  return kGestureNames.at(static_cast<std::size_t>(g));
}

std::string_view gesture_name(int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= kNumGestureClasses) {
    throw std::out_of_range("gesture label " + std::to_string(label));
  }
  return kGestureNames[static_cast<std::size_t>(label)];
}

GestureClass parse_gesture(std::string_view name) {
  for (std::size_t i = 0; i < kGestureNames.size(); ++i) {
    if (kGestureNames[i] == name) return static_cast<GestureClass>(i);
  }
  throw std::invalid_argument("unknown gesture class '" + std::string(name) + "'");
}

std::string_view domain_name(Domain d) {
  return d == Domain::kREnv ? "REnv" : "VEnv";
}

Domain parse_domain(std::string_view name) {
  if (name == "REnv") return Domain::kREnv;
  if (name == "VEnv") return Domain::kVEnv;
  throw std::invalid_argument("unknown domain tag '" + std::string(name) + "'");
}

std::map<int, std::size_t> DatasetManifest::class_histogram() const {
  std::map<int, std::size_t> h;
  for (const auto& item : items) ++h[item.label];
  return h;
}

std::string format_manifest(const DatasetManifest& manifest) {
  std::string out;
  for (const auto& item : manifest.items) {
    out += item.relative_path;
    out += ',';
    out += gesture_name(item.label);
    out += ',';
    out += domain_name(item.domain);
    out += '\n';
  }
  return out;
}

DatasetManifest parse_manifest(std::string_view text,
                               const std::filesystem::path& root) {
  DatasetManifest manifest;
  manifest.root = root;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto c1 = t.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : t.find(',', c1 + 1);
    if (c2 == std::string::npos || t.find(',', c2 + 1) != std::string::npos) {
      throw std::invalid_argument("manifest line " + std::to_string(line_no) +
                                  ": expected relative_path,class_name,domain_tag");
    }
    LabeledImage item;
    item.relative_path = trim(t.substr(0, c1));
    try {
      item.label = static_cast<int>(parse_gesture(trim(t.substr(c1 + 1, c2 - c1 - 1))));
      item.domain = parse_domain(trim(t.substr(c2 + 1)));
    } catch (const std::exception& e) {
      throw std::invalid_argument("manifest line " + std::to_string(line_no) +
                                  ": " + e.what());
    }
    manifest.items.push_back(std::move(item));
  }
  return manifest;
}

void write_dataset(const DatasetManifest& manifest,
                   const std::filesystem::path& dir) {
  for (const auto& item : manifest.items) {
    if (item.image.empty()) {
      throw std::invalid_argument("write_dataset: item '" + item.relative_path +
                                  "' has no pixels");
    }
    write_pnm(dir / item.relative_path, item.image);
    if (item.mask) write_pnm(dir / mask_path(item.relative_path, "_mask.pgm"), *item.mask);
    if (item.hand_mask) {
      write_pnm(dir / mask_path(item.relative_path, "_hand.pgm"), *item.hand_mask);
    }
  }
  write_file_atomic(dir / "manifest.csv", format_manifest(manifest));
}

DatasetManifest read_dataset(const std::filesystem::path& dir) {
  DatasetManifest manifest =
      parse_manifest(read_text_file(dir / "manifest.csv"), dir);
  manifest.name = dir.filename().string();
  for (auto& item : manifest.items) {
    item.image = read_pnm(dir / item.relative_path);
    const auto m = dir / mask_path(item.relative_path, "_mask.pgm");
    if (std::filesystem::exists(m)) item.mask = read_pnm(m);
    const auto h = dir / mask_path(item.relative_path, "_hand.pgm");
    if (std::filesystem::exists(h)) item.hand_mask = read_pnm(h);
  }
  return manifest;
}

nn::Tensor image_to_tensor(const Image& image) {
  if (image.channels != 3) throw std::invalid_argument("expected an RGB image");
  const auto h = static_cast<std::size_t>(image.height);
  const auto w = static_cast<std::size_t>(image.width);
  nn::Tensor t({3, h, w});
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        t[(c * h + y) * w + x] =
            image.pixels[(y * w + x) * 3 + c] / 255.0;
      }
    }
  }
  return t;
}

nn::Tensor item_tensor(const LabeledImage& item,
                       const std::filesystem::path& root) {
  if (!item.image.empty()) return image_to_tensor(item.image);
  return image_to_tensor(read_pnm(root / item.relative_path));
}

nn::Tensor make_batch(const DatasetManifest& manifest,
                      std::span<const std::size_t> indices,
                      std::vector<int>* labels) {
  std::vector<nn::Tensor> parts;
  parts.reserve(indices.size());
  if (labels) labels->clear();
  for (const auto i : indices) {
    const auto& item = manifest.items.at(i);
    parts.push_back(item_tensor(item, manifest.root));
    if (labels) labels->push_back(item.label);
  }
  return nn::stack(parts);
}

}  // namespace r2va
