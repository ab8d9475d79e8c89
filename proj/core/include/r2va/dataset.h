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

#ifndef R2VA_DATASET_H_
#define R2VA_DATASET_H_

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "r2va/image.h"
#include "r2va/tensor.h"

namespace r2va {

// Class index order is fixed project-wide; a model's logit c is gesture c.
enum class GestureClass {
  kFist = 0,
  kL,
  kOk,
  kPalm,
  kThumbDown,
  kThumbUp,
  kPointer,
};

inline constexpr std::size_t kNumGestureClasses = 7;

// The six classes of the virtual-environment datasets (no pointer).
inline constexpr std::array<GestureClass, 6> kVirtualGestures = {
    GestureClass::kFist,      GestureClass::kL,       GestureClass::kOk,
    GestureClass::kPalm,      GestureClass::kThumbDown, GestureClass::kThumbUp};
inline constexpr std::array<GestureClass, 7> kAllGestures = {
    GestureClass::kFist,      GestureClass::kL,       GestureClass::kOk,
    GestureClass::kPalm,      GestureClass::kThumbDown, GestureClass::kThumbUp,
    GestureClass::kPointer};

std::string_view gesture_name(GestureClass g);
GestureClass parse_gesture(std::string_view name);  // throws on unknown
std::string_view gesture_name(int label);

enum class Domain { kREnv, kVEnv };
std::string_view domain_name(Domain d);
Domain parse_domain(std::string_view name);

struct LabeledImage {
  std::string relative_path;
  int label = 0;
  Domain domain = Domain::kREnv;
  // Empty until rendered or loaded.
  Image image;
  // Figure (humanoid) mask, 1 channel, 255 inside. Present for generated data.
  std::optional<Image> mask;
  // Hand-glyph mask, generated data only.
  std::optional<Image> hand_mask;
};

struct DatasetManifest {
  std::string name;
  std::filesystem::path root;
  std::vector<LabeledImage> items;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  std::map<int, std::size_t> class_histogram() const;
};

// Manifest text: one `relative_path,class_name,domain_tag` line per item.
std::string format_manifest(const DatasetManifest& manifest);
DatasetManifest parse_manifest(std::string_view text,
                               const std::filesystem::path& root);

// Writes images (PPM), masks (PGM, "<stem>_mask.pgm" and "<stem>_hand.pgm")
// and manifest.csv under `dir`.
void write_dataset(const DatasetManifest& manifest,
                   const std::filesystem::path& dir);
// Reads manifest.csv and every referenced image; masks are loaded when the
// sibling files exist. Errors name the offending path.
DatasetManifest read_dataset(const std::filesystem::path& dir);

// Pixels of an item as a (3, H, W) tensor in [0, 1]. Items without pixels are
// read from root / relative_path.
nn::Tensor image_to_tensor(const Image& image);
nn::Tensor item_tensor(const LabeledImage& item,
                       const std::filesystem::path& root);

// Stacks items [indices] into an (N, 3, H, W) batch and their labels.
nn::Tensor make_batch(const DatasetManifest& manifest,
                      std::span<const std::size_t> indices,
                      std::vector<int>* labels = nullptr);

}  // namespace r2va

#endif  // R2VA_DATASET_H_
