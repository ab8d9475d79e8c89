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

#ifndef R2VA_SCENEGEN_H_
#define R2VA_SCENEGEN_H_

#include <array>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "r2va/dataset.h"

namespace r2va::scene {

// Inclusive per-channel RGB box.
struct ColorRange {
  std::array<int, 3> lo{0, 0, 0};
  std::array<int, 3> hi{255, 255, 255};

  bool contains(std::array<int, 3> rgb) const;
  friend bool operator==(const ColorRange&, const ColorRange&) = default;
};

inline constexpr ColorRange kSkinToneRange{{180, 130, 100}, {230, 180, 150}};
inline constexpr ColorRange kSilverRange{{150, 150, 150}, {190, 190, 190}};

// Minimum per-channel separation between a skin-excluding background range
// and kSkinToneRange.
inline constexpr int kSkinExclusionDistance = 32;

// Largest per-channel gap between two boxes (0 when they overlap in every
// channel). Two boxes at distance d have every pair of colours differing by
// at least d in some channel.
int range_distance(const ColorRange& a, const ColorRange& b);

enum class Palette { kSkinTone, kSilver, kCustom };
enum class BackgroundMode { kSolid, kClutter, kMixed };
enum class Position { kCenter, kLeftOffset, kRightOffset };
enum class Distance { kNear, kFar };
enum class Handedness { kRight, kLeft };

// Full parameterization of the renderer. Per-image values (placement,
// distance, handedness, background mode when mixed, illumination) are drawn
// uniformly from the sets and ranges here.
struct SceneConfig {
  Domain domain = Domain::kREnv;
  int height = 64;
  int width = 64;
  Palette palette = Palette::kSkinTone;
  ColorRange custom_palette = kSkinToneRange;
  BackgroundMode background_mode = BackgroundMode::kMixed;
  ColorRange background_range{};
  bool background_excludes_skin = false;
  std::set<Position> positions = {Position::kCenter, Position::kLeftOffset,
                                  Position::kRightOffset};
  std::set<Distance> distances = {Distance::kNear, Distance::kFar};
  std::set<Handedness> handedness = {Handedness::kRight};
  double illumination_min = 0.75;
  double illumination_max = 1.25;
  bool include_body = true;
  int clutter_seed_count = 6;

  // Throws std::invalid_argument naming the violated rule.
  void validate() const;
  ColorRange palette_range() const;
  friend bool operator==(const SceneConfig&, const SceneConfig&) = default;
};

// Defaults for the real-style training domain.
SceneConfig default_renv_config();
// Naive virtual dataset: silver humanoid, one centred near placement.
SceneConfig default_venv_config();

// Text form of every SceneConfig field, used by config files and deltas.
std::span<const std::string_view> scene_field_names();
std::string format_scene_field(const SceneConfig& config, std::string_view field);

enum class EditOp { kSet, kAdd, kRemove };

struct FieldEdit {
  std::string field;
  EditOp op = EditOp::kSet;
  std::string value;
  friend bool operator==(const FieldEdit&, const FieldEdit&) = default;
};

// Declarative edit applied to a SceneConfig during curation.
struct CurationDelta {
  std::vector<FieldEdit> edits;
  friend bool operator==(const CurationDelta&, const CurationDelta&) = default;
};

// Parses "field=value; field+=v1,v2; field-=v" (whitespace tolerant).
CurationDelta parse_delta(std::string_view text);
std::string format_delta(const CurationDelta& delta);

// Applies one edit in place without re-validating. Throws on unknown fields
// or unparsable values; += and -= are only valid on set-valued fields.
void apply_edit(SceneConfig& config, const FieldEdit& edit);

// Returns an edited copy, re-validated.
SceneConfig apply_curation(const SceneConfig& config, const CurationDelta& delta);

// Target hand-glyph area as a fraction of the frame.
struct HandAreaBounds {
  double lo;
  double hi;
};
inline constexpr HandAreaBounds kNearHandArea{0.08, 0.12};
inline constexpr HandAreaBounds kFarHandArea{0.03, 0.06};

// Per-image values drawn for one render, exposed for tests and reports.
struct RenderDraw {
  Position position = Position::kCenter;
  Distance distance = Distance::kNear;
  Handedness handedness = Handedness::kRight;
  bool clutter = false;
  double illumination = 1.0;
};

// Renders one labelled image with its figure mask and hand-glyph mask.
// Deterministic in (gesture, config, seed).
LabeledImage render(GestureClass gesture, const SceneConfig& config,
                    std::uint64_t seed, RenderDraw* draw = nullptr);

// Balanced dataset, class-major order; item i of class c uses seed
// derive_seed(seed, "render/<class>/<i>").
DatasetManifest generate_dataset(std::span<const GestureClass> classes,
                                 const SceneConfig& config,
                                 std::size_t n_per_class, std::uint64_t seed,
                                 std::string name = "dataset");

std::string_view palette_name(Palette p);
std::string_view background_mode_name(BackgroundMode m);
std::string_view position_name(Position p);
std::string_view distance_name(Distance d);
std::string_view handedness_name(Handedness h);

}  // namespace r2va::scene

#endif  // R2VA_SCENEGEN_H_
