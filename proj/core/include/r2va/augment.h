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

#ifndef R2VA_AUGMENT_H_
#define R2VA_AUGMENT_H_

#include <cstdint>

#include "r2va/dataset.h"
#include "r2va/rng.h"

namespace r2va::augment {

// Ranges for the six augmentations. Each draw samples uniformly within them.
struct AugmentSpec {
  double lateral_inversion = 0.5;  // probability of a horizontal flip
  double shift_frac = 0.2;         // max |shift| as a fraction of width/height
  double shear_deg = 10.0;
  double zoom_min = 0.8;
  double zoom_max = 1.2;
  double rotate_deg = 10.0;
  double brightness_delta = 0.2;  // max |additive shift| as a fraction of 255
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const AugmentSpec&, const AugmentSpec&) = default;
};

// A zero-magnitude spec: every draw is the identity.
AugmentSpec identity_spec();

// One concrete set of sampled augmentation parameters.
struct AugmentDraw {
  bool flip = false;
  double shift_x = 0.0;  // fraction of width, positive moves content right
  double shift_y = 0.0;  // fraction of height, positive moves content down
  double shear_deg = 0.0;
  double zoom = 1.0;
  double rotate_deg = 0.0;
  double brightness = 0.0;  // fraction of 255
};

AugmentDraw draw_parameters(const AugmentSpec& spec, Rng& rng);

// Geometric ops use nearest-neighbour resampling with edge replication;
// brightness is added last and clamped to [0, 255]. The flip comes first and
// is an exact column reversal. Masks get the same geometric transform. The
// draw must lie within the spec's ranges.
LabeledImage apply(const LabeledImage& item, const AugmentSpec& spec,
                   const AugmentDraw& draw);

// Geometric part only, for a single image of any channel count.
Image warp(const Image& image, const AugmentDraw& draw);

// Originals first, then `copies_per_image` augmented copies of each source
// in source order. Copy j of item i uses seed derive_seed(spec.seed,
// "augment/<i>/<j>").
DatasetManifest expand_manifest(const DatasetManifest& train,
                                const AugmentSpec& spec,
                                std::size_t copies_per_image);

}  // namespace r2va::augment

#endif  // R2VA_AUGMENT_H_
