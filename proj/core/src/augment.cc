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

#include "r2va/augment.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace r2va::augment {

namespace {

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

bool within(double v, double magnitude) {
  return std::abs(v) <= magnitude + 1e-12;
}

}  // namespace

void AugmentSpec::validate() const {
  if (!(lateral_inversion >= 0.0 && lateral_inversion <= 1.0)) {
    throw std::invalid_argument("augment: lateral_inversion must be in [0, 1]");
  }
  if (!(shift_frac >= 0.0) || !(shear_deg >= 0.0) || !(rotate_deg >= 0.0) ||
      !(brightness_delta >= 0.0)) {
    throw std::invalid_argument("augment: magnitudes must be >= 0");
  }
  if (!(zoom_min > 0.0 && zoom_min <= 1.0 && zoom_max >= 1.0)) {
    throw std::invalid_argument("augment: zoom range must satisfy 0 < min <= 1 <= max");
  }
  if (shear_deg >= 90.0) throw std::invalid_argument("augment: shear_deg must be < 90");
}

AugmentSpec identity_spec() {
  AugmentSpec s;
  s.lateral_inversion = 0.0;
  s.shift_frac = 0.0;
  s.shear_deg = 0.0;
  s.zoom_min = 1.0;
  s.zoom_max = 1.0;
  s.rotate_deg = 0.0;
  s.brightness_delta = 0.0;
  return s;
}

AugmentDraw draw_parameters(const AugmentSpec& spec, Rng& rng) {
  spec.validate();
  AugmentDraw d;
  d.flip = rng.bernoulli(spec.lateral_inversion);
  d.shift_x = rng.uniform(-spec.shift_frac, spec.shift_frac);
  d.shift_y = rng.uniform(-spec.shift_frac, spec.shift_frac);
  d.shear_deg = rng.uniform(-spec.shear_deg, spec.shear_deg);
  d.zoom = rng.uniform(spec.zoom_min, spec.zoom_max);
  d.rotate_deg = rng.uniform(-spec.rotate_deg, spec.rotate_deg);
  d.brightness = rng.uniform(-spec.brightness_delta, spec.brightness_delta);
  return d;
}

Image warp(const Image& image, const AugmentDraw& draw) {
  const Image src = draw.flip ? flip_horizontal(image) : image;
  if (draw.shift_x == 0.0 && draw.shift_y == 0.0 && draw.shear_deg == 0.0 &&
      draw.zoom == 1.0 && draw.rotate_deg == 0.0) {
    return src;
  }
  // Forward map about the centre: p' = c + t + R * Sh * Z * (p - c).
  // Inverse: p = c + Z^-1 * Sh^-1 * R^-1 * (p' - c - t).
  const double cx = src.width / 2.0, cy = src.height / 2.0;
  const double tx = draw.shift_x * src.width, ty = draw.shift_y * src.height;
  const double th = radians(draw.rotate_deg);
  const double cos_t = std::cos(th), sin_t = std::sin(th);
  const double shear = std::tan(radians(draw.shear_deg));
  const double inv_zoom = 1.0 / draw.zoom;

  Image out(src.width, src.height, src.channels);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      const double dx = x + 0.5 - cx - tx;
      const double dy = y + 0.5 - cy - ty;
      // R^-1
      const double rx = cos_t * dx + sin_t * dy;
      const double ry = -sin_t * dx + cos_t * dy;
      // Sh^-1 for x' = x + shear * y
      const double sx = rx - shear * ry;
      const double sy = ry;
      const double px = sx * inv_zoom + cx;
      const double py = sy * inv_zoom + cy;
      const int ix = std::clamp(static_cast<int>(std::floor(px)), 0, src.width - 1);
      const int iy = std::clamp(static_cast<int>(std::floor(py)), 0, src.height - 1);
      for (int c = 0; c < src.channels; ++c) out.at(x, y, c) = src.at(ix, iy, c);
    }
  }
  return out;
}

LabeledImage apply(const LabeledImage& item, const AugmentSpec& spec,
                   const AugmentDraw& draw) {
  spec.validate();
  if (item.image.channels != 3 || item.image.empty()) {
    throw std::invalid_argument("augment: expected an RGB image for '" +
                                item.relative_path + "'");
  }
  if (draw.flip && spec.lateral_inversion == 0.0) {
    throw std::invalid_argument("augment: flip drawn with zero inversion probability");
  }
  if (!within(draw.shift_x, spec.shift_frac) || !within(draw.shift_y, spec.shift_frac) ||
      !within(draw.shear_deg, spec.shear_deg) || !within(draw.rotate_deg, spec.rotate_deg) ||
      !within(draw.brightness, spec.brightness_delta) ||
      draw.zoom < spec.zoom_min - 1e-12 || draw.zoom > spec.zoom_max + 1e-12) {
    throw std::invalid_argument("augment: draw outside the spec's ranges");
  }
  LabeledImage out = item;
  out.image = warp(item.image, draw);
  if (item.mask) out.mask = warp(*item.mask, draw);
  if (item.hand_mask) out.hand_mask = warp(*item.hand_mask, draw);
  if (draw.brightness != 0.0) {
    const double delta = draw.brightness * 255.0;
    for (auto& v : out.image.pixels) {
      v = static_cast<std::uint8_t>(std::clamp(std::round(v + delta), 0.0, 255.0));
    }
  }
  return out;
}

DatasetManifest expand_manifest(const DatasetManifest& train,
                                const AugmentSpec& spec,
                                std::size_t copies_per_image) {
  DatasetManifest out = train;
  out.name = train.name + "/augmented";
  if (copies_per_image == 0) return out;
  spec.validate();
  out.items.reserve(train.size() * (1 + copies_per_image));
  for (std::size_t i = 0; i < train.size(); ++i) {
    LabeledImage source = train.items[i];
    if (source.image.empty()) source.image = read_pnm(train.root / source.relative_path);
    const std::string& rel = source.relative_path;
    const auto dot = rel.rfind('.');
    const std::string stem = dot == std::string::npos ? rel : rel.substr(0, dot);
    for (std::size_t j = 1; j <= copies_per_image; ++j) {
      Rng rng(derive_seed(spec.seed,
                          "augment/" + std::to_string(i) + "/" + std::to_string(j)));
      LabeledImage aug = apply(source, spec, draw_parameters(spec, rng));
      aug.relative_path = stem + "_aug" + std::to_string(j) + ".ppm";
      out.items.push_back(std::move(aug));
    }
  }
  return out;
}

}  // namespace r2va::augment
