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

#include "r2va/scenegen.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "r2va/rng.h"

namespace r2va::scene {

namespace {

// Rendering style implied by the domain tag. The real-style domain mimics a
// camera (sensor noise, clothing, pose jitter); the virtual-style domain is a
// flat-shaded monochrome humanoid with programmed, stylized poses: every
// hand is tilted by a fixed angle and its finger bars are thinner.
struct Style {
  int sensor_noise;
  bool clothing;
  double glyph_rotation_deg;
  double finger_angle_jitter_deg;
  double bar_length_jitter;
  double bar_width_scale;
  double placement_jitter;  // fraction of the slack
  double near_area_lo, near_area_hi;
  double far_area_lo, far_area_hi;
  double rotation_offset_deg;  // fixed tilt of every pose
};

constexpr Style kRealStyle{6, true, 10.0, 6.0, 0.1, 1.0, 0.0,
                           0.09, 0.11, 0.037, 0.05, 0.0};
constexpr Style kVirtualStyle{0, false, 0.0, 0.0, 0.0, 0.55, 0.0,
                              0.097, 0.103, 0.042, 0.046, 30.0};

const Style& style_for(Domain d) {
  return d == Domain::kREnv ? kRealStyle : kVirtualStyle;
}

using Rgb = std::array<int, 3>;

constexpr int kClutterSpread = 48;

struct Prim {
  enum Kind { kDisc, kAnnulus, kCapsule, kRect } kind;
  double x0, y0, x1, y1;  // centre in (x0, y0); capsule/rect use both points
  double r;               // radius or capsule half-width
  double r_inner = 0.0;
};

// Canvas with the figure's colour, figure mask and glyph mask.
struct Canvas {
  int w, h;
  std::vector<Rgb> color;
  std::vector<std::uint8_t> mask;
  std::vector<std::uint8_t> hand;

  Canvas(int width, int height)
      : w(width), h(height), color(static_cast<std::size_t>(width) * height),
        mask(color.size(), 0), hand(color.size(), 0) {}
};

bool inside(const Prim& p, double px, double py) {
  switch (p.kind) {
    case Prim::kDisc: {
      const double dx = px - p.x0, dy = py - p.y0;
      return dx * dx + dy * dy <= p.r * p.r;
    }
    case Prim::kAnnulus: {
      const double dx = px - p.x0, dy = py - p.y0;
      const double d2 = dx * dx + dy * dy;
      return d2 <= p.r * p.r && d2 >= p.r_inner * p.r_inner;
    }
    case Prim::kCapsule: {
      const double vx = p.x1 - p.x0, vy = p.y1 - p.y0;
      const double wx = px - p.x0, wy = py - p.y0;
      const double len2 = vx * vx + vy * vy;
      double t = len2 > 0.0 ? (wx * vx + wy * vy) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double dx = wx - t * vx, dy = wy - t * vy;
      return dx * dx + dy * dy <= p.r * p.r;
    }
    case Prim::kRect:
      return px >= p.x0 && px < p.x1 && py >= p.y0 && py < p.y1;
  }
  return false;
}

void bounds(const Prim& p, double& xmin, double& ymin, double& xmax,
            double& ymax) {
  switch (p.kind) {
    case Prim::kDisc:
    case Prim::kAnnulus:
      xmin = p.x0 - p.r; xmax = p.x0 + p.r;
      ymin = p.y0 - p.r; ymax = p.y0 + p.r;
      return;
    case Prim::kCapsule:
      xmin = std::min(p.x0, p.x1) - p.r; xmax = std::max(p.x0, p.x1) + p.r;
      ymin = std::min(p.y0, p.y1) - p.r; ymax = std::max(p.y0, p.y1) + p.r;
      return;
    case Prim::kRect:
      xmin = p.x0; xmax = p.x1; ymin = p.y0; ymax = p.y1;
      return;
  }
}

// Calls fn(index) for every canvas pixel whose centre lies in the primitive.
template <typename Fn>
void rasterize(const Prim& p, int w, int h, Fn&& fn) {
  double xmin, ymin, xmax, ymax;
  bounds(p, xmin, ymin, xmax, ymax);
  const int x0 = std::max(0, static_cast<int>(std::floor(xmin)) - 1);
  const int y0 = std::max(0, static_cast<int>(std::floor(ymin)) - 1);
  const int x1 = std::min(w - 1, static_cast<int>(std::ceil(xmax)) + 1);
  const int y1 = std::min(h - 1, static_cast<int>(std::ceil(ymax)) + 1);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (inside(p, x + 0.5, y + 0.5)) fn(static_cast<std::size_t>(y) * w + x);
    }
  }
}

struct GlyphJitter {
  double rotation_deg = 0.0;
  std::array<double, 5> finger_deg{};
  std::array<double, 5> length_scale{1, 1, 1, 1, 1};
};

// Glyph primitives in unit coordinates (a fist has radius 1), hand centre at
// the origin, up is -y.
std::vector<Prim> glyph_unit(GestureClass g, const Style& style,
                             const GlyphJitter& j) {
  const double bw = style.bar_width_scale;
  auto bar = [&](double ax, double ay, double angle_deg, double length,
                 double half_width, int k) {
    const double a = (angle_deg + j.finger_deg[k]) * std::numbers::pi / 180.0;
    const double len = length * j.length_scale[k];
    return Prim{Prim::kCapsule, ax, ay, ax + len * std::sin(a),
                ay - len * std::cos(a), half_width * bw};
  };
  std::vector<Prim> out;
  switch (g) {
    case GestureClass::kFist:
      out.push_back({Prim::kDisc, 0, 0, 0, 0, 1.0});
      break;
    case GestureClass::kPalm:
      out.push_back({Prim::kDisc, 0, 0.15, 0, 0, 0.62});
      for (int k = 0; k < 5; ++k) {
        out.push_back(bar(0, 0.15, -64.0 + 32.0 * k, 1.45, 0.19, k));
      }
      break;
    case GestureClass::kL:
      out.push_back(bar(0, 0.5, 0.0, 2.0, 0.32, 0));
      out.push_back(bar(0, 0.5, 90.0, 1.05, 0.32, 1));
      break;
    case GestureClass::kOk:
      out.push_back({Prim::kAnnulus, -0.25, 0.25, 0, 0, 0.62, 0.3});
      out.push_back(bar(0.1, -0.2, -3.0, 1.3, 0.18, 0));
      out.push_back(bar(0.4, -0.1, 10.0, 1.25, 0.18, 1));
      out.push_back(bar(0.65, 0.05, 25.0, 1.15, 0.18, 2));
      break;
    case GestureClass::kThumbUp:
      out.push_back({Prim::kDisc, 0, 0.2, 0, 0, 0.8});
      out.push_back(bar(0, -0.2, 0.0, 1.35, 0.32, 0));
      break;
    case GestureClass::kThumbDown:
      out.push_back({Prim::kDisc, 0, -0.2, 0, 0, 0.8});
      out.push_back(bar(0, 0.2, 180.0, 1.35, 0.32, 0));
      break;
    case GestureClass::kPointer:
      out.push_back({Prim::kDisc, 0, 0, 0, 0, 0.8});
      out.push_back(bar(0.3, 0, 90.0, 1.4, 0.3, 0));
      break;
  }
  return out;
}

// Scales by s, rotates, and moves the origin to (cx, cy).
std::vector<Prim> place_glyph(const std::vector<Prim>& unit, double s,
                              double rotation_deg, double cx, double cy) {
  const double a = rotation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(a), sn = std::sin(a);
  auto tx = [&](double x, double y) { return cx + s * (c * x - sn * y); };
  auto ty = [&](double x, double y) { return cy + s * (sn * x + c * y); };
  std::vector<Prim> out;
  for (const Prim& p : unit) {
    Prim q = p;
    q.x0 = tx(p.x0, p.y0);
    q.y0 = ty(p.x0, p.y0);
    q.x1 = tx(p.x1, p.y1);
    q.y1 = ty(p.x1, p.y1);
    q.r = p.r * s;
    q.r_inner = p.r_inner * s;
    out.push_back(q);
  }
  return out;
}

std::size_t glyph_pixels(const std::vector<Prim>& prims, int w, int h) {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(w) * h, 0);
  for (const auto& p : prims) rasterize(p, w, h, [&](std::size_t i) { m[i] = 1; });
  return static_cast<std::size_t>(std::count(m.begin(), m.end(), 1));
}

template <typename T>
T pick(const std::set<T>& options, Rng& rng) {
  auto it = options.begin();
  std::advance(it, rng.uniform_int(0, static_cast<std::int64_t>(options.size()) - 1));
  return *it;
}

Rgb sample_color(const ColorRange& range, Rng& rng) {
  Rgb c;
  for (int k = 0; k < 3; ++k) {
    c[k] = static_cast<int>(rng.uniform_int(range.lo[k], range.hi[k]));
  }
  return c;
}

Rgb sample_palette(Palette palette, const ColorRange& range, Rng& rng) {
  if (palette != Palette::kSilver) return sample_color(range, rng);
  // Near-equal channels: a grey level plus a small tint per channel.
  const int g = static_cast<int>(rng.uniform_int(range.lo[0] + 2, range.hi[0] - 2));
  Rgb c;
  for (int k = 0; k < 3; ++k) c[k] = g + static_cast<int>(rng.uniform_int(-2, 2));
  return c;
}

std::uint8_t clamp8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

// ---- text forms ----

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto pos = s.find(sep, start);
    const auto end = pos == std::string_view::npos ? s.size() : pos;
    std::string item = trim(s.substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

[[noreturn]] void bad_value(std::string_view field, std::string_view value,
                            std::string_view expected) {
  throw std::invalid_argument("scene field '" + std::string(field) + "': bad value '" +
                              std::string(value) + "' (expected " +
                              std::string(expected) + ")");
}

int parse_int(std::string_view field, const std::string& s) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    bad_value(field, s, "an integer");
  }
  if (used != s.size()) bad_value(field, s, "an integer");
  return v;
}

double parse_real(std::string_view field, const std::string& s) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    bad_value(field, s, "a real number");
  }
  if (used != s.size()) bad_value(field, s, "a real number");
  return v;
}

bool parse_bool(std::string_view field, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  bad_value(field, s, "true or false");
}

// "lo-hi,lo-hi,lo-hi"
ColorRange parse_range(std::string_view field, const std::string& s) {
  const auto parts = split_list(s, ',');
  if (parts.size() != 3) bad_value(field, s, "R0-R1,G0-G1,B0-B1");
  ColorRange r;
  for (int k = 0; k < 3; ++k) {
    const auto dash = parts[k].find('-');
    if (dash == std::string::npos) bad_value(field, s, "R0-R1,G0-G1,B0-B1");
    r.lo[k] = parse_int(field, trim(parts[k].substr(0, dash)));
    r.hi[k] = parse_int(field, trim(parts[k].substr(dash + 1)));
  }
  return r;
}

std::string format_range(const ColorRange& r) {
  std::string out;
  for (int k = 0; k < 3; ++k) {
    if (k) out += ',';
    out += std::to_string(r.lo[k]) + "-" + std::to_string(r.hi[k]);
  }
  return out;
}

std::string format_real(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

template <typename E, std::size_t N>
E parse_enum(std::string_view field, const std::string& s,
             const std::array<std::pair<std::string_view, E>, N>& table) {
  for (const auto& [name, e] : table) {
    if (name == s) return e;
  }
  std::string expected;
  for (const auto& [name, e] : table) {
    if (!expected.empty()) expected += '|';
    expected += name;
  }
  bad_value(field, s, expected);
}

constexpr std::array<std::pair<std::string_view, Palette>, 3> kPalettes{
    {{"skin_tone", Palette::kSkinTone}, {"silver", Palette::kSilver},
     {"custom", Palette::kCustom}}};
constexpr std::array<std::pair<std::string_view, BackgroundMode>, 3> kModes{
    {{"solid", BackgroundMode::kSolid}, {"clutter", BackgroundMode::kClutter},
     {"mixed", BackgroundMode::kMixed}}};
constexpr std::array<std::pair<std::string_view, Position>, 3> kPositions{
    {{"center", Position::kCenter}, {"left_offset", Position::kLeftOffset},
     {"right_offset", Position::kRightOffset}}};
constexpr std::array<std::pair<std::string_view, Distance>, 2> kDistances{
    {{"near", Distance::kNear}, {"far", Distance::kFar}}};
constexpr std::array<std::pair<std::string_view, Handedness>, 2> kHands{
    {{"right", Handedness::kRight}, {"left", Handedness::kLeft}}};
constexpr std::array<std::pair<std::string_view, Domain>, 2> kDomains{
    {{"REnv", Domain::kREnv}, {"VEnv", Domain::kVEnv}}};

template <typename E, std::size_t N>
std::string_view enum_name(E e, const std::array<std::pair<std::string_view, E>, N>& table) {
  for (const auto& [name, v] : table) {
    if (v == e) return name;
  }
  return "?";
}

template <typename E, std::size_t N>
std::string format_set(const std::set<E>& s,
                       const std::array<std::pair<std::string_view, E>, N>& table) {
  std::string out;
  for (const E e : s) {
    if (!out.empty()) out += ',';
    out += enum_name(e, table);
  }
  return out;
}

template <typename E, std::size_t N>
void edit_set(std::set<E>& target, std::string_view field, EditOp op,
              const std::string& value,
              const std::array<std::pair<std::string_view, E>, N>& table) {
  std::set<E> items;
  for (const auto& part : split_list(value, ',')) {
    items.insert(parse_enum(field, part, table));
  }
  switch (op) {
    case EditOp::kSet: target = items; break;
    case EditOp::kAdd: target.insert(items.begin(), items.end()); break;
    case EditOp::kRemove:
      for (const E e : items) target.erase(e);
      break;
  }
}

constexpr std::array<std::string_view, 13> kFieldNames = {
    "domain",          "image_size",     "palette",
    "custom_palette",  "background_mode", "background_range",
    "background_excludes_skin", "positions", "distances",
    "handedness",      "illumination",   "include_body",
    "clutter_seed_count"};

}  // namespace

bool ColorRange::contains(std::array<int, 3> rgb) const {
  for (int k = 0; k < 3; ++k) {
    if (rgb[k] < lo[k] || rgb[k] > hi[k]) return false;
  }
  return true;
}

int range_distance(const ColorRange& a, const ColorRange& b) {
  int best = 0;
  for (int k = 0; k < 3; ++k) {
    const int gap = std::max(a.lo[k] - b.hi[k], b.lo[k] - a.hi[k]);
    best = std::max(best, gap);
  }
  return best;
}

ColorRange SceneConfig::palette_range() const {
  switch (palette) {
    case Palette::kSkinTone: return kSkinToneRange;
    case Palette::kSilver: return kSilverRange;
    case Palette::kCustom: return custom_palette;
  }
  return kSkinToneRange;
}

void SceneConfig::validate() const {
  auto fail = [](const std::string& rule) {
    throw std::invalid_argument("scene config: " + rule);
  };
  if (width < 32 || height < 32) fail("image_size must be at least 32x32");
  auto check_range = [&](const ColorRange& r, const char* name) {
    for (int k = 0; k < 3; ++k) {
      if (r.lo[k] < 0 || r.hi[k] > 255 || r.lo[k] > r.hi[k]) {
        fail(std::string(name) + " must satisfy 0 <= lo <= hi <= 255 per channel");
      }
    }
  };
  check_range(custom_palette, "custom_palette");
  check_range(background_range, "background_range");
  if (background_excludes_skin &&
      range_distance(background_range, kSkinToneRange) < kSkinExclusionDistance) {
    fail("background_excludes_skin is set but background_range " +
         format_range(background_range) + " lies within " +
         std::to_string(kSkinExclusionDistance) + " of the skin-tone range " +
         format_range(kSkinToneRange));
  }
  if (positions.empty()) fail("positions must be non-empty");
  if (distances.empty()) fail("distances must be non-empty");
  if (handedness.empty()) fail("handedness must be non-empty");
  if (!(illumination_min > 0.0) || !(illumination_max >= illumination_min)) {
    fail("illumination must satisfy 0 < min <= max");
  }
  if (clutter_seed_count < 0) fail("clutter_seed_count must be >= 0");
}

SceneConfig default_renv_config() { return SceneConfig{}; }

SceneConfig default_venv_config() {
  SceneConfig c;
  c.domain = Domain::kVEnv;
  c.palette = Palette::kSilver;
  c.background_mode = BackgroundMode::kSolid;
  c.background_range = {{120, 120, 120}, {170, 170, 170}};
  c.positions = {Position::kCenter};
  c.distances = {Distance::kNear};
  c.handedness = {Handedness::kRight};
  c.illumination_min = 1.0;
  c.illumination_max = 1.0;
  c.clutter_seed_count = 0;
  return c;
}

std::span<const std::string_view> scene_field_names() {
  return kFieldNames;
}

std::string format_scene_field(const SceneConfig& c, std::string_view field) {
  if (field == "domain") return std::string(domain_name(c.domain));
  if (field == "image_size") return std::to_string(c.height) + "x" + std::to_string(c.width);
  if (field == "palette") return std::string(palette_name(c.palette));
  if (field == "custom_palette") return format_range(c.custom_palette);
  if (field == "background_mode") return std::string(background_mode_name(c.background_mode));
  if (field == "background_range") return format_range(c.background_range);
  if (field == "background_excludes_skin") return c.background_excludes_skin ? "true" : "false";
  if (field == "positions") return format_set(c.positions, kPositions);
  if (field == "distances") return format_set(c.distances, kDistances);
  if (field == "handedness") return format_set(c.handedness, kHands);
  if (field == "illumination") {
    return format_real(c.illumination_min) + "-" + format_real(c.illumination_max);
  }
  if (field == "include_body") return c.include_body ? "true" : "false";
  if (field == "clutter_seed_count") return std::to_string(c.clutter_seed_count);
  throw std::invalid_argument("unknown scene field '" + std::string(field) + "'");
}

void apply_edit(SceneConfig& c, const FieldEdit& edit) {
  const std::string& f = edit.field;
  const std::string v = trim(edit.value);
  const bool set_valued = f == "positions" || f == "distances" || f == "handedness";
  if (edit.op != EditOp::kSet && !set_valued) {
    throw std::invalid_argument("scene field '" + f +
                                "': += and -= apply only to positions, distances, handedness");
  }
  if (f == "domain") {
    c.domain = parse_enum(f, v, kDomains);
  } else if (f == "image_size") {
    const auto x = v.find('x');
    if (x == std::string::npos) bad_value(f, v, "HxW");
    c.height = parse_int(f, trim(v.substr(0, x)));
    c.width = parse_int(f, trim(v.substr(x + 1)));
  } else if (f == "palette") {
    c.palette = parse_enum(f, v, kPalettes);
  } else if (f == "custom_palette") {
    c.custom_palette = parse_range(f, v);
  } else if (f == "background_mode") {
    c.background_mode = parse_enum(f, v, kModes);
  } else if (f == "background_range") {
    c.background_range = parse_range(f, v);
  } else if (f == "background_excludes_skin") {
    c.background_excludes_skin = parse_bool(f, v);
  } else if (f == "positions") {
    edit_set(c.positions, f, edit.op, v, kPositions);
  } else if (f == "distances") {
    edit_set(c.distances, f, edit.op, v, kDistances);
  } else if (f == "handedness") {
    edit_set(c.handedness, f, edit.op, v, kHands);
  } else if (f == "illumination") {
    const auto dash = v.find('-', 1);
    if (dash == std::string::npos) {
      c.illumination_min = c.illumination_max = parse_real(f, v);
    } else {
      c.illumination_min = parse_real(f, trim(v.substr(0, dash)));
      c.illumination_max = parse_real(f, trim(v.substr(dash + 1)));
    }
  } else if (f == "include_body") {
    c.include_body = parse_bool(f, v);
  } else if (f == "clutter_seed_count") {
    c.clutter_seed_count = parse_int(f, v);
  } else {
    throw std::invalid_argument("unknown scene field '" + f + "'");
  }
}

CurationDelta parse_delta(std::string_view text) {
  CurationDelta delta;
  for (const auto& part : split_list(text, ';')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw std::invalid_argument("curation delta: expected field=value, got '" + part + "'");
    }
    FieldEdit edit;
    std::string lhs = part.substr(0, eq);
    if (lhs.back() == '+') {
      edit.op = EditOp::kAdd;
      lhs.pop_back();
    } else if (lhs.back() == '-') {
      edit.op = EditOp::kRemove;
      lhs.pop_back();
    }
    edit.field = trim(lhs);
    edit.value = trim(part.substr(eq + 1));
    delta.edits.push_back(std::move(edit));
  }
  return delta;
}

std::string format_delta(const CurationDelta& delta) {
  std::string out;
  for (const auto& e : delta.edits) {
    if (!out.empty()) out += "; ";
    out += e.field;
    out += e.op == EditOp::kAdd ? "+=" : e.op == EditOp::kRemove ? "-=" : "=";
    out += e.value;
  }
  return out;
}

SceneConfig apply_curation(const SceneConfig& config, const CurationDelta& delta) {
  SceneConfig out = config;
  for (const auto& edit : delta.edits) apply_edit(out, edit);
  out.validate();
  return out;
}

LabeledImage render(GestureClass gesture, const SceneConfig& config,
                    std::uint64_t seed, RenderDraw* draw_out) {
  config.validate();
  const Style& style = style_for(config.domain);
  const int W = config.width, H = config.height;
  Rng rng(seed);

  RenderDraw d;
  d.position = pick(config.positions, rng);
  d.distance = pick(config.distances, rng);
  d.handedness = pick(config.handedness, rng);
  d.clutter = config.background_mode == BackgroundMode::kClutter ||
              (config.background_mode == BackgroundMode::kMixed && rng.bernoulli(0.5));
  d.illumination = rng.uniform(config.illumination_min, config.illumination_max);

  const Rgb figure_color = sample_palette(config.palette, config.palette_range(), rng);
  const Rgb torso_color =
      style.clothing ? sample_color({{20, 20, 20}, {235, 235, 235}}, rng) : figure_color;

  // Background.
  Image image(W, H, 3);
  const Rgb base = sample_color(config.background_range, rng);
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    for (int k = 0; k < 3; ++k) image.pixels[i * 3 + k] = static_cast<std::uint8_t>(base[k]);
  }
  if (d.clutter) {
    for (int n = 0; n < config.clutter_seed_count; ++n) {
      // Panels stay near the base hue, within the background range.
      Rgb col;
      for (int k = 0; k < 3; ++k) {
        col[k] = std::clamp(base[k] + static_cast<int>(rng.uniform_int(-kClutterSpread, kClutterSpread)),
                            config.background_range.lo[k], config.background_range.hi[k]);
      }
      // Axis-aligned panels, so clutter never mimics a glyph's round parts.
      const double pw = rng.uniform(0.15, 0.5) * W, ph = rng.uniform(0.15, 0.5) * H;
      const double cx = rng.uniform(0.0, W), cy = rng.uniform(0.0, H);
      const Prim p{Prim::kRect, cx - pw / 2, cy - ph / 2, cx + pw / 2, cy + ph / 2, 0};
      rasterize(p, W, H, [&](std::size_t i) {
        for (int k = 0; k < 3; ++k) image.pixels[i * 3 + k] = static_cast<std::uint8_t>(col[k]);
      });
    }
  }

  // Hand size: target glyph area as a fraction of the frame.
  const bool near = d.distance == Distance::kNear;
  const double target_fraction =
      near ? rng.uniform(style.near_area_lo, style.near_area_hi)
           : rng.uniform(style.far_area_lo, style.far_area_hi);
  const double target_px = target_fraction * W * H;
  const double unit = std::sqrt(target_px / std::numbers::pi);

  GlyphJitter jitter;
  jitter.rotation_deg = style.rotation_offset_deg + rng.uniform(-1.0, 1.0) * style.glyph_rotation_deg;
  for (int k = 0; k < 5; ++k) {
    jitter.finger_deg[k] = rng.uniform(-1.0, 1.0) * style.finger_angle_jitter_deg;
    jitter.length_scale[k] = 1.0 + rng.uniform(-1.0, 1.0) * style.bar_length_jitter;
  }
  const double jitter_x = rng.uniform(-1.0, 1.0) * style.placement_jitter;
  const double jitter_y = rng.uniform(-1.0, 1.0) * style.placement_jitter;
  const double far_lift = rng.uniform(0.2, 0.5);

  // Figure in a canvas three frames wide, torso top-centre at the middle.
  const int CW = 3 * W, CH = 3 * H;
  const double ox = CW / 2.0, oy = CH / 2.0;
  const double hand_x = ox + 1.7 * unit, hand_y = oy - 1.0 * unit;

  const std::vector<Prim> unit_glyph = glyph_unit(gesture, style, jitter);
  double scale = unit;
  for (int iter = 0; iter < 4; ++iter) {
    const auto placed = place_glyph(unit_glyph, scale, jitter.rotation_deg, hand_x, hand_y);
    const std::size_t count = glyph_pixels(placed, CW, CH);
    if (count == 0) {
      scale *= 2.0;
      continue;
    }
    scale *= std::sqrt(target_px / static_cast<double>(count));
  }
  const auto glyph = place_glyph(unit_glyph, scale, jitter.rotation_deg, hand_x, hand_y);

  Canvas canvas(CW, CH);
  auto paint = [&](const Prim& p, const Rgb& col, bool is_hand) {
    rasterize(p, CW, CH, [&](std::size_t i) {
      canvas.color[i] = col;
      canvas.mask[i] = 255;
      if (is_hand) canvas.hand[i] = 255;
    });
  };
  if (config.include_body) {
    paint({Prim::kRect, ox - 0.75 * unit, oy, ox + 0.75 * unit, oy + 1.3 * unit, 0},
          torso_color, false);
    paint({Prim::kDisc, ox, oy - 0.7 * unit, 0, 0, 0.55 * unit}, figure_color, false);
    paint({Prim::kCapsule, ox + 0.55 * unit, oy + 0.25 * unit, hand_x, hand_y, 0.2 * unit},
          figure_color, false);
  } else {
    paint({Prim::kCapsule, ox + 0.3 * unit, oy + 1.3 * unit, hand_x, hand_y, 0.2 * unit},
          figure_color, false);
  }
  for (const auto& p : glyph) paint(p, figure_color, true);

  // Bounding box and placement in the frame.
  int bx0 = CW, by0 = CH, bx1 = -1, by1 = -1;
  for (int y = 0; y < CH; ++y) {
    for (int x = 0; x < CW; ++x) {
      if (!canvas.mask[static_cast<std::size_t>(y) * CW + x]) continue;
      bx0 = std::min(bx0, x); bx1 = std::max(bx1, x);
      by0 = std::min(by0, y); by1 = std::max(by1, y);
    }
  }
  const int bw = bx1 - bx0 + 1, bh = by1 - by0 + 1;
  const int slack_x = W - bw, slack_y = H - bh;
  if (slack_x < 0 || slack_y < 0) {
    throw std::logic_error("render: figure does not fit the frame");
  }
  double fx = 0.5;
  if (d.position == Position::kLeftOffset) fx = 0.1;
  if (d.position == Position::kRightOffset) fx = 0.9;
  const double fy = near ? 0.5 : far_lift;
  const int left = std::clamp(static_cast<int>(std::lround((fx + jitter_x) * slack_x)), 0, slack_x);
  const int top = std::clamp(static_cast<int>(std::lround((fy + jitter_y) * slack_y)), 0, slack_y);

  Image mask(W, H, 1), hand(W, H, 1);
  for (int Y = 0; Y < H; ++Y) {
    for (int X = 0; X < W; ++X) {
      const int x = X - left + bx0, y = Y - top + by0;
      if (x < 0 || y < 0 || x >= CW || y >= CH) continue;
      const std::size_t ci = static_cast<std::size_t>(y) * CW + x;
      if (!canvas.mask[ci]) continue;
      for (int k = 0; k < 3; ++k) {
        image.at(X, Y, k) = static_cast<std::uint8_t>(canvas.color[ci][k]);
      }
      mask.at(X, Y) = 255;
      if (canvas.hand[ci]) hand.at(X, Y) = 255;
    }
  }

  if (style.sensor_noise > 0) {
    for (auto& v : image.pixels) {
      v = clamp8(v + static_cast<double>(rng.uniform_int(-style.sensor_noise, style.sensor_noise)));
    }
  }
  if (d.illumination != 1.0) {
    for (auto& v : image.pixels) v = clamp8(v * d.illumination);
  }

  LabeledImage out;
  out.label = static_cast<int>(gesture);
  out.domain = config.domain;
  if (d.handedness == Handedness::kLeft) {
    out.image = flip_horizontal(image);
    out.mask = flip_horizontal(mask);
    out.hand_mask = flip_horizontal(hand);
  } else {
    out.image = std::move(image);
    out.mask = std::move(mask);
    out.hand_mask = std::move(hand);
  }
  if (draw_out) *draw_out = d;
  return out;
}

DatasetManifest generate_dataset(std::span<const GestureClass> classes,
                                 const SceneConfig& config,
                                 std::size_t n_per_class, std::uint64_t seed,
                                 std::string name) {
  if (n_per_class == 0) throw std::invalid_argument("generate_dataset: n_per_class must be >= 1");
  config.validate();
  DatasetManifest manifest;
  manifest.name = std::move(name);
  for (const GestureClass g : classes) {
    const std::string cls(gesture_name(g));
    for (std::size_t i = 0; i < n_per_class; ++i) {
      LabeledImage item = render(
          g, config, derive_seed(seed, "render/" + cls + "/" + std::to_string(i)));
      char file[64];
      std::snprintf(file, sizeof(file), "%s_%04zu.ppm", cls.c_str(), i);
      item.relative_path = "images/" + std::string(file);
      manifest.items.push_back(std::move(item));
    }
  }
  return manifest;
}

std::string_view palette_name(Palette p) { return enum_name(p, kPalettes); }
std::string_view background_mode_name(BackgroundMode m) { return enum_name(m, kModes); }
std::string_view position_name(Position p) { return enum_name(p, kPositions); }
std::string_view distance_name(Distance d) { return enum_name(d, kDistances); }
std::string_view handedness_name(Handedness h) { return enum_name(h, kHands); }

}  // namespace r2va::scene
