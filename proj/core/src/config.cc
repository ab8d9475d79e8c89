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

#include "r2va/config.h"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "r2va/fs_util.h"

namespace r2va::config {

using pipeline::PipelineConfig;

ConfigError::ConfigError(std::string source, int line, std::string key,
                         const std::string& message)
    : std::invalid_argument(source + (line > 0 ? ":" + std::to_string(line) : "") +
                            (key.empty() ? "" : ": " + key) + ": " + message),
      source_(std::move(source)),
      line_(line),
      key_(std::move(key)) {}

namespace {

// Thrown by value parsers; the caller adds source, line and key.
struct ValueError {
  std::string message;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto p = s.find(sep, start);
    out.push_back(trim(s.substr(start, p == std::string_view::npos ? p : p - start)));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

std::string fmt_real(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

double to_real(const std::string& s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ValueError{"expected a real number, got '" + s + "'"};
  }
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw ValueError{"expected a non-negative integer, got '" + s + "'"};
  }
  return v;
}

std::size_t to_size(const std::string& s) { return static_cast<std::size_t>(to_u64(s)); }

std::size_t to_positive(const std::string& s) {
  const std::size_t v = to_size(s);
  if (v == 0) throw ValueError{"must be >= 1"};
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw ValueError{"expected true or false, got '" + s + "'"};
}

double in_range(double v, double lo, double hi, bool lo_open, bool hi_open) {
  const bool ok = (lo_open ? v > lo : v >= lo) && (hi_open ? v < hi : v <= hi);
  if (!ok) {
    throw ValueError{"value " + fmt_real(v) + " outside " + (lo_open ? "(" : "[") +
                     fmt_real(lo) + ", " + fmt_real(hi) + (hi_open ? ")" : "]")};
  }
  return v;
}

double non_negative(double v) {
  if (v < 0.0) throw ValueError{"must be >= 0"};
  return v;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

std::string fmt_classes(const std::vector<GestureClass>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += gesture_name(v[i]);
  }
  return out;
}

std::vector<GestureClass> to_classes(const std::string& s) {
  std::vector<GestureClass> out;
  std::set<GestureClass> seen;
  for (const auto& part : split(s, ',')) {
    GestureClass g;
    try {
      g = parse_gesture(part);
    } catch (const std::exception& e) {
      throw ValueError{e.what()};
    }
    if (!seen.insert(g).second) throw ValueError{"duplicate class '" + part + "'"};
    out.push_back(g);
  }
  if (out.empty()) throw ValueError{"class list must be non-empty"};
  return out;
}

std::string fmt_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<std::size_t> to_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& part : split(s, ',')) out.push_back(to_positive(part));
  if (out.empty()) throw ValueError{"list must be non-empty"};
  return out;
}

std::string fmt_schedule(const std::vector<scene::CurationDelta>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += " | ";
    out += scene::format_delta(v[i]);
  }
  return out;
}

std::vector<scene::CurationDelta> to_schedule(const std::string& s) {
  std::vector<scene::CurationDelta> out;
  for (const auto& part : split(s, '|')) {
    if (part.empty()) throw ValueError{"empty curation delta in schedule"};
    try {
      scene::CurationDelta d = scene::parse_delta(part);
      scene::SceneConfig probe = scene::default_venv_config();
      for (const auto& e : d.edits) scene::apply_edit(probe, e);
      out.push_back(std::move(d));
    } catch (const std::exception& e) {
      throw ValueError{e.what()};
    }
  }
  return out;
}

struct Entry {
  std::string key;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

std::vector<Entry> build_entries() {
  std::vector<Entry> e;
  auto add = [&](std::string key, auto get, auto set) {
    e.push_back({std::move(key), get, set});
  };
  add("seed", [](const PipelineConfig& c) { return std::to_string(c.seed); },
      [](PipelineConfig& c, const std::string& v) { c.seed = to_u64(v); });

  for (const char* domain : {"renv", "venv"}) {
    const bool is_renv = std::string(domain) == "renv";
    for (std::string_view field : scene::scene_field_names()) {
      const std::string f(field);
      add(std::string(domain) + "." + f,
          [is_renv, f](const PipelineConfig& c) {
            return scene::format_scene_field(is_renv ? c.renv : c.venv, f);
          },
          [is_renv, f](PipelineConfig& c, const std::string& v) {
            try {
              scene::apply_edit(is_renv ? c.renv : c.venv, {f, scene::EditOp::kSet, v});
            } catch (const std::exception& ex) {
              throw ValueError{ex.what()};
            }
          });
    }
    add(std::string(domain) + ".classes",
        [is_renv](const PipelineConfig& c) {
          return fmt_classes(is_renv ? c.renv_classes : c.venv_classes);
        },
        [is_renv](PipelineConfig& c, const std::string& v) {
          (is_renv ? c.renv_classes : c.venv_classes) = to_classes(v);
        });
  }

  add("model.conv_channels", [](const PipelineConfig& c) { return fmt_sizes(c.model.conv_channels); },
      [](PipelineConfig& c, const std::string& v) { c.model.conv_channels = to_sizes(v); });
  add("model.hidden_units", [](const PipelineConfig& c) { return std::to_string(c.model.hidden_units); },
      [](PipelineConfig& c, const std::string& v) { c.model.hidden_units = to_positive(v); });
  add("model.stem_pool", [](const PipelineConfig& c) { return std::to_string(c.model.stem_pool); },
      [](PipelineConfig& c, const std::string& v) { c.model.stem_pool = to_positive(v); });
  add("model.head_pool", [](const PipelineConfig& c) { return std::to_string(c.model.head_pool); },
      [](PipelineConfig& c, const std::string& v) { c.model.head_pool = to_positive(v); });

  add("train.learning_rate", [](const PipelineConfig& c) { return fmt_real(c.train.learning_rate); },
      [](PipelineConfig& c, const std::string& v) { c.train.learning_rate = non_negative(to_real(v)); });
  add("train.batch_size", [](const PipelineConfig& c) { return std::to_string(c.train.batch_size); },
      [](PipelineConfig& c, const std::string& v) { c.train.batch_size = to_positive(v); });
  add("train.epochs", [](const PipelineConfig& c) { return std::to_string(c.train.epochs); },
      [](PipelineConfig& c, const std::string& v) { c.train.epochs = to_positive(v); });
  add("train.val_fraction", [](const PipelineConfig& c) { return fmt_real(c.train.val_fraction); },
      [](PipelineConfig& c, const std::string& v) {
        c.train.val_fraction = in_range(to_real(v), 0, 1, true, true);
      });
  add("train.shuffle", [](const PipelineConfig& c) { return fmt_bool(c.train.shuffle); },
      [](PipelineConfig& c, const std::string& v) { c.train.shuffle = to_bool(v); });

  add("augment.lateral_inversion", [](const PipelineConfig& c) { return fmt_real(c.augment.lateral_inversion); },
      [](PipelineConfig& c, const std::string& v) {
        c.augment.lateral_inversion = in_range(to_real(v), 0, 1, false, false);
      });
  add("augment.shift_frac", [](const PipelineConfig& c) { return fmt_real(c.augment.shift_frac); },
      [](PipelineConfig& c, const std::string& v) { c.augment.shift_frac = non_negative(to_real(v)); });
  add("augment.shear_deg", [](const PipelineConfig& c) { return fmt_real(c.augment.shear_deg); },
      [](PipelineConfig& c, const std::string& v) {
        c.augment.shear_deg = in_range(to_real(v), 0, 90, false, true);
      });
  add("augment.zoom_min", [](const PipelineConfig& c) { return fmt_real(c.augment.zoom_min); },
      [](PipelineConfig& c, const std::string& v) {
        c.augment.zoom_min = in_range(to_real(v), 0, 1, true, false);
      });
  add("augment.zoom_max", [](const PipelineConfig& c) { return fmt_real(c.augment.zoom_max); },
      [](PipelineConfig& c, const std::string& v) {
        const double z = to_real(v);
        if (z < 1.0) throw ValueError{"must be >= 1"};
        c.augment.zoom_max = z;
      });
  add("augment.rotate_deg", [](const PipelineConfig& c) { return fmt_real(c.augment.rotate_deg); },
      [](PipelineConfig& c, const std::string& v) { c.augment.rotate_deg = non_negative(to_real(v)); });
  add("augment.brightness_delta", [](const PipelineConfig& c) { return fmt_real(c.augment.brightness_delta); },
      [](PipelineConfig& c, const std::string& v) {
        c.augment.brightness_delta = non_negative(to_real(v));
      });

  add("pipeline.augment_copies", [](const PipelineConfig& c) { return std::to_string(c.augment_copies); },
      [](PipelineConfig& c, const std::string& v) { c.augment_copies = to_size(v); });
  add("pipeline.renv_images_per_class",
      [](const PipelineConfig& c) { return std::to_string(c.renv_images_per_class); },
      [](PipelineConfig& c, const std::string& v) { c.renv_images_per_class = to_positive(v); });
  add("pipeline.venv_images_per_class",
      [](const PipelineConfig& c) { return std::to_string(c.venv_images_per_class); },
      [](PipelineConfig& c, const std::string& v) { c.venv_images_per_class = to_positive(v); });
  add("pipeline.venv_test_fraction", [](const PipelineConfig& c) { return fmt_real(c.venv_test_fraction); },
      [](PipelineConfig& c, const std::string& v) {
        c.venv_test_fraction = in_range(to_real(v), 0, 1, true, true);
      });
  add("pipeline.accuracy_threshold", [](const PipelineConfig& c) { return fmt_real(c.accuracy_threshold); },
      [](PipelineConfig& c, const std::string& v) {
        c.accuracy_threshold = in_range(to_real(v), 0, 1, false, false);
      });
  add("pipeline.renv_threshold", [](const PipelineConfig& c) { return fmt_real(c.renv_threshold); },
      [](PipelineConfig& c, const std::string& v) {
        c.renv_threshold = in_range(to_real(v), 0, 1, false, false);
      });
  add("pipeline.halt_on_weak_model", [](const PipelineConfig& c) { return fmt_bool(c.halt_on_weak_model); },
      [](PipelineConfig& c, const std::string& v) { c.halt_on_weak_model = to_bool(v); });
  add("pipeline.max_curation_iterations",
      [](const PipelineConfig& c) { return std::to_string(c.max_curation_iterations); },
      [](PipelineConfig& c, const std::string& v) { c.max_curation_iterations = to_size(v); });
  add("pipeline.curation_schedule", [](const PipelineConfig& c) { return fmt_schedule(c.curation_schedule); },
      [](PipelineConfig& c, const std::string& v) { c.curation_schedule = to_schedule(v); });
  add("pipeline.transfer_images_per_class",
      [](const PipelineConfig& c) { return std::to_string(c.transfer_images_per_class); },
      [](PipelineConfig& c, const std::string& v) { c.transfer_images_per_class = to_positive(v); });
  add("pipeline.transfer_lr_scale", [](const PipelineConfig& c) { return fmt_real(c.transfer_lr_scale); },
      [](PipelineConfig& c, const std::string& v) { c.transfer_lr_scale = non_negative(to_real(v)); });
  add("pipeline.transfer_epochs", [](const PipelineConfig& c) { return std::to_string(c.transfer_epochs); },
      [](PipelineConfig& c, const std::string& v) { c.transfer_epochs = to_positive(v); });

  add("diagnose.samples", [](const PipelineConfig& c) { return std::to_string(c.diagnose.samples); },
      [](PipelineConfig& c, const std::string& v) { c.diagnose.samples = to_size(v); });
  add("diagnose.baselines", [](const PipelineConfig& c) { return std::to_string(c.diagnose.baselines); },
      [](PipelineConfig& c, const std::string& v) { c.diagnose.baselines = to_positive(v); });
  add("diagnose.grid", [](const PipelineConfig& c) { return std::to_string(c.diagnose.grid); },
      [](PipelineConfig& c, const std::string& v) { c.diagnose.grid = to_positive(v); });
  add("diagnose.top_k", [](const PipelineConfig& c) { return std::to_string(c.diagnose.top_k); },
      [](PipelineConfig& c, const std::string& v) { c.diagnose.top_k = to_size(v); });
  add("diagnose.heatmaps", [](const PipelineConfig& c) { return std::to_string(c.diagnose.heatmaps); },
      [](PipelineConfig& c, const std::string& v) { c.diagnose.heatmaps = to_size(v); });
  return e;
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> e = build_entries();
  return e;
}

const std::vector<std::string>& key_list() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& e : entries()) k.push_back(e.key);
    return k;
  }();
  return keys;
}

const Entry* find_entry(std::string_view key) {
  for (const auto& e : entries()) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

void set_at(PipelineConfig& c, std::string_view key, std::string_view value,
            const std::string& source, int line) {
  const Entry* e = find_entry(key);
  if (!e) throw ConfigError(source, line, std::string(key), "unknown key");
  try {
    e->set(c, trim(value));
  } catch (const ValueError& v) {
    throw ConfigError(source, line, std::string(key), v.message);
  }
}

void validate_whole(const PipelineConfig& c, const std::string& source) {
  try {
    c.validate();
  } catch (const std::exception& ex) {
    throw ConfigError(source, 0, "", ex.what());
  }
}

}  // namespace

std::span<const std::string> config_keys() { return key_list(); }

void set_value(PipelineConfig& config, std::string_view key, std::string_view value) {
  set_at(config, key, value, "<value>", 0);
}

std::string get_value(const PipelineConfig& config, std::string_view key) {
  const Entry* e = find_entry(key);
  if (!e) throw ConfigError("<value>", 0, std::string(key), "unknown key");
  return e->get(config);
}

PipelineConfig parse_config(std::string_view text, std::string_view source) {
  const std::string src(source);
  PipelineConfig c;
  std::map<std::string, int> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(src, line_no, "", "expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw ConfigError(src, line_no, "", "missing key before '='");
    const auto [it, fresh] = seen.emplace(key, line_no);
    if (!fresh) {
      throw ConfigError(src, line_no, key,
                        "duplicate key (first set on line " + std::to_string(it->second) + ")");
    }
    set_at(c, key, std::string_view(line).substr(eq + 1), src, line_no);
  }
  validate_whole(c, src);
  return c;
}

PipelineConfig read_config_file(const std::filesystem::path& path) {
  return parse_config(read_text_file(path), path.string());
}

void apply_override(PipelineConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("--set", 0, trim(assignment), "expected key=value");
  }
  const std::string key = trim(assignment.substr(0, eq));
  set_at(config, key, assignment.substr(eq + 1), "--set", 0);
}

std::string serialize_config(const PipelineConfig& config) {
  std::string out = "# r2va pipeline configuration\n";
  std::string section;
  for (const auto& e : entries()) {
    const std::string head = e.key.substr(0, e.key.find('.'));
    if (head != section && !section.empty()) out += "\n";
    section = head;
    out += e.key + " = " + e.get(config) + "\n";
  }
  return out;
}

}  // namespace r2va::config
