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

#ifndef R2VA_CONFIG_H_
#define R2VA_CONFIG_H_

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "r2va/pipeline.h"

namespace r2va::config {

// Error in a config file or override, carrying where it happened.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string source, int line, std::string key, const std::string& message);

  const std::string& source() const { return source_; }
  int line() const { return line_; }  // 0 when not tied to a line
  const std::string& key() const { return key_; }

 private:
  std::string source_;
  int line_;
  std::string key_;
};

// Config text: one `dotted.key = value` per line; `#` starts a comment line;
// blank lines are ignored. Every key is optional (an empty file gives the
// defaults), keys may appear at most once and unknown keys are errors. Lists
// are comma separated; curation_schedule separates deltas with `|`.
pipeline::PipelineConfig parse_config(std::string_view text,
                                      std::string_view source = "<config>");
pipeline::PipelineConfig read_config_file(const std::filesystem::path& path);

// Applies a single `key=value` assignment, as given to --set.
void apply_override(pipeline::PipelineConfig& config, std::string_view assignment);
// Sets one key from its text value without re-validating the whole config.
void set_value(pipeline::PipelineConfig& config, std::string_view key, std::string_view value);
std::string get_value(const pipeline::PipelineConfig& config, std::string_view key);

// Every key in documentation order.
std::span<const std::string> config_keys();

// All keys with their current values; parse_config(serialize_config(c)) == c.
std::string serialize_config(const pipeline::PipelineConfig& config);

}  // namespace r2va::config

#endif  // R2VA_CONFIG_H_
