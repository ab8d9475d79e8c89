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

#include "r2va/image.h"

#include <cctype>
#include <charconv>
#include <stdexcept>
#include <string>

#include "r2va/fs_util.h"

namespace r2va {

Image::Image(int w, int h, int c, std::uint8_t fill)
    : width(w), height(h), channels(c) {
  if (w <= 0 || h <= 0 || (c != 1 && c != 3)) {
    throw std::invalid_argument("Image: bad dimensions");
  }
  pixels.assign(static_cast<std::size_t>(w) * h * c, fill);
}

Image flip_horizontal(const Image& image) {
  Image out = image;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < image.channels; ++c) {
        out.at(image.width - 1 - x, y, c) = image.at(x, y, c);
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_pnm(const Image& image) {
  const std::string header = std::string(image.channels == 3 ? "P6" : "P5") +
                             "\n" + std::to_string(image.width) + " " +
                             std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

Image decode_pnm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t += static_cast<char>(bytes[pos++]);
    return t;
  };
  auto number = [&]() {
    const std::string t = token();
    int v = 0;
    const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || end != t.data() + t.size() || v <= 0 ||
        v > 1 << 16) {
      throw std::runtime_error("PNM header: bad number '" + t + "'");
    }
    return v;
  };
  const std::string magic = token();
  if (magic != "P6" && magic != "P5") throw std::runtime_error("not a binary PPM/PGM");
  const int w = number();
  const int h = number();
  const int maxval = number();
  if (maxval != 255) throw std::runtime_error("PNM maxval must be 255");
  ++pos;  // single whitespace before raster
  Image image(w, h, magic == "P6" ? 3 : 1);
  if (pos > bytes.size() || bytes.size() - pos < image.pixels.size()) {
    throw std::runtime_error("PNM raster truncated");
  }
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
            bytes.begin() + static_cast<std::ptrdiff_t>(pos + image.pixels.size()),
            image.pixels.begin());
  return image;
}

void write_pnm(const std::filesystem::path& path, const Image& image) {
  write_file_atomic(path, encode_pnm(image));
}

Image read_pnm(const std::filesystem::path& path) {
  try {
    return decode_pnm(read_file_bytes(path));
  } catch (const std::exception& e) {
    throw std::runtime_error("cannot read image " + path.string() + ": " +
                             e.what());
  }
}

}  // namespace r2va
