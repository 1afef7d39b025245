// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace skf {

// Interleaved float image, row-major, (y * width + x) * channels + c.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.0f)
      : width(w), height(h), channels(c), data(static_cast<size_t>(w) * h * c, fill) {}

  float& at(int x, int y, int c = 0) { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }
  float at(int x, int y, int c = 0) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
  bool operator==(const Image&) const = default;
};

struct Mask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> data;  // 0 or 1

  Mask() = default;
  Mask(int w, int h, uint8_t fill = 0) : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

  bool at(int x, int y) const { return data[static_cast<size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { data[static_cast<size_t>(y) * width + x] = v ? 1 : 0; }
  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  size_t count() const;
  bool operator==(const Mask&) const = default;
};

// 8-bit PNG I/O. Float channels are clamped to [0,1] and rounded.
void write_png(const std::string& path, const Image& img);
void write_png(const std::string& path, const Mask& mask);
std::vector<uint8_t> encode_png(const Image& img);
Image read_png(const std::string& path);
Image decode_png(const std::vector<uint8_t>& bytes);
// Grayscale threshold: value > 127 is inside.
Mask read_mask_png(const std::string& path);
Mask mask_from_image(const Image& img);

// Raw little-endian f32 planar dump: u32 width, u32 height, u32 channels, then
// channel planes.
void write_f32_planar(const std::string& path, const Image& img);
Image read_f32_planar(const std::string& path);

}  // namespace skf
