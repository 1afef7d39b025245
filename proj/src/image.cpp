// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#include "skf/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "skf/error.hpp"
#include "skf/io.hpp"

namespace skf {

size_t Mask::count() const { return static_cast<size_t>(std::count(data.begin(), data.end(), uint8_t{1})); }

namespace {

uint8_t to_byte(float v) {
  if (!(v > 0.0f)) return 0;
  if (v >= 1.0f) return 255;
  return static_cast<uint8_t>(std::lround(v * 255.0f));
}

std::vector<uint8_t> encode_bytes(const uint8_t* pixels, int w, int h, int channels) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  switch (channels) {
    case 1: img.format = PNG_FORMAT_GRAY; break;
    case 2: img.format = PNG_FORMAT_GA; break;
    case 3: img.format = PNG_FORMAT_RGB; break;
    case 4: img.format = PNG_FORMAT_RGBA; break;
    default: throw Error(Errc::kShapeMismatch, "PNG needs 1 to 4 channels");
  }
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, pixels, 0, nullptr))
    throw Error(Errc::kIoError, std::string("png encode: ") + img.message);
  std::vector<uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, pixels, 0, nullptr))
    throw Error(Errc::kIoError, std::string("png encode: ") + img.message);
  out.resize(size);
  return out;
}

}  // namespace

std::vector<uint8_t> encode_png(const Image& img) {
  std::vector<uint8_t> px(img.data.size());
  std::transform(img.data.begin(), img.data.end(), px.begin(), to_byte);
  return encode_bytes(px.data(), img.width, img.height, img.channels);
}

void write_png(const std::string& path, const Image& img) { write_file_atomic(path, encode_png(img)); }

void write_png(const std::string& path, const Mask& mask) {
  std::vector<uint8_t> px(mask.data.size());
  std::transform(mask.data.begin(), mask.data.end(), px.begin(), [](uint8_t v) { return v ? 255 : 0; });
  write_file_atomic(path, encode_bytes(px.data(), mask.width, mask.height, 1));
}

Image decode_png(const std::vector<uint8_t>& bytes) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
    throw Error(Errc::kParseError, std::string("png decode: ") + img.message);
  int channels = PNG_IMAGE_SAMPLE_CHANNELS(img.format);
  if (img.format & PNG_FORMAT_FLAG_COLORMAP) channels = 4;
  switch (channels) {
    case 1: img.format = PNG_FORMAT_GRAY; break;
    case 2: img.format = PNG_FORMAT_GA; break;
    case 3: img.format = PNG_FORMAT_RGB; break;
    default: img.format = PNG_FORMAT_RGBA; channels = 4; break;
  }
  std::vector<uint8_t> px(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, px.data(), 0, nullptr)) {
    png_image_free(&img);
    throw Error(Errc::kParseError, std::string("png decode: ") + img.message);
  }
  Image out(static_cast<int>(img.width), static_cast<int>(img.height), channels);
  for (size_t i = 0; i < px.size(); ++i) out.data[i] = px[i] / 255.0f;
  return out;
}

Image read_png(const std::string& path) { return decode_png(read_file_bytes(path)); }

Mask mask_from_image(const Image& img) {
  Mask m(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      // Gray, or the mean of the color channels; alpha is ignored.
      const int color_channels = img.channels >= 3 ? 3 : 1;
      float v = 0.0f;
      for (int c = 0; c < color_channels; ++c) v += img.at(x, y, c);
      v /= static_cast<float>(color_channels);
      m.set(x, y, std::lround(v * 255.0f) > 127);
    }
  return m;
}

Mask read_mask_png(const std::string& path) { return mask_from_image(read_png(path)); }

void write_f32_planar(const std::string& path, const Image& img) {
  ByteWriter w;
  w.u32(static_cast<uint32_t>(img.width));
  w.u32(static_cast<uint32_t>(img.height));
  w.u32(static_cast<uint32_t>(img.channels));
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) w.f32(img.at(x, y, c));
  write_file_atomic(path, w.buffer());
}

Image read_f32_planar(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes);
  const int w = static_cast<int>(r.u32()), h = static_cast<int>(r.u32()), c = static_cast<int>(r.u32());
  if (static_cast<uint64_t>(w) * h * c * 4 != r.remaining())
    throw Error(Errc::kTruncatedFile, "f32 dump size does not match header: " + path);
  Image img(w, h, c);
  for (int k = 0; k < c; ++k)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) img.at(x, y, k) = r.f32();
  return img;
}

}  // namespace skf
