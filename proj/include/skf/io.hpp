// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace skf {

std::vector<uint8_t> read_file_bytes(const std::string& path);
std::string read_file_text(const std::string& path);

// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::string& path, std::span<const uint8_t> bytes);
void write_file_atomic(const std::string& path, std::string_view text);

uint32_t crc32_bytes(std::span<const uint8_t> bytes);
uint64_t fnv1a64(std::span<const uint8_t> bytes, uint64_t seed = 0xcbf29ce484222325ull);
uint64_t fnv1a64(std::string_view text, uint64_t seed = 0xcbf29ce484222325ull);
std::string hex64(uint64_t v);

std::string base64_encode(std::span<const uint8_t> bytes);
std::vector<uint8_t> base64_decode(std::string_view text);

// Little-endian append/read helpers for binary formats.
class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u32(uint32_t v);
  void u64(uint64_t v);
  void f32(float v);
  void f64(double v);
  void bytes(std::span<const uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void str(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  std::vector<uint8_t>& buffer() { return buf_; }

 private:
  std::vector<uint8_t> buf_;
};

// Throws Errc::kTruncatedFile when reading past the end.
class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> b) : buf_(b) {}
  uint8_t u8();
  uint32_t u32();
  uint64_t u64();
  float f32();
  double f64();
  std::span<const uint8_t> take(size_t n);
  size_t offset() const { return pos_; }
  size_t remaining() const { return buf_.size() - pos_; }

 private:
  std::span<const uint8_t> buf_;
  size_t pos_ = 0;
};

}  // namespace skf
