// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstring>

#include "skf/error.hpp"
#include "skf/field.hpp"
#include "skf/io.hpp"

namespace skf {

namespace {
constexpr char kMagic[] = "SKFDv001";
constexpr size_t kMagicLen = 8;
constexpr uint8_t kFlagOccupancy = 1;
// Reserved metadata key carrying the occupancy threshold through the file.
constexpr char kThresholdKey[] = "_prune_threshold";
}  // namespace

std::vector<uint8_t> serialize_field(const RadianceField& field) {
  field.validate();
  ByteWriter w;
  w.str(std::string_view(kMagic, kMagicLen));
  w.u32(static_cast<uint32_t>(field.res.x));
  w.u32(static_cast<uint32_t>(field.res.y));
  w.u32(static_cast<uint32_t>(field.res.z));
  for (int a = 0; a < 3; ++a) w.f64(field.bbox.min[a]);
  for (int a = 0; a < 3; ++a) w.f64(field.bbox.max[a]);
  w.u8(kFlagOccupancy);
  for (float v : field.density) w.f32(v);
  for (float v : field.color) w.f32(v);
  for (uint64_t word : field.occupancy.words()) w.u64(word);
  nlohmann::json meta = field.metadata;
  meta[kThresholdKey] = field.occupancy.prune_threshold();
  const std::string blob = meta.dump();
  w.u32(static_cast<uint32_t>(blob.size()));
  w.str(blob);
  w.u32(crc32_bytes(w.buffer()));
  return std::move(w.buffer());
}

RadianceField deserialize_field(std::span<const uint8_t> bytes) {
  if (bytes.size() < kMagicLen) throw Error(Errc::kTruncatedFile, "file shorter than magic");
  if (std::memcmp(bytes.data(), kMagic, 5) != 0) throw Error(Errc::kBadMagic, "not an SKFD checkpoint");
  if (std::memcmp(bytes.data() + 5, kMagic + 5, 3) != 0)
    throw Error(Errc::kVersionMismatch,
                "unsupported checkpoint version " + std::string(reinterpret_cast<const char*>(bytes.data()) + 5, 3));
  ByteReader r(bytes);
  r.take(kMagicLen);
  GridRes res;
  res.x = static_cast<int>(r.u32());
  res.y = static_cast<int>(r.u32());
  res.z = static_cast<int>(r.u32());
  if (res.x < 2 || res.y < 2 || res.z < 2 || res.x > 4096 || res.y > 4096 || res.z > 4096)
    throw Error(Errc::kParseError, "implausible resolution in checkpoint");
  Aabb bbox;
  for (int a = 0; a < 3; ++a) bbox.min[a] = r.f64();
  for (int a = 0; a < 3; ++a) bbox.max[a] = r.f64();
  const uint8_t flags = r.u8();
  const size_t n = res.count();
  // Size check before allocating.
  if (r.remaining() < n * 16) throw Error(Errc::kTruncatedFile, "checkpoint truncated inside grids");

  RadianceField f;
  f.res = res;
  f.bbox = bbox;
  f.density.resize(n);
  f.color.resize(3 * n);
  for (auto& v : f.density) v = r.f32();
  for (auto& v : f.color) v = r.f32();
  f.occupancy = OccupancyGrid(res);
  if (flags & kFlagOccupancy)
    for (auto& word : f.occupancy.words()) word = r.u64();
  else
    f.occupancy.fill(true);
  const uint32_t meta_len = r.u32();
  const auto blob = r.take(meta_len);
  const size_t covered = r.offset();
  const uint32_t stored_crc = r.u32();
  if (stored_crc != crc32_bytes(bytes.subspan(0, covered)))
    throw Error(Errc::kChecksumMismatch, "checkpoint CRC32 mismatch");
  try {
    f.metadata = nlohmann::json::parse(blob.begin(), blob.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kParseError, std::string("checkpoint metadata: ") + e.what());
  }
  if (!f.metadata.is_object()) f.metadata = nlohmann::json::object();
  if (f.metadata.contains(kThresholdKey)) {
    f.occupancy.set_prune_threshold(f.metadata[kThresholdKey].get<double>());
    f.metadata.erase(kThresholdKey);
  }
  f.validate();
  return f;
}

void save_field(const RadianceField& field, const std::string& path) {
  write_file_atomic(path, serialize_field(field));
}

RadianceField load_field(const std::string& path) { return deserialize_field(read_file_bytes(path)); }

std::string field_hash(const RadianceField& field) {
  uint64_t h = fnv1a64(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(field.density.data()),
                                                field.density.size() * sizeof(float)));
  h = fnv1a64(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(field.color.data()),
                                       field.color.size() * sizeof(float)),
              h);
  const auto& words = field.occupancy.words();
  h = fnv1a64(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(words.data()), words.size() * 8), h);
  return hex64(h);
}

}  // namespace skf
