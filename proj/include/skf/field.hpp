// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "skf/vec.hpp"

namespace skf {

struct GridRes {
  int x = 0, y = 0, z = 0;

  size_t count() const { return static_cast<size_t>(x) * y * z; }
  int axis(int a) const { return a == 0 ? x : (a == 1 ? y : z); }
  bool operator==(const GridRes&) const = default;
};

// Pre-activation value that renders as empty space in synthetic scenes.
// softplus(-7) ~ 9.1e-4.
inline constexpr float kEmptyDensityParam = -7.0f;
// Value written by carving; activation is below 1e-13.
inline constexpr float kCarvedDensityParam = -30.0f;
inline constexpr double kDefaultPruneThreshold = 1.0;

class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(GridRes res, double prune_threshold = kDefaultPruneThreshold);

  const GridRes& res() const { return res_; }
  double prune_threshold() const { return prune_threshold_; }
  void set_prune_threshold(double t) { prune_threshold_ = t; }

  size_t index(int i, int j, int k) const {
    return (static_cast<size_t>(k) * res_.y + j) * res_.x + i;
  }
  bool get(size_t cell) const { return (words_[cell >> 6] >> (cell & 63)) & 1u; }
  void set(size_t cell, bool on) {
    if (on)
      words_[cell >> 6] |= (uint64_t{1} << (cell & 63));
    else
      words_[cell >> 6] &= ~(uint64_t{1} << (cell & 63));
  }
  void fill(bool on);
  size_t count_set() const;

  const std::vector<uint64_t>& words() const { return words_; }
  std::vector<uint64_t>& words() { return words_; }

  // Cell bounds in world space for a grid spanning `bbox`.
  Aabb cell_bounds(const Aabb& bbox, int i, int j, int k) const;
  // Tight bound of all set cells, or an empty box.
  Aabb occupied_bounds(const Aabb& bbox) const;

  bool operator==(const OccupancyGrid&) const = default;

 private:
  GridRes res_;
  double prune_threshold_ = kDefaultPruneThreshold;
  std::vector<uint64_t> words_;
};

struct FieldSample {
  double density = 0.0;  // activated, >= 0
  Vec3 color;            // activated, [0,1]^3
};

// Corner indices and weights for trilinear interpolation at a point.
struct TrilinearStencil {
  std::array<uint32_t, 8> index;
  std::array<double, 8> weight;
};

// Dense voxel radiance field. Parameters live on the lattice points
// bbox.min + (i,j,k) * spacing(); activations are softplus (density) and
// sigmoid (color). The occupancy grid has the same resolution, its cells
// tiling the bbox uniformly.
struct RadianceField {
  GridRes res;
  Aabb bbox;
  std::vector<float> density;  // pre-activation, x-fastest
  std::vector<float> color;    // pre-activation, 3 interleaved per voxel
  OccupancyGrid occupancy;
  nlohmann::json metadata = nlohmann::json::object();

  RadianceField() = default;
  RadianceField(GridRes r, const Aabb& box, float density_init = 0.0f, float color_init = 0.0f);

  void validate() const;

  size_t voxel_count() const { return res.count(); }
  size_t index(int i, int j, int k) const { return (static_cast<size_t>(k) * res.y + j) * res.x + i; }
  Vec3 spacing() const;
  Vec3 lattice_point(int i, int j, int k) const;

  bool stencil(const Vec3& p, TrilinearStencil& st) const;
  // Occupancy cell containing p (clamped); p must be inside bbox.
  size_t occupancy_cell(const Vec3& p) const;
  bool occupied(const Vec3& p) const { return occupancy.get(occupancy_cell(p)); }

  double density_param_at(const TrilinearStencil& st) const;
  Vec3 color_param_at(const TrilinearStencil& st) const;

  FieldSample eval(const Vec3& p) const;
  std::vector<FieldSample> eval(std::span<const Vec3> points) const;

  bool operator==(const RadianceField& o) const;
};

// Sets every occupancy cell overlapping `box`. Throws Errc::kNoOverlap when
// the box misses the field bbox.
void seed_edit_region(RadianceField& field, const Aabb& box);

// Max activated density over the 8 corners and center of one occupancy cell.
double cell_max_density(const RadianceField& field, int i, int j, int k);

// Rebuilds every bit from density: on iff cell_max_density > threshold.
void update_occupancy(RadianceField& field);

// Periodic occupancy refresh. Identity while iteration < warmup_iters or off
// the period; returns true when the grid was rebuilt.
bool prune(RadianceField& field, int iteration, int warmup_iters, int period);

enum class SceneKind { kSphere, kBox, kPlate, kComposite };

SceneKind scene_kind_from_string(const std::string& s);
const char* to_string(SceneKind k);

struct SynthOptions {
  double inside_density = 1000.0;
  Vec3 albedo{0.8, 0.45, 0.25};
  Vec3 secondary_albedo{0.25, 0.45, 0.8};
  double radius_fraction = 0.5;  // of the smallest bbox half-extent
};

RadianceField synth_scene(SceneKind kind, GridRes res, const Aabb& bbox, const SynthOptions& opt = {});

// Checkpoint I/O ("SKFDv001").
std::vector<uint8_t> serialize_field(const RadianceField& field);
RadianceField deserialize_field(std::span<const uint8_t> bytes);
void save_field(const RadianceField& field, const std::string& path);
RadianceField load_field(const std::string& path);

// FNV-1a over the serialized grids; used for provenance.
std::string field_hash(const RadianceField& field);

}  // namespace skf
