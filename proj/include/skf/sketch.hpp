// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skf/camera.hpp"
#include "skf/field.hpp"
#include "skf/image.hpp"

namespace skf {

// Exact Euclidean distance transform: distance in pixels from each pixel
// center to the nearest set pixel center (0 on the mask). Pixels of an empty
// mask get +inf.
std::vector<double> euclidean_distance_transform(const Mask& mask);

// A sketch drawn over one rendered view. Immutable after construction.
class SketchView {
 public:
  SketchView(Camera camera, Mask mask, std::optional<Image> canvas = std::nullopt);

  const Camera& camera() const { return camera_; }
  const Mask& mask() const { return mask_; }
  const std::optional<Image>& canvas() const { return canvas_; }

  // Distance to the mask in units of max(H, W); 0 exactly on the mask.
  double dist(int x, int y) const { return dist_[static_cast<size_t>(y) * mask_.width + x]; }
  const std::vector<double>& dist_field() const { return dist_; }
  double normalizer() const { return norm_; }
  // Normalized image diagonal.
  double diagonal() const { return diag_; }
  const Mat4& camera_from_world() const { return cam_from_world_; }

 private:
  Camera camera_;
  Mask mask_;
  std::optional<Image> canvas_;
  std::vector<double> dist_;
  Mat4 cam_from_world_;
  double norm_ = 1.0;
  double diag_ = 1.0;
};

struct SketchSet {
  std::vector<SketchView> views;
  std::optional<Aabb> edit_bbox;
};

// Squared (power 2) or plain (power 1) normalized distance from the rounded
// projection of `p` to the mask. Off-image projections extend monotonically
// from the clamped border pixel; points behind the camera get
// (2 * diagonal)^power.
double per_view_distance(const Vec3& p, const SketchView& view, int power = 2);
double multiview_distance(const Vec3& p, const SketchSet& set, int power = 2);

// w = 1 - exp(-D^2 / (2 beta^2)). Throws Errc::kConfigError for beta <= 0.
double preservation_weight(double D, double beta);

// Axis-aligned bound of the voxelized intersection of the views' mask
// bounding-rectangle frusta, clipped to `field_bbox`. Throws
// Errc::kEmptyIntersection when no cell is inside every frustum.
Aabb compute_edit_bbox(std::span<const SketchView> views, const Aabb& field_bbox, GridRes cells);
void bind_edit_bbox(SketchSet& set, const RadianceField& field);

// Voxel lattice points / occupancy cells whose center projects inside every
// mask.
bool in_visual_hull(const Vec3& p, std::span<const SketchView> views);

// Empties the visual hull of the masks: lattice points inside it get
// kCarvedDensityParam and hull cells lose their occupancy bit. Idempotent.
// Throws Errc::kEmptySketchSet.
void carve(RadianceField& field, const SketchSet& sketches);

using Polyline = std::vector<std::array<double, 2>>;

struct FillResult {
  Mask mask;
  bool open_curve = false;  // nothing enclosed; mask is the dilated stroke
};

// Rasterizes strokes at 2 px width and fills enclosed regions. Polylines
// whose endpoints nearly meet are closed first.
FillResult fill_scribble(std::span<const Polyline> strokes, int width, int height);
// Bitmap variant: an already-filled blob comes back unchanged.
FillResult fill_scribble(const Mask& bitmap);

struct SketchPackage {
  SketchSet set;
  double beta = 0.05;
  int distance_power = 2;
};

// Directory layout: view_%02d/{mask.png,camera.json[,canvas.png]} plus
// sketchset.json.
void save_sketch_package(const std::string& dir, const SketchSet& set, double beta, int distance_power);
SketchPackage load_sketch_package(const std::string& dir);

std::string sketch_hash(const SketchSet& set);

}  // namespace skf
