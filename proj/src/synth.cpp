// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <string>

#include "skf/error.hpp"
#include "skf/field.hpp"

namespace skf {

SceneKind scene_kind_from_string(const std::string& s) {
  if (s == "sphere") return SceneKind::kSphere;
  if (s == "box") return SceneKind::kBox;
  if (s == "plate") return SceneKind::kPlate;
  if (s == "composite") return SceneKind::kComposite;
  throw Error(Errc::kConfigError, "unknown scene kind '" + s + "'");
}

const char* to_string(SceneKind k) {
  switch (k) {
    case SceneKind::kSphere: return "sphere";
    case SceneKind::kBox: return "box";
    case SceneKind::kPlate: return "plate";
    case SceneKind::kComposite: return "composite";
  }
  return "?";
}

namespace {

double sd_sphere(const Vec3& p, const Vec3& c, double r) { return length(p - c) - r; }

double sd_box(const Vec3& p, const Vec3& c, const Vec3& half) {
  const Vec3 q{std::abs(p.x - c.x) - half.x, std::abs(p.y - c.y) - half.y, std::abs(p.z - c.z) - half.z};
  const Vec3 outside = vmax(q, {0, 0, 0});
  return length(outside) + std::min(std::max(q.x, std::max(q.y, q.z)), 0.0);
}

double logit(double a) {
  a = std::clamp(a, 1e-4, 1.0 - 1e-4);
  return std::log(a / (1.0 - a));
}

}  // namespace

RadianceField synth_scene(SceneKind kind, GridRes res, const Aabb& bbox, const SynthOptions& opt) {
  RadianceField f(res, bbox, kEmptyDensityParam, 0.0f);
  const Vec3 c = bbox.center();
  const Vec3 he = bbox.extent() * 0.5;
  const double h = std::min(he.x, std::min(he.y, he.z));
  const Vec3 sp = f.spacing();
  const double voxel = std::max(sp.x, std::max(sp.y, sp.z));
  const double empty_density = softplus(kEmptyDensityParam);

  const Vec3 plate_center{c.x, c.y - 0.55 * h, c.z};
  const Vec3 plate_half{0.8 * h, 0.06 * h, 0.8 * h};
  const double comp_r = 0.35 * h;
  const Vec3 comp_center{c.x, plate_center.y + plate_half.y + comp_r, c.z};

  // Returns {sdf, part}.
  auto shape = [&](const Vec3& p) -> std::pair<double, int> {
    switch (kind) {
      case SceneKind::kSphere: return {sd_sphere(p, c, opt.radius_fraction * h), 0};
      case SceneKind::kBox: {
        const double b = opt.radius_fraction * h;
        return {sd_box(p, c, {b, b, b}), 0};
      }
      case SceneKind::kPlate: return {sd_box(p, plate_center, plate_half), 1};
      case SceneKind::kComposite: {
        const double s = sd_sphere(p, comp_center, comp_r);
        const double b = sd_box(p, plate_center, plate_half);
        return s <= b ? std::pair{s, 0} : std::pair{b, 1};
      }
    }
    return {1e9, 0};
  };

  const double logits[2][3] = {{logit(opt.albedo.x), logit(opt.albedo.y), logit(opt.albedo.z)},
                               {logit(opt.secondary_albedo.x), logit(opt.secondary_albedo.y),
                                logit(opt.secondary_albedo.z)}};
  for (int k = 0; k < res.z; ++k)
    for (int j = 0; j < res.y; ++j)
      for (int i = 0; i < res.x; ++i) {
        const auto [sdf, part] = shape(f.lattice_point(i, j, k));
        const size_t idx = f.index(i, j, k);
        // Ramp from 0.5 to 1.5 voxels inside the surface; trilinear support
        // then puts the rendered silhouette on the surface.
        const double s = std::clamp(-0.5 - sdf / voxel, 0.0, 1.0);
        const double sigma = opt.inside_density * s;
        f.density[idx] = sigma > empty_density ? static_cast<float>(softplus_inverse(sigma)) : kEmptyDensityParam;
        for (int ch = 0; ch < 3; ++ch) f.color[3 * idx + ch] = static_cast<float>(logits[part][ch]);
      }
  update_occupancy(f);
  f.metadata["created_by"] = "synth";
  f.metadata["scene"] = to_string(kind);
  return f;
}

}  // namespace skf
