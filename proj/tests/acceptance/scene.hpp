// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "skf/editor.hpp"
#include "skf/sketch.hpp"

namespace skf::scene {

// Sphere of radius 0.5 in [-1,1]^3 with a cube resting on its top cap.
inline const Aabb kWorld{{-1, -1, -1}, {1, 1, 1}};
inline const Aabb kCube{{-0.25, 0.45, -0.25}, {0.25, 0.95, 0.25}};
inline const Vec3 kSketchTarget{0.0, 0.45, 0.0};

inline RadianceField sphere_base(int res = 64) { return synth_scene(SceneKind::kSphere, {res, res, res}, kWorld); }

// Exact silhouette of `box` seen from `cam`: pixel centers whose ray hits it.
inline Mask box_silhouette(const Camera& cam, const Aabb& box) {
  Mask m(cam.width, cam.height);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const Ray r = camera_ray(cam, x + 0.5, y + 0.5);
      double t0, t1;
      m.set(x, y, ray_box(r.origin, r.dir, box, t0, t1) && t1 > 0);
    }
  return m;
}

inline Camera sketch_camera(double azimuth_deg, int res = 64, double radius = 5.5) {
  return orbit_camera(azimuth_deg, 0.0, radius, kSketchTarget, res, res);
}

// Two orthogonal sketches (front, side) outlining the cube.
inline SketchSet cube_sketches(const Aabb& box = kCube, int res = 64, double radius = 5.5) {
  SketchSet set;
  for (double az : {0.0, 90.0}) {
    const Camera cam = sketch_camera(az, res, radius);
    set.views.emplace_back(cam, box_silhouette(cam, box));
  }
  return set;
}

}  // namespace skf::scene
