// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "skf/vec.hpp"

namespace skf {

// Pinhole camera. Camera space is x right, y down, z forward; pixel (0,0) is
// the top-left corner of the image, pixel centers sit at (i + 0.5, j + 0.5)
// and the principal point is (width/2, height/2).
struct Camera {
  int width = 64;
  int height = 64;
  double fov_y = deg2rad(40.0);
  Mat4 pose;  // world_from_camera
  double near = 0.1;
  double far = 10.0;

  // Throws Errc::kConfigError on a non-rigid pose or bad intrinsics.
  void validate() const;

  double focal() const;  // in pixels, same for both axes
  Vec3 position() const { return pose.translation(); }
  Vec3 forward() const { return normalize(pose.column(2)); }
  Camera with_resolution(int w, int h) const;

  bool operator==(const Camera&) const = default;
};

struct Ray {
  Vec3 origin;
  Vec3 dir;  // unit length
};

struct PixelIndex {
  int x = 0, y = 0;
};

// Ray through continuous pixel coordinate (u, v).
Ray camera_ray(const Camera& cam, double u, double v);
// One ray per pixel center, row-major, or one per requested pixel.
std::vector<Ray> generate_rays(const Camera& cam, std::span<const PixelIndex> subset = {});

struct Projection {
  double u = 0, v = 0;  // continuous pixel coordinate
  double depth = 0;     // camera-space z
  int px = 0, py = 0;   // nearest pixel (rounded in the pixel-center frame)
};

// Nullopt when the point is not strictly in front of the camera.
std::optional<Projection> try_project(const Vec3& p, const Camera& cam);
// Throws Errc::kBehindCamera.
Projection project(const Vec3& p, const Camera& cam);

// Camera on a sphere around `target`; azimuth 0 looks from +z, elevation
// positive is above (world +y up).
Camera orbit_camera(double azimuth_deg, double elevation_deg, double radius, const Vec3& target, int width,
                    int height, double fov_y_deg = 40.0, double near = 0.1, double far = 10.0);
Camera look_at_camera(const Vec3& eye, const Vec3& target, int width, int height, double fov_y_deg = 40.0,
                      double near = 0.1, double far = 10.0);

struct OrbitAngles {
  double azimuth_deg = 0;
  double elevation_deg = 0;
  double radius = 0;
};
OrbitAngles orbit_angles(const Camera& cam, const Vec3& target);

// {"width","height","fov_y_deg","pose_world_from_camera":[16 row-major],"near","far"}
nlohmann::json camera_to_json(const Camera& cam);
Camera camera_from_json(const nlohmann::json& j);

}  // namespace skf
