// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#include "skf/camera.hpp"

#include <cmath>

#include "skf/error.hpp"

namespace skf {

void Camera::validate() const {
  if (width <= 0 || height <= 0) throw Error(Errc::kConfigError, "camera size must be positive");
  if (!(fov_y > 0.0 && fov_y < kPi)) throw Error(Errc::kConfigError, "fov_y must lie in (0, pi)");
  if (!(near > 0.0 && near < far)) throw Error(Errc::kConfigError, "require 0 < near < far");
  for (double v : pose.m)
    if (!std::isfinite(v)) throw Error(Errc::kConfigError, "pose contains non-finite values");
  const Vec3 a = pose.column(0), b = pose.column(1), c = pose.column(2);
  const double tol = 1e-6;
  if (std::abs(dot(a, a) - 1) > tol || std::abs(dot(b, b) - 1) > tol || std::abs(dot(c, c) - 1) > tol ||
      std::abs(dot(a, b)) > tol || std::abs(dot(a, c)) > tol || std::abs(dot(b, c)) > tol)
    throw Error(Errc::kConfigError, "pose rotation is not orthonormal");
  if (std::abs(dot(cross(a, b), c) - 1.0) > tol) throw Error(Errc::kConfigError, "pose rotation has det != +1");
  if (pose(3, 0) != 0 || pose(3, 1) != 0 || pose(3, 2) != 0 || pose(3, 3) != 1)
    throw Error(Errc::kConfigError, "pose bottom row must be [0 0 0 1]");
}

double Camera::focal() const { return 0.5 * height / std::tan(0.5 * fov_y); }

Camera Camera::with_resolution(int w, int h) const {
  Camera c = *this;
  // Keep the vertical field of view.
  c.width = w;
  c.height = h;
  return c;
}

Ray camera_ray(const Camera& cam, double u, double v) {
  const double f = cam.focal();
  const Vec3 d_cam{(u - 0.5 * cam.width) / f, (v - 0.5 * cam.height) / f, 1.0};
  return {cam.position(), normalize(cam.pose.transform_dir(d_cam))};
}

std::vector<Ray> generate_rays(const Camera& cam, std::span<const PixelIndex> subset) {
  std::vector<Ray> rays;
  if (subset.empty()) {
    rays.reserve(static_cast<size_t>(cam.width) * cam.height);
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) rays.push_back(camera_ray(cam, x + 0.5, y + 0.5));
  } else {
    rays.reserve(subset.size());
    for (const auto& p : subset) rays.push_back(camera_ray(cam, p.x + 0.5, p.y + 0.5));
  }
  return rays;
}

std::optional<Projection> try_project(const Vec3& p, const Camera& cam) {
  const Vec3 q = cam.pose.rigid_inverse().transform_point(p);
  if (!(q.z > 0.0)) return std::nullopt;
  const double f = cam.focal();
  Projection pr;
  pr.u = f * q.x / q.z + 0.5 * cam.width;
  pr.v = f * q.y / q.z + 0.5 * cam.height;
  pr.depth = q.z;
  // floor((u - 1/2) + 1/2): nearest pixel center.
  pr.px = static_cast<int>(std::floor(pr.u));
  pr.py = static_cast<int>(std::floor(pr.v));
  return pr;
}

Projection project(const Vec3& p, const Camera& cam) {
  auto pr = try_project(p, cam);
  if (!pr) throw Error(Errc::kBehindCamera, "point is behind the camera");
  return *pr;
}

Camera look_at_camera(const Vec3& eye, const Vec3& target, int width, int height, double fov_y_deg, double near,
                      double far) {
  const Vec3 fwd = normalize(target - eye);
  Vec3 up{0, 1, 0};
  if (std::abs(dot(fwd, up)) > 0.999) up = {0, 0, -1};
  const Vec3 right = normalize(cross(fwd, up));
  const Vec3 down = cross(fwd, right);
  Camera c;
  c.width = width;
  c.height = height;
  c.fov_y = deg2rad(fov_y_deg);
  c.pose = Mat4::from_axes(right, down, fwd, eye);
  c.near = near;
  c.far = far;
  return c;
}

Camera orbit_camera(double azimuth_deg, double elevation_deg, double radius, const Vec3& target, int width,
                    int height, double fov_y_deg, double near, double far) {
  const double az = deg2rad(azimuth_deg), el = deg2rad(elevation_deg);
  const Vec3 dir{std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az)};
  return look_at_camera(target + dir * radius, target, width, height, fov_y_deg, near, far);
}

OrbitAngles orbit_angles(const Camera& cam, const Vec3& target) {
  const Vec3 d = cam.position() - target;
  const double r = length(d);
  OrbitAngles a;
  a.radius = r;
  if (r == 0.0) return a;
  a.elevation_deg = rad2deg(std::asin(std::clamp(d.y / r, -1.0, 1.0)));
  a.azimuth_deg = rad2deg(std::atan2(d.x, d.z));
  return a;
}

nlohmann::json camera_to_json(const Camera& cam) {
  nlohmann::json j;
  j["width"] = cam.width;
  j["height"] = cam.height;
  j["fov_y_deg"] = rad2deg(cam.fov_y);
  j["pose_world_from_camera"] = cam.pose.m;
  j["near"] = cam.near;
  j["far"] = cam.far;
  return j;
}

Camera camera_from_json(const nlohmann::json& j) {
  Camera c;
  try {
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    c.fov_y = deg2rad(j.at("fov_y_deg").get<double>());
    const auto& m = j.at("pose_world_from_camera");
    if (!m.is_array() || m.size() != 16) throw Error(Errc::kConfigError, "pose_world_from_camera needs 16 values");
    for (int i = 0; i < 16; ++i) c.pose.m[i] = m[i].get<double>();
    c.near = j.value("near", 0.1);
    c.far = j.value("far", 10.0);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kConfigError, std::string("camera json: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace skf
