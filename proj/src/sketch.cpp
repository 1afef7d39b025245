// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#include "skf/sketch.hpp"

#include <cmath>
#include <limits>

#include "skf/error.hpp"

namespace skf {

namespace {

constexpr double kInf = 1e20;

// 1D squared distance transform of a sampled function (lower envelope of
// parabolas).
void dt_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
  v.resize(n);
  z.resize(n + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = 1; q < n; ++q) {
    double s;
    for (;;) {
      const int r = v[k];
      s = ((f[q] + double(q) * q) - (f[r] + double(r) * r)) / (2.0 * q - 2.0 * r);
      if (s <= z[k] && k > 0)
        --k;
      else
        break;
    }
    if (s <= z[k]) {
      // k == 0 and the new parabola dominates everywhere.
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

std::vector<double> euclidean_distance_transform(const Mask& mask) {
  const int w = mask.width, h = mask.height;
  std::vector<double> g(static_cast<size_t>(w) * h);
  bool any = false;
  for (size_t i = 0; i < g.size(); ++i) {
    g[i] = mask.data[i] ? 0.0 : kInf;
    any = any || mask.data[i];
  }
  if (!any) {
    std::fill(g.begin(), g.end(), std::numeric_limits<double>::infinity());
    return g;
  }
  std::vector<int> v;
  std::vector<double> z, col_in(h), col_out(h), row_out(w);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) col_in[y] = g[static_cast<size_t>(y) * w + x];
    dt_1d(col_in.data(), col_out.data(), h, v, z);
    for (int y = 0; y < h; ++y) g[static_cast<size_t>(y) * w + x] = col_out[y];
  }
  for (int y = 0; y < h; ++y) {
    double* row = &g[static_cast<size_t>(y) * w];
    dt_1d(row, row_out.data(), w, v, z);
    for (int x = 0; x < w; ++x) row[x] = std::sqrt(row_out[x]);
  }
  return g;
}

SketchView::SketchView(Camera camera, Mask mask, std::optional<Image> canvas)
    : camera_(std::move(camera)), mask_(std::move(mask)), canvas_(std::move(canvas)) {
  if (mask_.width <= 0 || mask_.height <= 0) throw Error(Errc::kConfigError, "sketch mask is empty-sized");
  if (camera_.width != mask_.width || camera_.height != mask_.height)
    camera_ = camera_.with_resolution(mask_.width, mask_.height);
  camera_.validate();
  cam_from_world_ = camera_.pose.rigid_inverse();
  norm_ = std::max(mask_.width, mask_.height);
  diag_ = std::hypot(mask_.width, mask_.height) / norm_;
  dist_ = euclidean_distance_transform(mask_);
  for (auto& d : dist_) d = std::isfinite(d) ? d / norm_ : 2.0 * diag_;
}

double per_view_distance(const Vec3& p, const SketchView& view, int power) {
  const Vec3 q = view.camera_from_world().transform_point(p);
  const double behind = 2.0 * view.diagonal();
  double d;
  if (!(q.z > 0.0)) {
    d = behind;
  } else {
    const Camera& cam = view.camera();
    const double f = cam.focal();
    const double u = f * q.x / q.z + 0.5 * cam.width;
    const double v = f * q.y / q.z + 0.5 * cam.height;
    const double lim = 4.0 * (cam.width + cam.height);
    // Clamp before converting so far-off projections stay finite.
    const long px = static_cast<long>(std::floor(std::clamp(u, -lim, lim)));
    const long py = static_cast<long>(std::floor(std::clamp(v, -lim, lim)));
    const long cx = std::clamp<long>(px, 0, cam.width - 1);
    const long cy = std::clamp<long>(py, 0, cam.height - 1);
    d = view.dist(static_cast<int>(cx), static_cast<int>(cy));
    if (cx != px || cy != py) d += std::hypot(double(px - cx), double(py - cy)) / view.normalizer();
  }
  return power == 1 ? d : d * d;
}

double multiview_distance(const Vec3& p, const SketchSet& set, int power) {
  if (set.views.empty()) throw Error(Errc::kEmptySketchSet, "no sketch views");
  double sum = 0.0;
  for (const auto& v : set.views) sum += per_view_distance(p, v, power);
  return sum / static_cast<double>(set.views.size());
}

double preservation_weight(double D, double beta) {
  if (!(beta > 0.0)) throw Error(Errc::kConfigError, "beta must be positive");
  return -std::expm1(-(D * D) / (2.0 * beta * beta));
}

namespace {

struct MaskRect {
  double x0, y0, x1, y1;
  bool empty;
};

MaskRect mask_rect(const Mask& m) {
  int x0 = m.width, y0 = m.height, x1 = -1, y1 = -1;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      if (m.at(x, y)) {
        x0 = std::min(x0, x), x1 = std::max(x1, x);
        y0 = std::min(y0, y), y1 = std::max(y1, y);
      }
  if (x1 < 0) return {0, 0, 0, 0, true};
  return {double(x0), double(y0), double(x1 + 1), double(y1 + 1), false};
}

}  // namespace

Aabb compute_edit_bbox(std::span<const SketchView> views, const Aabb& field_bbox, GridRes cells) {
  if (views.empty()) throw Error(Errc::kEmptySketchSet, "no sketch views");
  std::vector<MaskRect> rects;
  for (const auto& v : views) {
    rects.push_back(mask_rect(v.mask()));
    if (rects.back().empty) throw Error(Errc::kEmptyIntersection, "a sketch mask is empty");
  }
  const OccupancyGrid grid(cells);
  Aabb out{{INFINITY, INFINITY, INFINITY}, {-INFINITY, -INFINITY, -INFINITY}};
  bool any = false;
  for (int k = 0; k < cells.z; ++k)
    for (int j = 0; j < cells.y; ++j)
      for (int i = 0; i < cells.x; ++i) {
        const Aabb cell = grid.cell_bounds(field_bbox, i, j, k);
        const Vec3 c = cell.center();
        bool inside = true;
        for (size_t n = 0; n < views.size() && inside; ++n) {
          const Camera& cam = views[n].camera();
          const Vec3 q = views[n].camera_from_world().transform_point(c);
          if (!(q.z >= cam.near && q.z <= cam.far)) {
            inside = false;
            break;
          }
          const double f = cam.focal();
          const double u = f * q.x / q.z + 0.5 * cam.width;
          const double v = f * q.y / q.z + 0.5 * cam.height;
          inside = u >= rects[n].x0 && u <= rects[n].x1 && v >= rects[n].y0 && v <= rects[n].y1;
        }
        if (inside) {
          any = true;
          out.min = vmin(out.min, cell.min);
          out.max = vmax(out.max, cell.max);
        }
      }
  if (!any) throw Error(Errc::kEmptyIntersection, "sketch frusta do not intersect inside the field");
  return intersect(out, field_bbox);
}

void bind_edit_bbox(SketchSet& set, const RadianceField& field) {
  set.edit_bbox = compute_edit_bbox(set.views, field.bbox, field.occupancy.res());
}

bool in_visual_hull(const Vec3& p, std::span<const SketchView> views) {
  for (const auto& v : views) {
    const Vec3 q = v.camera_from_world().transform_point(p);
    if (!(q.z > 0.0)) return false;
    const Camera& cam = v.camera();
    const double f = cam.focal();
    const double u = f * q.x / q.z + 0.5 * cam.width;
    const double vv = f * q.y / q.z + 0.5 * cam.height;
    const int px = static_cast<int>(std::floor(u)), py = static_cast<int>(std::floor(vv));
    if (!v.mask().in_bounds(px, py) || !v.mask().at(px, py)) return false;
  }
  return !views.empty();
}

}  // namespace skf
