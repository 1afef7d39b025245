// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <deque>

#include "skf/error.hpp"
#include "skf/sketch.hpp"

namespace skf {

namespace {

constexpr double kStrokeRadius = 1.0;  // 2 px wide

void paint_segment(Mask& m, double ax, double ay, double bx, double by) {
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(ax, bx) - kStrokeRadius - 1)));
  const int x1 = std::min(m.width - 1, static_cast<int>(std::ceil(std::max(ax, bx) + kStrokeRadius + 1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(ay, by) - kStrokeRadius - 1)));
  const int y1 = std::min(m.height - 1, static_cast<int>(std::ceil(std::max(ay, by) + kStrokeRadius + 1)));
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      double t = len2 > 0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double ex = ax + t * dx - px, ey = ay + t * dy - py;
      if (ex * ex + ey * ey <= kStrokeRadius * kStrokeRadius) m.set(x, y, true);
    }
}

// Pixels not set and not 4-connected to the border through unset pixels.
Mask enclosed(const Mask& stroke) {
  const int w = stroke.width, h = stroke.height;
  Mask outside(w, h);
  std::deque<std::pair<int, int>> q;
  auto seed = [&](int x, int y) {
    if (!stroke.at(x, y) && !outside.at(x, y)) {
      outside.set(x, y, true);
      q.emplace_back(x, y);
    }
  };
  for (int x = 0; x < w; ++x) seed(x, 0), seed(x, h - 1);
  for (int y = 0; y < h; ++y) seed(0, y), seed(w - 1, y);
  while (!q.empty()) {
    const auto [x, y] = q.front();
    q.pop_front();
    if (x > 0) seed(x - 1, y);
    if (x + 1 < w) seed(x + 1, y);
    if (y > 0) seed(x, y - 1);
    if (y + 1 < h) seed(x, y + 1);
  }
  Mask inside(w, h);
  for (size_t i = 0; i < inside.data.size(); ++i) inside.data[i] = (!stroke.data[i] && !outside.data[i]) ? 1 : 0;
  return inside;
}

Mask dilate(const Mask& m, int r) {
  Mask out(m.width, m.height);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(x, y)) continue;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          if (dx * dx + dy * dy <= r * r && out.in_bounds(x + dx, y + dy)) out.set(x + dx, y + dy, true);
    }
  return out;
}

bool survives_erosion(const Mask& m) {
  for (int y = 1; y + 1 < m.height; ++y)
    for (int x = 1; x + 1 < m.width; ++x) {
      bool all = true;
      for (int dy = -1; dy <= 1 && all; ++dy)
        for (int dx = -1; dx <= 1 && all; ++dx) all = m.at(x + dx, y + dy);
      if (all) return true;
    }
  return false;
}

// With `centerline` the stroke only contributes its inner half, so a closed
// polyline fills up to its drawn path rather than its outer edge.
FillResult finish(const Mask& stroke, bool centerline) {
  const Mask inner = enclosed(stroke);
  if (inner.count() == 0) return {dilate(stroke, 2), true};
  Mask out = stroke;
  if (centerline) {
    const Mask grown = dilate(inner, static_cast<int>(kStrokeRadius));
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] &= grown.data[i];
  }
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] |= inner.data[i];
  return {out, false};
}

}  // namespace

FillResult fill_scribble(std::span<const Polyline> strokes, int width, int height) {
  if (width <= 0 || height <= 0) throw Error(Errc::kConfigError, "canvas size must be positive");
  bool any = false;
  for (const auto& s : strokes) any = any || !s.empty();
  if (!any) throw Error(Errc::kConfigError, "no strokes given");
  Mask m(width, height);
  for (const auto& s : strokes) {
    if (s.size() == 1) paint_segment(m, s[0][0], s[0][1], s[0][0], s[0][1]);
    for (size_t i = 1; i < s.size(); ++i) paint_segment(m, s[i - 1][0], s[i - 1][1], s[i][0], s[i][1]);
    if (s.size() >= 3) {
      double x0 = s[0][0], x1 = x0, y0 = s[0][1], y1 = y0;
      for (const auto& p : s) {
        x0 = std::min(x0, p[0]), x1 = std::max(x1, p[0]);
        y0 = std::min(y0, p[1]), y1 = std::max(y1, p[1]);
      }
      const double gap = std::hypot(s.back()[0] - s.front()[0], s.back()[1] - s.front()[1]);
      if (gap <= std::max(3.0, 0.2 * std::hypot(x1 - x0, y1 - y0)))
        paint_segment(m, s.back()[0], s.back()[1], s.front()[0], s.front()[1]);
    }
  }
  return finish(m, true);
}

FillResult fill_scribble(const Mask& bitmap) {
  if (bitmap.count() == 0) throw Error(Errc::kConfigError, "empty scribble bitmap");
  const Mask inner = enclosed(bitmap);
  if (inner.count() == 0 && survives_erosion(bitmap)) return {bitmap, false};
  return finish(bitmap, false);
}

}  // namespace skf
