// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#include "skf/field.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "skf/error.hpp"

namespace skf {

OccupancyGrid::OccupancyGrid(GridRes res, double prune_threshold)
    : res_(res), prune_threshold_(prune_threshold), words_((res.count() + 63) / 64, 0) {}

void OccupancyGrid::fill(bool on) {
  for (auto& w : words_) w = on ? ~uint64_t{0} : 0;
  // Keep padding bits clear so counts and equality stay exact.
  const size_t tail = res_.count() & 63;
  if (on && tail != 0 && !words_.empty()) words_.back() &= (uint64_t{1} << tail) - 1;
}

size_t OccupancyGrid::count_set() const {
  size_t n = 0;
  for (uint64_t w : words_) n += static_cast<size_t>(std::popcount(w));
  return n;
}

Aabb OccupancyGrid::cell_bounds(const Aabb& bbox, int i, int j, int k) const {
  const Vec3 ext = bbox.extent();
  const Vec3 size{ext.x / res_.x, ext.y / res_.y, ext.z / res_.z};
  const Vec3 lo{bbox.min.x + i * size.x, bbox.min.y + j * size.y, bbox.min.z + k * size.z};
  return {lo, lo + size};
}

Aabb OccupancyGrid::occupied_bounds(const Aabb& bbox) const {
  int lo[3] = {res_.x, res_.y, res_.z};
  int hi[3] = {-1, -1, -1};
  for (size_t w = 0; w < words_.size(); ++w) {
    uint64_t bits = words_[w];
    while (bits) {
      const int b = std::countr_zero(bits);
      bits &= bits - 1;
      const size_t cell = w * 64 + static_cast<size_t>(b);
      const int i = static_cast<int>(cell % res_.x);
      const int j = static_cast<int>((cell / res_.x) % res_.y);
      const int k = static_cast<int>(cell / (static_cast<size_t>(res_.x) * res_.y));
      lo[0] = std::min(lo[0], i), hi[0] = std::max(hi[0], i);
      lo[1] = std::min(lo[1], j), hi[1] = std::max(hi[1], j);
      lo[2] = std::min(lo[2], k), hi[2] = std::max(hi[2], k);
    }
  }
  if (hi[0] < 0) return {{1, 1, 1}, {0, 0, 0}};
  const Aabb a = cell_bounds(bbox, lo[0], lo[1], lo[2]);
  const Aabb b = cell_bounds(bbox, hi[0], hi[1], hi[2]);
  return {a.min, b.max};
}

RadianceField::RadianceField(GridRes r, const Aabb& box, float density_init, float color_init)
    : res(r),
      bbox(box),
      density(r.count(), density_init),
      color(r.count() * 3, color_init),
      occupancy(r) {
  validate();
}

void RadianceField::validate() const {
  if (res.x < 2 || res.y < 2 || res.z < 2)
    throw Error(Errc::kConfigError, "field resolution must be >= 2 per axis");
  if (bbox.empty() || bbox.extent().x <= 0 || bbox.extent().y <= 0 || bbox.extent().z <= 0)
    throw Error(Errc::kConfigError, "field bbox is degenerate");
  if (density.size() != res.count() || color.size() != 3 * res.count())
    throw Error(Errc::kConfigError, "grid sizes do not match resolution");
  const GridRes& o = occupancy.res();
  if (o.x <= 0 || o.y <= 0 || o.z <= 0 || res.x % o.x || res.y % o.y || res.z % o.z)
    throw Error(Errc::kConfigError, "occupancy resolution must divide field resolution");
}

Vec3 RadianceField::spacing() const {
  const Vec3 e = bbox.extent();
  return {e.x / (res.x - 1), e.y / (res.y - 1), e.z / (res.z - 1)};
}

Vec3 RadianceField::lattice_point(int i, int j, int k) const {
  const Vec3 s = spacing();
  return {bbox.min.x + i * s.x, bbox.min.y + j * s.y, bbox.min.z + k * s.z};
}

bool RadianceField::stencil(const Vec3& p, TrilinearStencil& st) const {
  if (!bbox.contains(p)) return false;
  const Vec3 ext = bbox.extent();
  int i0[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    const int n = res.axis(a);
    const double g = (p[a] - bbox.min[a]) / ext[a] * (n - 1);
    int i = static_cast<int>(std::floor(g));
    i = std::clamp(i, 0, n - 2);
    i0[a] = i;
    f[a] = std::clamp(g - i, 0.0, 1.0);
  }
  const size_t sx = 1, sy = static_cast<size_t>(res.x), sz = static_cast<size_t>(res.x) * res.y;
  const size_t base = i0[0] * sx + i0[1] * sy + i0[2] * sz;
  for (int c = 0; c < 8; ++c) {
    const int bx = c & 1, by = (c >> 1) & 1, bz = (c >> 2) & 1;
    st.index[c] = static_cast<uint32_t>(base + bx * sx + by * sy + bz * sz);
    st.weight[c] = (bx ? f[0] : 1.0 - f[0]) * (by ? f[1] : 1.0 - f[1]) * (bz ? f[2] : 1.0 - f[2]);
  }
  return true;
}

size_t RadianceField::occupancy_cell(const Vec3& p) const {
  const GridRes& o = occupancy.res();
  const Vec3 ext = bbox.extent();
  int c[3];
  for (int a = 0; a < 3; ++a) {
    const int n = o.axis(a);
    c[a] = std::clamp(static_cast<int>(std::floor((p[a] - bbox.min[a]) / ext[a] * n)), 0, n - 1);
  }
  return occupancy.index(c[0], c[1], c[2]);
}

double RadianceField::density_param_at(const TrilinearStencil& st) const {
  double v = 0.0;
  for (int c = 0; c < 8; ++c) v += st.weight[c] * density[st.index[c]];
  return v;
}

Vec3 RadianceField::color_param_at(const TrilinearStencil& st) const {
  Vec3 v;
  for (int c = 0; c < 8; ++c) {
    const float* q = &color[3 * static_cast<size_t>(st.index[c])];
    v.x += st.weight[c] * q[0];
    v.y += st.weight[c] * q[1];
    v.z += st.weight[c] * q[2];
  }
  return v;
}

FieldSample RadianceField::eval(const Vec3& p) const {
  TrilinearStencil st;
  if (!stencil(p, st)) return {0.0, {0, 0, 0}};
  const Vec3 q = color_param_at(st);
  return {softplus(density_param_at(st)), {sigmoid(q.x), sigmoid(q.y), sigmoid(q.z)}};
}

std::vector<FieldSample> RadianceField::eval(std::span<const Vec3> points) const {
  std::vector<FieldSample> out(points.size());
  for (size_t i = 0; i < points.size(); ++i) out[i] = eval(points[i]);
  return out;
}

namespace {
template <typename T>
bool same_bits(const std::vector<T>& a, const std::vector<T>& b) {
  return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0);
}
}  // namespace

bool RadianceField::operator==(const RadianceField& o) const {
  return res == o.res && std::memcmp(&bbox, &o.bbox, sizeof bbox) == 0 && same_bits(density, o.density) &&
         same_bits(color, o.color) && occupancy == o.occupancy && metadata == o.metadata;
}

void seed_edit_region(RadianceField& field, const Aabb& box) {
  const Aabb overlap = intersect(box, field.bbox);
  if (overlap.empty()) throw Error(Errc::kNoOverlap, "edit region does not intersect the field bbox");
  const GridRes& o = field.occupancy.res();
  const Vec3 ext = field.bbox.extent();
  int lo[3], hi[3];
  for (int a = 0; a < 3; ++a) {
    const int n = o.axis(a);
    const double cell = ext[a] / n;
    // Cells whose closed extent touches the box.
    lo[a] = std::clamp(static_cast<int>(std::floor((overlap.min[a] - field.bbox.min[a]) / cell)), 0, n - 1);
    hi[a] = std::clamp(static_cast<int>(std::ceil((overlap.max[a] - field.bbox.min[a]) / cell)) - 1, 0, n - 1);
    hi[a] = std::max(hi[a], lo[a]);
  }
  for (int k = lo[2]; k <= hi[2]; ++k)
    for (int j = lo[1]; j <= hi[1]; ++j)
      for (int i = lo[0]; i <= hi[0]; ++i) field.occupancy.set(field.occupancy.index(i, j, k), true);
}

double cell_max_density(const RadianceField& field, int i, int j, int k) {
  const Aabb c = field.occupancy.cell_bounds(field.bbox, i, j, k);
  double best = field.eval(c.center()).density;
  for (const Vec3& p : c.corners()) best = std::max(best, field.eval(p).density);
  return best;
}

void update_occupancy(RadianceField& field) {
  const GridRes o = field.occupancy.res();
  const double thr = field.occupancy.prune_threshold();
  std::vector<uint8_t> on(o.count());
#pragma omp parallel for collapse(2) schedule(static)
  for (int k = 0; k < o.z; ++k)
    for (int j = 0; j < o.y; ++j)
      for (int i = 0; i < o.x; ++i)
        on[field.occupancy.index(i, j, k)] = cell_max_density(field, i, j, k) > thr ? 1 : 0;
  for (size_t c = 0; c < on.size(); ++c) field.occupancy.set(c, on[c] != 0);
}

bool prune(RadianceField& field, int iteration, int warmup_iters, int period) {
  if (iteration < warmup_iters || period <= 0 || iteration % period != 0) return false;
  update_occupancy(field);
  return true;
}

}  // namespace skf
