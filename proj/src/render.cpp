// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#include "skf/render.hpp"

#include <cassert>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "skf/error.hpp"

namespace skf {

double default_step(const RadianceField& field) {
  const int m = std::max(field.res.x, std::max(field.res.y, field.res.z));
  return field.bbox.diagonal() / (2.0 * m);
}

void FieldGradient::zero() {
  std::fill(density.begin(), density.end(), 0.0);
  std::fill(color.begin(), color.end(), 0.0);
}

void FieldGradient::add(const FieldGradient& o, double scale) {
  for (size_t i = 0; i < density.size(); ++i) density[i] += scale * o.density[i];
  for (size_t i = 0; i < color.size(); ++i) color[i] += scale * o.color[i];
}

bool FieldGradient::all_finite() const {
  for (double v : density)
    if (!std::isfinite(v)) return false;
  for (double v : color)
    if (!std::isfinite(v)) return false;
  return true;
}

double FieldGradient::max_abs() const {
  double m = 0.0;
  for (double v : density) m = std::max(m, std::abs(v));
  for (double v : color) m = std::max(m, std::abs(v));
  return m;
}

void scatter_density_grad(const RadianceField& field, const TrilinearStencil& st, double dL_dsigma,
                          FieldGradient& out) {
  const double g = dL_dsigma * sigmoid(field.density_param_at(st));
  for (int c = 0; c < 8; ++c) out.density[st.index[c]] += g * st.weight[c];
}

void scatter_color_grad(const RadianceField& field, const TrilinearStencil& st, const Vec3& dL_dc,
                        FieldGradient& out) {
  const Vec3 q = field.color_param_at(st);
  const Vec3 c{sigmoid(q.x), sigmoid(q.y), sigmoid(q.z)};
  const Vec3 g{dL_dc.x * c.x * (1 - c.x), dL_dc.y * c.y * (1 - c.y), dL_dc.z * c.z * (1 - c.z)};
  for (int k = 0; k < 8; ++k) {
    double* o = &out.color[3 * static_cast<size_t>(st.index[k])];
    o[0] += g.x * st.weight[k];
    o[1] += g.y * st.weight[k];
    o[2] += g.z * st.weight[k];
  }
}

namespace {

// Per-render constants for the sample loop.
struct MarchSetup {
  const RadianceField* field;
  Aabb region;
  bool region_empty;
  double step;
  double offset;
  bool use_occupancy;
  Vec3 cell_scale;  // occupancy cells per world unit
  Vec3 cell_size;
};

MarchSetup make_setup(const RadianceField& field, const RenderSettings& s) {
  MarchSetup m;
  m.field = &field;
  m.step = s.step > 0.0 ? s.step : default_step(field);
  m.offset = s.offset;
  m.use_occupancy = s.use_occupancy;
  m.region = field.bbox;
  if (s.use_occupancy) m.region = intersect(field.bbox, field.occupancy.occupied_bounds(field.bbox));
  m.region_empty = m.region.empty();
  const GridRes& o = field.occupancy.res();
  const Vec3 ext = field.bbox.extent();
  m.cell_scale = {o.x / ext.x, o.y / ext.y, o.z / ext.z};
  m.cell_size = {ext.x / o.x, ext.y / o.y, ext.z / o.z};
  return m;
}

struct SampleState {
  double t;
  Vec3 p;
  TrilinearStencil st;
};

// Calls visit(SampleState&) for every sample in an occupied cell along the
// ray, in order, until visit returns false. Samples in empty cells are
// skipped by jumping to the cell exit and re-aligning to the sample lattice,
// so the visited set equals a full march that tests every sample.
template <typename Visit>
void for_each_sample(const MarchSetup& m, const Ray& ray, double near, double far, Visit&& visit) {
  if (m.region_empty) return;
  double t0, t1;
  if (!ray_box(ray.origin, ray.dir, m.region, t0, t1)) return;
  t0 = std::max(t0, near);
  t1 = std::min(t1, far);
  if (t0 > t1) return;
  const RadianceField& f = *m.field;
  const GridRes& ores = f.occupancy.res();
  long k = static_cast<long>(std::ceil((t0 - near) / m.step - m.offset));
  SampleState s;
  for (;;) {
    s.t = near + (static_cast<double>(k) + m.offset) * m.step;
    if (s.t > t1) break;
    s.p = vmin(vmax(ray.origin + ray.dir * s.t, f.bbox.min), f.bbox.max);
    if (m.use_occupancy) {
      int c[3];
      for (int a = 0; a < 3; ++a)
        c[a] = std::clamp(static_cast<int>(std::floor((s.p[a] - f.bbox.min[a]) * m.cell_scale[a])), 0,
                          ores.axis(a) - 1);
      if (!f.occupancy.get(f.occupancy.index(c[0], c[1], c[2]))) {
        double t_exit = INFINITY;
        for (int a = 0; a < 3; ++a) {
          const double d = ray.dir[a];
          if (d > 0)
            t_exit = std::min(t_exit, (f.bbox.min[a] + (c[a] + 1) * m.cell_size[a] - ray.origin[a]) / d);
          else if (d < 0)
            t_exit = std::min(t_exit, (f.bbox.min[a] + c[a] * m.cell_size[a] - ray.origin[a]) / d);
        }
        const long next = static_cast<long>(std::ceil((t_exit - near) / m.step - m.offset));
        k = std::max(k + 1, next);
        continue;
      }
    }
    f.stencil(s.p, s.st);
    if (!visit(s)) break;
    ++k;
  }
}

CompositeSample march_impl(const MarchSetup& m, const Ray& ray, double near, double far, const Vec3& bg,
                           std::vector<SampleRecord>* record, uint32_t pixel) {
  const RadianceField& f = *m.field;
  CompositeSample out;
  double T = 1.0;
  for_each_sample(m, ray, near, far, [&](const SampleState& s) {
    const double sigma = softplus(f.density_param_at(s.st));
    const double alpha = 1.0 - std::exp(-sigma * m.step);
    const double w = T * alpha;
    if (w > 0.0) {
      const Vec3 q = f.color_param_at(s.st);
      out.rgb += Vec3{sigmoid(q.x), sigmoid(q.y), sigmoid(q.z)} * w;
      out.depth += w * s.t;
      out.weight_sum += w;
    }
    ++out.samples;
    if (record) record->push_back({s.p, pixel});
    T *= 1.0 - alpha;
    return T >= kTransmittanceCutoff;
  });
  assert(out.weight_sum >= 0.0 && out.weight_sum <= 1.0 + 1e-9);
  out.alpha = out.weight_sum;
  out.rgb += bg * (1.0 - out.alpha);
  out.depth /= std::max(out.alpha, kDepthEpsilon);
  return out;
}

RenderOutput alloc_output(const Camera& cam, const Vec3& bg) {
  RenderOutput o;
  o.rgb = Image(cam.width, cam.height, 3);
  o.alpha = Image(cam.width, cam.height, 1);
  o.depth = Image(cam.width, cam.height, 1);
  o.background = bg;
  return o;
}

void shade_pixel(const MarchSetup& m, const Camera& cam, const RenderSettings& s, int x, int y, RenderOutput& o,
                 std::vector<SampleRecord>* rec) {
  const Ray r = camera_ray(cam, x + 0.5, y + 0.5);
  const uint32_t pixel = static_cast<uint32_t>(y * cam.width + x);
  const CompositeSample c = march_impl(m, r, cam.near, cam.far, s.background, rec, pixel);
  o.rgb.at(x, y, 0) = static_cast<float>(c.rgb.x);
  o.rgb.at(x, y, 1) = static_cast<float>(c.rgb.y);
  o.rgb.at(x, y, 2) = static_cast<float>(c.rgb.z);
  o.alpha.at(x, y) = static_cast<float>(c.alpha);
  o.depth.at(x, y) = static_cast<float>(c.depth);
}

// Scratch for one ray of the backward pass.
struct BackSample {
  TrilinearStencil st;
  double dparam;
  double alpha;
  double T;
  Vec3 c;
};

void backward_ray(const MarchSetup& m, const Ray& ray, double near, double far, const Vec3& bg, const Vec3& g_rgb,
                  double g_alpha, std::vector<BackSample>& scratch, FieldGradient& out) {
  const RadianceField& f = *m.field;
  scratch.clear();
  double T = 1.0;
  for_each_sample(m, ray, near, far, [&](const SampleState& s) {
    BackSample b;
    b.st = s.st;
    b.dparam = f.density_param_at(s.st);
    b.alpha = 1.0 - std::exp(-softplus(b.dparam) * m.step);
    b.T = T;
    const Vec3 q = f.color_param_at(s.st);
    b.c = {sigmoid(q.x), sigmoid(q.y), sigmoid(q.z)};
    scratch.push_back(b);
    T *= 1.0 - b.alpha;
    return T >= kTransmittanceCutoff;
  });
  Vec3 behind = bg;        // color composited behind sample i, incl. background
  double behind_a = 0.0;   // alpha composited behind sample i
  for (size_t n = scratch.size(); n-- > 0;) {
    const BackSample& b = scratch[n];
    const double w = b.T * b.alpha;
    const double dL_dalpha = b.T * (dot(g_rgb, b.c - behind) + g_alpha * (1.0 - behind_a));
    const double dL_dsigma = dL_dalpha * m.step * (1.0 - b.alpha);
    const double gd = dL_dsigma * sigmoid(b.dparam);
    const Vec3 gc{g_rgb.x * w * b.c.x * (1 - b.c.x), g_rgb.y * w * b.c.y * (1 - b.c.y),
                  g_rgb.z * w * b.c.z * (1 - b.c.z)};
    for (int k = 0; k < 8; ++k) {
      const size_t idx = b.st.index[k];
      const double wk = b.st.weight[k];
      out.density[idx] += gd * wk;
      double* o = &out.color[3 * idx];
      o[0] += gc.x * wk;
      o[1] += gc.y * wk;
      o[2] += gc.z * wk;
    }
    behind = b.c * b.alpha + behind * (1.0 - b.alpha);
    behind_a = b.alpha + (1.0 - b.alpha) * behind_a;
  }
}

void check_pixel_grad(const Camera& cam, const Image& g) {
  if (g.width != cam.width || g.height != cam.height || g.channels != 4)
    throw Error(Errc::kShapeMismatch, "pixel gradient must be HxWx4 matching the camera");
  for (float v : g.data)
    if (!std::isfinite(v)) throw Error(Errc::kNonFiniteGradient, "pixel gradient contains non-finite values");
}

void check_out(const RadianceField& f, FieldGradient& out) {
  if (out.density.size() != f.voxel_count() || out.color.size() != 3 * f.voxel_count())
    out = FieldGradient(f.voxel_count());
}

void backward_pixel(const MarchSetup& m, const Camera& cam, const RenderSettings& s, const Image& g, int x, int y,
                    std::vector<BackSample>& scratch, FieldGradient& out) {
  const Vec3 g_rgb{g.at(x, y, 0), g.at(x, y, 1), g.at(x, y, 2)};
  const double g_a = g.at(x, y, 3);
  if (g_rgb.x == 0 && g_rgb.y == 0 && g_rgb.z == 0 && g_a == 0) return;
  backward_ray(m, camera_ray(cam, x + 0.5, y + 0.5), cam.near, cam.far, s.background, g_rgb, g_a, scratch, out);
}

}  // namespace

CompositeSample composite(std::span<const RaySample> samples, double step, const Vec3& background) {
  CompositeSample out;
  double T = 1.0;
  for (const RaySample& s : samples) {
    const double alpha = 1.0 - std::exp(-s.sigma * step);
    const double w = T * alpha;
    if (w > 0.0) {
      out.rgb += s.color * w;
      out.depth += w * s.t;
      out.weight_sum += w;
    }
    ++out.samples;
    T *= 1.0 - alpha;
    if (T < kTransmittanceCutoff) break;
  }
  out.alpha = out.weight_sum;
  out.rgb += background * (1.0 - out.alpha);
  out.depth /= std::max(out.alpha, kDepthEpsilon);
  return out;
}

CompositeSample march(const RadianceField& field, const Ray& ray, double near, double far,
                      const RenderSettings& settings, std::vector<SampleRecord>* record, uint32_t pixel) {
  const MarchSetup m = make_setup(field, settings);
  if (!(m.step > 0.0)) throw Error(Errc::kConfigError, "step must be positive");
  return march_impl(m, ray, near, far, settings.background, record, pixel);
}

RenderOutput render_view_reference(const RadianceField& field, const Camera& cam, const RenderSettings& settings,
                                   std::vector<SampleRecord>* samples) {
  const MarchSetup m = make_setup(field, settings);
  RenderOutput o = alloc_output(cam, settings.background);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) shade_pixel(m, cam, settings, x, y, o, samples);
  return o;
}

RenderOutput render_view(const RadianceField& field, const Camera& cam, const RenderSettings& settings,
                         std::vector<SampleRecord>* samples) {
  const MarchSetup m = make_setup(field, settings);
  RenderOutput o = alloc_output(cam, settings.background);
  // Rows record samples into their own buffers so the concatenated order is
  // independent of scheduling.
  std::vector<std::vector<SampleRecord>> rows(samples ? cam.height : 0);
#pragma omp parallel for schedule(dynamic, 4)
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) shade_pixel(m, cam, settings, x, y, o, samples ? &rows[y] : nullptr);
  if (samples)
    for (auto& r : rows) samples->insert(samples->end(), r.begin(), r.end());
  return o;
}

void render_backward_reference(const RadianceField& field, const Camera& cam, const RenderSettings& settings,
                               const Image& pixel_grad, FieldGradient& out) {
  check_pixel_grad(cam, pixel_grad);
  check_out(field, out);
  const MarchSetup m = make_setup(field, settings);
  std::vector<BackSample> scratch;
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) backward_pixel(m, cam, settings, pixel_grad, x, y, scratch, out);
}

void render_backward(const RadianceField& field, const Camera& cam, const RenderSettings& settings,
                     const Image& pixel_grad, FieldGradient& out) {
#ifdef _OPENMP
  const int workers = omp_get_max_threads();
#else
  const int workers = 1;
#endif
  if (workers <= 1) {
    render_backward_reference(field, cam, settings, pixel_grad, out);
    return;
  }
  check_pixel_grad(cam, pixel_grad);
  check_out(field, out);
  const MarchSetup m = make_setup(field, settings);
  // Worker 0 writes into `out`; the rest get private buffers merged in
  // worker order afterwards.
  std::vector<FieldGradient> partial(static_cast<size_t>(workers - 1));
#pragma omp parallel num_threads(workers)
  {
#ifdef _OPENMP
    const int tid = omp_get_thread_num();
#else
    const int tid = 0;
#endif
    FieldGradient* dst = &out;
    if (tid > 0) {
      partial[tid - 1] = FieldGradient(field.voxel_count());
      dst = &partial[tid - 1];
    }
    std::vector<BackSample> scratch;
#pragma omp for schedule(static)
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) backward_pixel(m, cam, settings, pixel_grad, x, y, scratch, *dst);
  }
  for (const auto& p : partial)
    if (!p.density.empty()) out.add(p);
}

}  // namespace skf
