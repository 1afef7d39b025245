// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#include "skf/losses.hpp"

#include <omp.h>

#include <cmath>

#include "skf/error.hpp"

namespace skf {

namespace {

void check_grad_shape(const Image* grad, int w, int h) {
  if (grad && (grad->width != w || grad->height != h || grad->channels != 4))
    throw Error(Errc::kShapeMismatch, "loss gradient image must be WxHx4 matching the render");
}

}  // namespace

double photometric_loss(const Image& rgb, const Image& target, Image* grad, double scale) {
  if (rgb.width != target.width || rgb.height != target.height || rgb.channels != 3 || target.channels != 3)
    throw Error(Errc::kShapeMismatch, "photometric loss needs equal-size rgb images");
  check_grad_shape(grad, rgb.width, rgb.height);
  const double inv_n = 1.0 / static_cast<double>(rgb.data.size());
  double sum = 0.0;
  for (size_t p = 0; p < rgb.pixel_count(); ++p)
    for (int c = 0; c < 3; ++c) {
      const double d = static_cast<double>(rgb.data[3 * p + c]) - target.data[3 * p + c];
      sum += d * d;
      if (grad) grad->data[4 * p + c] += static_cast<float>(scale * 2.0 * d * inv_n);
    }
  return sum * inv_n;
}

double silhouette_loss(const Image& alpha, const Mask& mask, double norm, Image* grad, double scale) {
  if (alpha.width != mask.width || alpha.height != mask.height || alpha.channels != 1)
    throw Error(Errc::kShapeMismatch, "silhouette loss needs alpha at mask resolution");
  check_grad_shape(grad, alpha.width, alpha.height);
  double sum = 0.0;
  for (size_t p = 0; p < alpha.pixel_count(); ++p) {
    if (!mask.data[p]) continue;
    const double a = alpha.data[p];
    sum -= std::log(std::clamp(a, kAlphaClamp, 1.0));
    if (grad && a > kAlphaClamp && a < 1.0) grad->data[4 * p + 3] += static_cast<float>(-scale * norm / a);
  }
  return sum * norm;
}

double sparsity_loss(const Image& alpha, Image* grad, double scale) {
  if (alpha.channels != 1) throw Error(Errc::kShapeMismatch, "sparsity loss needs a 1-channel alpha");
  check_grad_shape(grad, alpha.width, alpha.height);
  const double inv_n = 1.0 / static_cast<double>(alpha.pixel_count());
  double sum = 0.0;
  for (size_t p = 0; p < alpha.pixel_count(); ++p) {
    const double raw = alpha.data[p];
    const double a = std::clamp(raw, kAlphaClamp, 1.0 - kAlphaClamp);
    sum -= a * std::log(a) + (1 - a) * std::log(1 - a);
    if (grad && raw > kAlphaClamp && raw < 1.0 - kAlphaClamp)
      grad->data[4 * p + 3] += static_cast<float>(scale * inv_n * std::log((1 - a) / a));
  }
  return sum * inv_n;
}

double preservation_loss(const RadianceField& edited, const RadianceField& base,
                         std::span<const SampleRecord> samples, std::span<const double> weights,
                         const PreservationSettings& s, FieldGradient* grad, double scale) {
  if (samples.size() != weights.size()) throw Error(Errc::kShapeMismatch, "one weight per sample required");
  if (!(edited.res == base.res) || !(edited.bbox == base.bbox))
    throw Error(Errc::kShapeMismatch, "edited and base fields must share grid and bbox");
  if (!(s.step > 0)) throw Error(Errc::kConfigError, "preservation loss needs a positive step");
  if (samples.empty()) return 0.0;
  const double inv_k = 1.0 / static_cast<double>(samples.size());
  const double lo = kAlphaClamp, hi = 1.0 - kAlphaClamp;

  const int workers = grad ? omp_get_max_threads() : 1;
  std::vector<FieldGradient> partial(workers > 1 ? workers - 1 : 0);
  std::vector<double> sums(workers, 0.0);
  const long n = static_cast<long>(samples.size());

#pragma omp parallel num_threads(workers)
  {
    const int tid = omp_get_thread_num();
    FieldGradient* out = nullptr;
    if (grad) {
      if (tid == 0) {
        out = grad;
      } else {
        partial[tid - 1] = FieldGradient(edited.voxel_count());
        out = &partial[tid - 1];
      }
    }
    double local = 0.0;
#pragma omp for schedule(static)
    for (long i = 0; i < n; ++i) {
      const double w = weights[i];
      if (w == 0.0) continue;
      TrilinearStencil st;
      if (!edited.stencil(samples[i].position, st)) continue;
      const double pe = edited.density_param_at(st), po = base.density_param_at(st);
      const double ae = -std::expm1(-softplus(pe) * s.step);
      const double ao = -std::expm1(-softplus(po) * s.step);
      const double y = ao > s.occupancy_threshold ? 1.0 : 0.0;
      const double a = std::clamp(ae, lo, hi);
      double term = -(y * std::log(a) + (1 - y) * std::log(1 - a));
      Vec3 ce, co, dc;
      if (y > 0) {
        const Vec3 qe = edited.color_param_at(st), qo = base.color_param_at(st);
        ce = {sigmoid(qe.x), sigmoid(qe.y), sigmoid(qe.z)};
        co = {sigmoid(qo.x), sigmoid(qo.y), sigmoid(qo.z)};
        dc = ce - co;
        term += s.lambda_c * dot(dc, dc);
      }
      local += w * term;
      if (!out) continue;
      if (ae > lo && ae < hi) {
        const double dbce = -y / a + (1 - y) / (1 - a);
        const double dsigma = dbce * s.step * (1 - ae);
        scatter_density_grad(edited, st, scale * inv_k * w * dsigma, *out);
      }
      if (y > 0) scatter_color_grad(edited, st, dc * (scale * inv_k * w * 2.0 * s.lambda_c), *out);
    }
    sums[tid] = local;
  }
  if (grad)
    for (auto& p : partial)
      if (!p.density.empty()) grad->add(p);
  double total = 0.0;
  for (double v : sums) total += v;
  return total * inv_k;
}

}  // namespace skf
