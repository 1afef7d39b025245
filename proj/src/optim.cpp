// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#include "skf/optim.hpp"

#include <cmath>

#include "skf/error.hpp"

namespace skf {

double decayed_lr(double lr, double final_factor, int iteration, int total) {
  if (total <= 0) return lr;
  return lr * std::pow(final_factor, static_cast<double>(iteration) / total);
}

Adam::Adam(size_t voxels, AdamSettings s)
    : s_(s), m_density_(voxels, 0.0), v_density_(voxels, 0.0), m_color_(3 * voxels, 0.0),
      v_color_(3 * voxels, 0.0) {}

namespace {

struct Coeffs {
  double b1, b2, eps, step_size, bc2;
};

inline void update(float& p, double& m, double& v, double g, const Coeffs& c) {
  if (g == 0.0 && m == 0.0) return;
  m = c.b1 * m + (1 - c.b1) * g;
  v = c.b2 * v + (1 - c.b2) * g * g;
  p = static_cast<float>(p - c.step_size * m / (std::sqrt(v / c.bc2) + c.eps));
}

Coeffs coeffs(const AdamSettings& s, int t, double lr) {
  const double bc1 = 1 - std::pow(s.beta1, t), bc2 = 1 - std::pow(s.beta2, t);
  return {s.beta1, s.beta2, s.eps, lr / bc1, bc2};
}

void check(const RadianceField& field, const FieldGradient& grad, size_t m) {
  if (grad.density.size() != field.density.size() || grad.color.size() != field.color.size() ||
      m != field.density.size())
    throw Error(Errc::kShapeMismatch, "optimizer state does not match the field");
}

}  // namespace

void Adam::step(RadianceField& field, const FieldGradient& grad, double lr) {
  check(field, grad, m_density_.size());
  const Coeffs c = coeffs(s_, ++t_, lr);
  const long n = static_cast<long>(field.density.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) {
    update(field.density[i], m_density_[i], v_density_[i], grad.density[i], c);
    for (long k = 3 * i; k < 3 * i + 3; ++k) update(field.color[k], m_color_[k], v_color_[k], grad.color[k], c);
  }
}

void Adam::step_reference(RadianceField& field, const FieldGradient& grad, double lr) {
  check(field, grad, m_density_.size());
  const Coeffs c = coeffs(s_, ++t_, lr);
  for (size_t i = 0; i < field.density.size(); ++i)
    update(field.density[i], m_density_[i], v_density_[i], grad.density[i], c);
  for (size_t k = 0; k < field.color.size(); ++k) update(field.color[k], m_color_[k], v_color_[k], grad.color[k], c);
}

}  // namespace skf
