// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "skf/field.hpp"
#include "skf/render.hpp"

namespace skf {

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// lr * final_factor^(iteration / total).
double decayed_lr(double lr, double final_factor, int iteration, int total);

// Adam over the density and color parameters of one field.
class Adam {
 public:
  Adam() = default;
  Adam(size_t voxels, AdamSettings s = {});

  // One bias-corrected update; parameters with a zero gradient and zero
  // first moment are left untouched.
  void step(RadianceField& field, const FieldGradient& grad, double lr);
  // Serial reference with the same arithmetic.
  void step_reference(RadianceField& field, const FieldGradient& grad, double lr);
  int steps() const { return t_; }

 private:
  AdamSettings s_;
  int t_ = 0;
  std::vector<double> m_density_, v_density_, m_color_, v_color_;
};

}  // namespace skf
