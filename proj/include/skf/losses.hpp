// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "skf/field.hpp"
#include "skf/image.hpp"
#include "skf/render.hpp"

namespace skf {

inline constexpr double kAlphaClamp = 1e-5;

// Pixel-space losses write d(loss)/d(output) into a 4-channel gradient image
// (r, g, b, alpha) scaled by `scale`, accumulating into what is already there.

// Mean squared error over all rgb values.
double photometric_loss(const Image& rgb, const Image& target, Image* grad = nullptr, double scale = 1.0);

// sum_px -mask * log(clamp(alpha, 1e-5, 1)) * norm. Below the clamp the
// gradient is zero.
double silhouette_loss(const Image& alpha, const Mask& mask, double norm, Image* grad = nullptr,
                       double scale = 1.0);

// Mean binary entropy of clamp(alpha, 1e-5, 1 - 1e-5).
double sparsity_loss(const Image& alpha, Image* grad = nullptr, double scale = 1.0);

struct PreservationSettings {
  double step = 0.0;  // marching step used for alpha = 1 - exp(-sigma * step)
  double lambda_c = 5.0;
  double occupancy_threshold = 0.5;  // on base alpha
};

// (1/K) sum_i w_i [BCE(alpha_e, abar_o) + lambda_c * abar_o * |c_e - c_o|^2]
// over the sample positions. Gradient w.r.t. `edited` is added to `grad`
// times `scale`. Samples outside the field contribute nothing.
double preservation_loss(const RadianceField& edited, const RadianceField& base,
                         std::span<const SampleRecord> samples, std::span<const double> weights,
                         const PreservationSettings& settings, FieldGradient* grad = nullptr, double scale = 1.0);

}  // namespace skf
