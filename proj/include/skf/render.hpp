// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "skf/camera.hpp"
#include "skf/field.hpp"
#include "skf/image.hpp"

namespace skf {

inline constexpr double kTransmittanceCutoff = 1e-4;
inline constexpr double kDepthEpsilon = 1e-6;

struct RenderSettings {
  double step = 0.0;  // <= 0 selects default_step(field)
  Vec3 background{1, 1, 1};
  bool use_occupancy = true;
  // Sample k sits at t = near + (k + offset) * step. A training loop may
  // jitter this per iteration; 0.5 gives the deterministic midpoint lattice.
  double offset = 0.5;
};

// bbox diagonal / (2 * max resolution).
double default_step(const RadianceField& field);

struct CompositeSample {
  Vec3 rgb;
  double alpha = 0.0;
  double depth = 0.0;
  double weight_sum = 0.0;  // sum of T_i * alpha_i (== alpha)
  int samples = 0;          // samples that were composited
};

// Per-sample positions recorded while marching (for losses evaluated on
// the training view's ray samples).
struct SampleRecord {
  Vec3 position;
  uint32_t pixel = 0;
};

struct RaySample {
  double t = 0.0;
  double sigma = 0.0;  // activated density
  Vec3 color;
};

// Compositing of an explicit sample list with the same equations and
// early-termination rule as march().
CompositeSample composite(std::span<const RaySample> samples, double step, const Vec3& background);

CompositeSample march(const RadianceField& field, const Ray& ray, double near, double far,
                      const RenderSettings& settings, std::vector<SampleRecord>* record = nullptr,
                      uint32_t pixel = 0);

struct RenderOutput {
  Image rgb;    // 3 channels, background composited
  Image alpha;  // 1 channel
  Image depth;  // 1 channel, expected termination distance
  Vec3 background;
};

// Pixel-parallel renderer.
RenderOutput render_view(const RadianceField& field, const Camera& cam, const RenderSettings& settings = {},
                         std::vector<SampleRecord>* samples = nullptr);
// Single-threaded reference with identical per-pixel arithmetic.
RenderOutput render_view_reference(const RadianceField& field, const Camera& cam,
                                   const RenderSettings& settings = {},
                                   std::vector<SampleRecord>* samples = nullptr);

struct FieldGradient {
  std::vector<double> density;  // same layout as RadianceField::density
  std::vector<double> color;    // same layout as RadianceField::color

  FieldGradient() = default;
  explicit FieldGradient(size_t voxels) : density(voxels, 0.0), color(3 * voxels, 0.0) {}
  void zero();
  void add(const FieldGradient& o, double scale = 1.0);
  bool all_finite() const;
  double max_abs() const;
};

// Accumulates into `out` the reverse-mode gradient of
//   sum_px  g_rgb(px) . rgb(px) + g_alpha(px) * alpha(px)
// with respect to the density and color parameters. `pixel_grad` has 4
// channels (r, g, b, alpha). Throws Errc::kNonFiniteGradient on non-finite
// input.
void render_backward(const RadianceField& field, const Camera& cam, const RenderSettings& settings,
                     const Image& pixel_grad, FieldGradient& out);
void render_backward_reference(const RadianceField& field, const Camera& cam, const RenderSettings& settings,
                               const Image& pixel_grad, FieldGradient& out);

// Scatter helpers shared with per-sample losses.
void scatter_density_grad(const RadianceField& field, const TrilinearStencil& st, double dL_dsigma,
                          FieldGradient& out);
void scatter_color_grad(const RadianceField& field, const TrilinearStencil& st, const Vec3& dL_dc,
                        FieldGradient& out);

}  // namespace skf
