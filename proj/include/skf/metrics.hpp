// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "skf/field.hpp"
#include "skf/image.hpp"
#include "skf/render.hpp"
#include "skf/sketch.hpp"

namespace skf {

inline constexpr double kPsnrCap = 60.0;

// PSNR over pixels where mask is false (all pixels when mask is null), for
// images in [0,1], capped at 60 dB.
double psnr_outside_sketch(const Image& a, const Image& b, const Mask* mask = nullptr);

// The nine thresholds 25/255, 50/255, ..., 225/255.
std::vector<double> ios_thresholds();
// Fraction of mask pixels whose alpha, quantized to 8 bits, exceeds tau, averaged over non-empty
// views. Nullopt when every mask is empty.
std::optional<double> ios_at(std::span<const Mask> masks, std::span<const Image> alphas, double tau);
// Mean of ios_at over the nine thresholds; 0 when every mask is empty.
double ios(std::span<const Mask> masks, std::span<const Image> alphas);
double ios_view(const Mask& mask, const Image& alpha);

// Gaussian-window SSIM (11x11, sigma 1.5, K1 0.01, K2 0.03) over the valid
// region, averaged over channels.
double ssim(const Image& a, const Image& b);

struct ViewMetrics {
  double psnr = 0, ios = 0, ssim = 0;
  bool mask_empty = false;
};

struct EvalReport {
  std::vector<ViewMetrics> views;
  double mean_psnr = 0, mean_ios = 0, mean_ssim = 0;
  std::string base_hash, edited_hash, sketch_hash;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
  std::string table() const;
};

// Renders base and edited from every sketch view and scores them.
EvalReport evaluate(const RadianceField& base, const RadianceField& edited, const SketchSet& sketches,
                    const RenderSettings& settings = {});

}  // namespace skf
