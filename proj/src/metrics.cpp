// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#include "skf/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "skf/error.hpp"

namespace skf {

double psnr_outside_sketch(const Image& a, const Image& b, const Mask* mask) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels)
    throw Error(Errc::kShapeMismatch, "psnr needs equal-shape images");
  if (mask && (mask->width != a.width || mask->height != a.height))
    throw Error(Errc::kShapeMismatch, "psnr mask size differs from the images");
  double sum = 0.0;
  size_t n = 0;
  for (size_t p = 0; p < a.pixel_count(); ++p) {
    if (mask && mask->data[p]) continue;
    for (int c = 0; c < a.channels; ++c) {
      const double d = static_cast<double>(a.data[p * a.channels + c]) - b.data[p * a.channels + c];
      sum += d * d;
    }
    n += a.channels;
  }
  if (n == 0 || sum == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(static_cast<double>(n) / sum));
}

std::vector<double> ios_thresholds() {
  std::vector<double> t;
  for (int k = 1; k <= 9; ++k) t.push_back(25.0 * k / 255.0);
  return t;
}

std::optional<double> ios_at(std::span<const Mask> masks, std::span<const Image> alphas, double tau) {
  if (masks.size() != alphas.size()) throw Error(Errc::kShapeMismatch, "one alpha per mask required");
  double sum = 0.0;
  int views = 0;
  for (size_t v = 0; v < masks.size(); ++v) {
    const Mask& m = masks[v];
    const Image& a = alphas[v];
    if (a.width != m.width || a.height != m.height || a.channels != 1)
      throw Error(Errc::kShapeMismatch, "alpha must match mask resolution");
    size_t in = 0, hit = 0;
    for (size_t p = 0; p < m.data.size(); ++p)
      if (m.data[p]) {
        ++in;
        const double q = static_cast<double>(std::lround(std::clamp(a.data[p], 0.0f, 1.0f) * 255.0f)) / 255.0;
        if (q > tau) ++hit;
      }
    if (in == 0) continue;
    sum += static_cast<double>(hit) / static_cast<double>(in);
    ++views;
  }
  if (views == 0) return std::nullopt;
  return sum / views;
}

double ios(std::span<const Mask> masks, std::span<const Image> alphas) {
  double sum = 0.0;
  const auto taus = ios_thresholds();
  for (double tau : taus) {
    const auto v = ios_at(masks, alphas, tau);
    if (!v) return 0.0;
    sum += *v;
  }
  return sum / static_cast<double>(taus.size());
}

double ios_view(const Mask& mask, const Image& alpha) { return ios({&mask, 1}, {&alpha, 1}); }

double ssim(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels)
    throw Error(Errc::kShapeMismatch, "ssim needs equal-shape images");
  constexpr int kWin = 11, kHalf = 5;
  constexpr double kSigma = 1.5, C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  if (a.width < kWin || a.height < kWin) throw Error(Errc::kShapeMismatch, "ssim needs images of at least 11x11");
  double g[kWin], gs = 0.0;
  for (int i = 0; i < kWin; ++i) gs += g[i] = std::exp(-0.5 * (i - kHalf) * (i - kHalf) / (kSigma * kSigma));
  for (double& v : g) v /= gs;

  double total = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    double acc = 0.0;
    long count = 0;
    for (int y = kHalf; y + kHalf < a.height; ++y)
      for (int x = kHalf; x + kHalf < a.width; ++x) {
        double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (int dy = -kHalf; dy <= kHalf; ++dy)
          for (int dx = -kHalf; dx <= kHalf; ++dx) {
            const double w = g[dy + kHalf] * g[dx + kHalf];
            const double u = a.at(x + dx, y + dy, c), v = b.at(x + dx, y + dy, c);
            mx += w * u;
            my += w * v;
            sxx += w * u * u;
            syy += w * v * v;
            sxy += w * u * v;
          }
        const double vx = sxx - mx * mx, vy = syy - my * my, cov = sxy - mx * my;
        acc += ((2 * mx * my + C1) * (2 * cov + C2)) / ((mx * mx + my * my + C1) * (vx + vy + C2));
        ++count;
      }
    total += acc / static_cast<double>(count);
  }
  return total / a.channels;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["views"] = nlohmann::json::array();
  for (const auto& v : views) {
    nlohmann::json e = {{"psnr", v.psnr}, {"ssim", v.ssim}};
    e["ios"] = v.mask_empty ? nlohmann::json(nullptr) : nlohmann::json(v.ios);
    j["views"].push_back(e);
  }
  j["psnr"] = mean_psnr;
  j["ios"] = mean_ios;
  j["ssim"] = mean_ssim;
  j["provenance"] = {{"base_hash", base_hash}, {"edited_hash", edited_hash}, {"sketch_hash", sketch_hash}};
  j["warnings"] = warnings;
  return j;
}

std::string EvalReport::table() const {
  std::string out = "view   psnr_dB    ios     ssim\n";
  char line[128];
  for (size_t i = 0; i < views.size(); ++i) {
    if (views[i].mask_empty)
      std::snprintf(line, sizeof line, "%4zu  %8.3f      -   %6.4f\n", i, views[i].psnr, views[i].ssim);
    else
      std::snprintf(line, sizeof line, "%4zu  %8.3f  %6.4f  %6.4f\n", i, views[i].psnr, views[i].ios, views[i].ssim);
    out += line;
  }
  std::snprintf(line, sizeof line, "mean  %8.3f  %6.4f  %6.4f\n", mean_psnr, mean_ios, mean_ssim);
  return out + line;
}

EvalReport evaluate(const RadianceField& base, const RadianceField& edited, const SketchSet& sketches,
                    const RenderSettings& settings) {
  if (sketches.views.empty()) throw Error(Errc::kEmptySketchSet, "evaluation needs sketch views");
  EvalReport r;
  r.base_hash = field_hash(base);
  r.edited_hash = field_hash(edited);
  r.sketch_hash = sketch_hash(sketches);
  int ios_views = 0;
  for (size_t i = 0; i < sketches.views.size(); ++i) {
    const SketchView& v = sketches.views[i];
    const RenderOutput ob = render_view(base, v.camera(), settings);
    const RenderOutput oe = render_view(edited, v.camera(), settings);
    ViewMetrics m;
    m.psnr = psnr_outside_sketch(ob.rgb, oe.rgb, &v.mask());
    m.ssim = ssim(ob.rgb, oe.rgb);
    m.mask_empty = v.mask().count() == 0;
    if (m.mask_empty) {
      r.warnings.push_back("view " + std::to_string(i) + ": empty mask, skipped for IoS");
    } else {
      m.ios = ios_view(v.mask(), oe.alpha);
      r.mean_ios += m.ios;
      ++ios_views;
    }
    r.mean_psnr += m.psnr;
    r.mean_ssim += m.ssim;
    r.views.push_back(m);
  }
  const double n = static_cast<double>(r.views.size());
  r.mean_psnr /= n;
  r.mean_ssim /= n;
  r.mean_ios = ios_views ? r.mean_ios / ios_views : 0.0;
  return r;
}

}  // namespace skf
