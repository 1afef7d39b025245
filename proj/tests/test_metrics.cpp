// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include "doctest.h"
#include "skf/metrics.hpp"
#include "support/oracles.hpp"

using namespace skf;

namespace {

// Straightforward windowed SSIM: normalized 11x11 Gaussian (sigma 1.5) at
// every fully-inside window position, averaged over positions and channels.
double naive_ssim(const Image& a, const Image& b) {
  double g[11][11], gs = 0;
  for (int y = 0; y < 11; ++y)
    for (int x = 0; x < 11; ++x) gs += g[y][x] = std::exp(-((x - 5) * (x - 5) + (y - 5) * (y - 5)) / (2 * 1.5 * 1.5));
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0;
  int count = 0;
  for (int c = 0; c < a.channels; ++c)
    for (int y0 = 0; y0 + 11 <= a.height; ++y0)
      for (int x0 = 0; x0 + 11 <= a.width; ++x0) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int y = 0; y < 11; ++y)
          for (int x = 0; x < 11; ++x) {
            const double w = g[y][x] / gs, va = a.at(x0 + x, y0 + y, c), vb = b.at(x0 + x, y0 + y, c);
            ma += w * va, mb += w * vb, saa += w * va * va, sbb += w * vb * vb, sab += w * va * vb;
          }
        const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
        total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
  return total / count;
}

Image random_image(std::mt19937_64& rng, int w, int h, int c) {
  Image img(w, h, c);
  std::uniform_real_distribution<float> u(0, 1);
  for (auto& v : img.data) v = u(rng);
  return img;
}

}  // namespace

TEST_CASE("psnr outside the sketch") {
  Image a(8, 8, 3, 0.5f), b(8, 8, 3, 0.5f);
  CHECK(psnr_outside_sketch(a, b) == kPsnrCap);
  for (auto& v : b.data) v = 0.6f;
  CHECK(psnr_outside_sketch(a, b) == doctest::Approx(20.0).epsilon(1e-5));
  Mask m(8, 8);
  Image c = a;
  for (int y = 2; y < 5; ++y)
    for (int x = 1; x < 7; ++x) {
      m.set(x, y, true);
      for (int ch = 0; ch < 3; ++ch) c.at(x, y, ch) = 0.0f;
    }
  CHECK(psnr_outside_sketch(a, c, &m) == kPsnrCap);
  c.at(0, 0, 1) = 0.0f;
  // One value off by 0.5 among (64 - 18) * 3 unmasked values.
  const double mse = 0.25 / ((64 - 18) * 3);
  CHECK(psnr_outside_sketch(a, c, &m) == doctest::Approx(10 * std::log10(1 / mse)).epsilon(1e-5));
}

TEST_CASE("intersection over sketch staircase") {
  const auto taus = ios_thresholds();
  REQUIRE(taus.size() == 9);
  CHECK(taus.front() == doctest::Approx(25.0 / 255));
  CHECK(taus.back() == doctest::Approx(225.0 / 255));

  Mask mask(10, 10);
  Image alpha(10, 10, 1, 1.0f);
  for (int y = 3; y < 7; ++y)
    for (int x = 3; x < 7; ++x) {
      mask.set(x, y, true);
      alpha.at(x, y) = 100.0f / 255.0f;
    }
  CHECK(ios_view(mask, alpha) == 3.0 / 9.0);
}

TEST_CASE("intersection over sketch is monotone in the threshold") {
  std::mt19937_64 rng(1);
  std::bernoulli_distribution b(0.4);
  for (int r = 0; r < 50; ++r) {
    std::vector<Mask> masks;
    std::vector<Image> alphas;
    for (int v = 0; v < 3; ++v) {
      Mask m(12, 9);
      for (auto& x : m.data) x = b(rng);
      masks.push_back(m);
      alphas.push_back(random_image(rng, 12, 9, 1));
    }
    double prev = 2.0;
    for (double tau = 0.0; tau < 1.0; tau += 0.01) {
      const auto v = ios_at(masks, alphas, tau);
      REQUIRE(v.has_value());
      CHECK(*v <= prev);
      CHECK(*v >= 0.0);
      prev = *v;
    }
    const double s = ios(masks, alphas);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("intersection over sketch with empty masks") {
  std::vector<Mask> masks{Mask(4, 4)};
  std::vector<Image> alphas{Image(4, 4, 1, 1.0f)};
  CHECK_FALSE(ios_at(masks, alphas, 0.5).has_value());
  CHECK(ios(masks, alphas) == 0.0);
}

TEST_CASE("ssim matches a naive windowed implementation") {
  std::mt19937_64 rng(2);
  for (int r = 0; r < 5; ++r) {
    const Image a = random_image(rng, 20 + r, 16, 3);
    Image b = a;
    std::normal_distribution<float> nd(0, 0.1f * r);
    for (auto& v : b.data) v = std::clamp(v + nd(rng), 0.0f, 1.0f);
    const double s = ssim(a, b);
    CHECK(s == doctest::Approx(naive_ssim(a, b)).epsilon(1e-9));
    CHECK(s <= 1.0);
    CHECK(s >= -1.0);
  }
  const Image a = random_image(rng, 16, 16, 3);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("evaluate reports per-view metrics") {
  const RadianceField base = synth_scene(SceneKind::kSphere, {24, 24, 24}, {{-1, -1, -1}, {1, 1, 1}});
  SketchSet set;
  for (double az : {0.0, 90.0}) {
    const Camera cam = orbit_camera(az, 0, 3, {0, 0, 0}, 32, 32);
    Mask m(32, 32);
    for (int y = 12; y < 20; ++y)
      for (int x = 12; x < 20; ++x) m.set(x, y, true);
    set.views.emplace_back(cam, m);
  }
  set.views.emplace_back(orbit_camera(45, 0, 3, {0, 0, 0}, 32, 32), Mask(32, 32));
  const EvalReport rep = evaluate(base, base, set);
  REQUIRE(rep.views.size() == 3);
  CHECK(rep.views[0].psnr == kPsnrCap);
  CHECK(rep.views[0].ios == doctest::Approx(1.0));
  CHECK(rep.views[0].ssim == doctest::Approx(1.0));
  CHECK(rep.views[2].mask_empty);
  CHECK_FALSE(rep.warnings.empty());
  const auto j = rep.to_json();
  CHECK(j.contains("views"));
  CHECK(j["views"].size() == 3);
  CHECK(j.contains("psnr"));
  CHECK(j["views"][2]["ios"].is_null());
  CHECK(rep.base_hash == field_hash(base));
  CHECK(rep.table().find("psnr") != std::string::npos);
}
