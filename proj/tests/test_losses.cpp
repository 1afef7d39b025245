// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include "doctest.h"
#include "skf/losses.hpp"
#include "skf/optim.hpp"
#include "support/errors.hpp"
#include "support/oracles.hpp"

using namespace skf;
using skf::testing::error_of;

namespace {

constexpr int kW = 6, kH = 6;

struct Setup {
  RadianceField field;
  Camera cam;
  Image target{kW, kH, 3};
  Mask mask{kW, kH};
};

Setup make_setup(uint64_t seed) {
  std::mt19937_64 rng(seed);
  Setup s{oracle::random_field(rng, 8), oracle::random_camera(rng, kW, kH)};
  std::uniform_real_distribution<float> u(0, 1);
  for (auto& v : s.target.data) v = u(rng);
  std::bernoulli_distribution b(0.5);
  for (auto& v : s.mask.data) v = b(rng);
  return s;
}

// Checks d(loss)/d(params) from a pixel-gradient image chained through the
// backward pass against central differences of the double-precision value.
void check_pixel_loss(Setup& s, const std::function<void(const RenderOutput&, Image&)>& analytic,
                      const std::function<double(const oracle::DoubleRender&)>& value, uint64_t seed) {
  const RenderSettings rs;
  const RenderOutput out = render_view(s.field, s.cam, rs);
  Image g(kW, kH, 4);
  analytic(out, g);
  FieldGradient grad(s.field.voxel_count());
  render_backward(s.field, s.cam, rs, g, grad);
  std::mt19937_64 rng(seed);
  auto loss = [&](const RadianceField& f) { return value(oracle::render_double(f, s.cam, rs)); };
  for (const auto& p : oracle::probe_params(grad, rng, 24)) {
    const double numeric = oracle::central_difference(s.field, p, loss);
    CHECK_MESSAGE(oracle::close(oracle::grad_of(grad, p), numeric), "param ", p.index, " color ", p.color,
                  " analytic ", oracle::grad_of(grad, p), " numeric ", numeric);
  }
}

}  // namespace

TEST_CASE("photometric loss gradient") {
  for (uint64_t seed = 0; seed < 3; ++seed) {
    Setup s = make_setup(seed);
    check_pixel_loss(
        s, [&](const RenderOutput& o, Image& g) { photometric_loss(o.rgb, s.target, &g); },
        [&](const oracle::DoubleRender& r) { return oracle::photometric_value(r, s.target); }, seed);
  }
}

TEST_CASE("silhouette loss gradient") {
  const double norm = 1.0 / (kW * kH);
  for (uint64_t seed = 10; seed < 13; ++seed) {
    Setup s = make_setup(seed);
    check_pixel_loss(
        s, [&](const RenderOutput& o, Image& g) { silhouette_loss(o.alpha, s.mask, norm, &g); },
        [&](const oracle::DoubleRender& r) { return oracle::silhouette_value(r, s.mask, norm); }, seed);
  }
}

TEST_CASE("sparsity loss gradient") {
  for (uint64_t seed = 20; seed < 23; ++seed) {
    Setup s = make_setup(seed);
    check_pixel_loss(
        s, [&](const RenderOutput& o, Image& g) { sparsity_loss(o.alpha, &g); },
        [&](const oracle::DoubleRender& r) { return oracle::sparsity_value(r); }, seed);
  }
}

TEST_CASE("pixel loss values match their definitions") {
  Setup s = make_setup(30);
  const RenderOutput out = render_view(s.field, s.cam);
  const oracle::DoubleRender r = oracle::render_double(s.field, s.cam, {});
  CHECK(photometric_loss(out.rgb, s.target) == doctest::Approx(oracle::photometric_value(r, s.target)).epsilon(1e-5));
  CHECK(silhouette_loss(out.alpha, s.mask, 0.5) == doctest::Approx(oracle::silhouette_value(r, s.mask, 0.5)).epsilon(1e-5));
  CHECK(sparsity_loss(out.alpha) == doctest::Approx(oracle::sparsity_value(r)).epsilon(1e-5));
}

TEST_CASE("sparsity entropy endpoints") {
  Image half(8, 6, 1), opaque(8, 6, 1);
  for (auto& v : half.data) v = 0.5f;
  for (auto& v : opaque.data) v = 1.0f;
  CHECK(sparsity_loss(half) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  const double e = 1e-5;  // alpha clamp
  CHECK(sparsity_loss(opaque) == doctest::Approx(-(e * std::log(e) + (1 - e) * std::log1p(-e))).epsilon(1e-4));
  CHECK(sparsity_loss(opaque) < 2e-4);
}

TEST_CASE("silhouette loss clamps and ignores unmasked pixels") {
  Image alpha(2, 1, 1);
  alpha.data = {0.0f, 0.5f};
  Mask mask(2, 1);
  mask.data = {1, 0};
  Image g(2, 1, 4);
  CHECK(silhouette_loss(alpha, mask, 1.0, &g) == doctest::Approx(-std::log(1e-5)));
  for (float v : g.data) CHECK(v == 0.0f);
  CHECK(error_of([&] { silhouette_loss(alpha, Mask(3, 1), 1.0); }) == Errc::kShapeMismatch);
}

TEST_CASE("preservation loss gradient and value") {
  for (uint64_t seed = 40; seed < 44; ++seed) {
    std::mt19937_64 rng(seed);
    RadianceField edited = oracle::random_field(rng, 8);
    const RadianceField base = oracle::random_field(rng, 8);
    std::vector<SampleRecord> samples;
    render_view(edited, oracle::random_camera(rng, 5, 5), {}, &samples);
    REQUIRE(samples.size() > 20);
    std::vector<double> w(samples.size());
    std::uniform_real_distribution<double> u(0, 1);
    for (auto& v : w) v = u(rng);
    PreservationSettings ps;
    ps.step = default_step(edited);
    FieldGradient grad(edited.voxel_count());
    const double value = preservation_loss(edited, base, samples, w, ps, &grad);
    auto oracle_value = [&](const RadianceField& f) {
      return oracle::preservation_value(f, base, samples, w, ps.step, ps.lambda_c, ps.occupancy_threshold);
    };
    CHECK(value == doctest::Approx(oracle_value(edited)).epsilon(1e-9));
    for (const auto& p : oracle::probe_params(grad, rng, 30)) {
      const double numeric = oracle::central_difference(edited, p, oracle_value);
      CHECK_MESSAGE(oracle::close(oracle::grad_of(grad, p), numeric), "param ", p.index, " color ", p.color);
    }
  }
}

TEST_CASE("preservation loss special cases") {
  std::mt19937_64 rng(50);
  const RadianceField base = synth_scene(SceneKind::kSphere, {16, 16, 16}, {{-1, -1, -1}, {1, 1, 1}});
  std::vector<SampleRecord> samples;
  render_view(base, orbit_camera(0, 0, 3, {0, 0, 0}, 8, 8), {}, &samples);
  PreservationSettings ps;
  ps.step = default_step(base);
  SUBCASE("identical fields: no color gradient") {
    const std::vector<double> w(samples.size(), 1.0);
    FieldGradient grad(base.voxel_count());
    const double l = preservation_loss(base, base, samples, w, ps, &grad);
    CHECK(l > 0);
    for (double c : grad.color) CHECK(c == 0.0);
  }
  SUBCASE("zero weights: zero loss and gradient") {
    const std::vector<double> w(samples.size(), 0.0);
    FieldGradient grad(base.voxel_count());
    CHECK(preservation_loss(base, base, samples, w, ps, &grad) == 0.0);
    CHECK(grad.max_abs() == 0.0);
  }
  SUBCASE("mismatched inputs") {
    const std::vector<double> w(samples.size() + 1, 1.0);
    CHECK(error_of([&] { preservation_loss(base, base, samples, w, ps); }) == Errc::kShapeMismatch);
  }
}

TEST_CASE("adam: parallel step equals the reference") {
  std::mt19937_64 rng(60);
  RadianceField a = oracle::random_field(rng, 8), b = a;
  Adam pa(a.voxel_count()), pb(b.voxel_count());
  std::normal_distribution<double> nd(0, 1);
  for (int it = 0; it < 5; ++it) {
    FieldGradient g(a.voxel_count());
    for (auto& v : g.density) v = nd(rng);
    for (size_t i = 0; i < g.color.size(); i += 3) g.color[i] = nd(rng);
    pa.step(a, g, 0.01);
    pb.step_reference(b, g, 0.01);
  }
  CHECK(a.density == b.density);
  CHECK(a.color == b.color);
  CHECK(pa.steps() == 5);
}

TEST_CASE("adam: first step moves by the learning rate") {
  RadianceField f({4, 4, 4}, {{-1, -1, -1}, {1, 1, 1}}, 0.0f, 0.0f);
  FieldGradient g(f.voxel_count());
  g.density[3] = 2.5;
  g.density[5] = -1e-3;
  Adam adam(f.voxel_count());
  adam.step(f, g, 0.1);
  CHECK(f.density[3] == doctest::Approx(-0.1).epsilon(1e-5));
  CHECK(f.density[5] == doctest::Approx(0.1).epsilon(1e-3));
  CHECK(f.density[0] == 0.0f);
  CHECK(f.color[0] == 0.0f);
}

TEST_CASE("learning rate decay") {
  CHECK(decayed_lr(0.01, 0.1, 0, 100) == doctest::Approx(0.01));
  CHECK(decayed_lr(0.01, 0.1, 100, 100) == doctest::Approx(0.001));
  CHECK(decayed_lr(0.01, 0.1, 50, 100) == doctest::Approx(0.01 * std::sqrt(0.1)));
}
