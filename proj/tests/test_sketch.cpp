// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "doctest.h"
#include "skf/sketch.hpp"
#include "support/errors.hpp"
#include "support/oracles.hpp"

using namespace skf;
using skf::testing::error_of;

namespace {

Mask random_mask(std::mt19937_64& rng, int w, int h, double density) {
  Mask m(w, h);
  std::bernoulli_distribution b(density);
  for (auto& v : m.data) v = b(rng);
  return m;
}

Mask square_mask(int size, int lo, int hi) {
  Mask m(size, size);
  for (int y = lo; y < hi; ++y)
    for (int x = lo; x < hi; ++x) m.set(x, y, true);
  return m;
}

std::string temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "skf_test_sketch" / name;
  std::filesystem::remove_all(dir);
  return dir.string();
}

}  // namespace

TEST_CASE("distance transform matches brute force") {
  std::mt19937_64 rng(1);
  for (int r = 0; r < 20; ++r) {
    const int w = 5 + r % 17, h = 3 + (r * 7) % 19;
    const Mask m = random_mask(rng, w, h, r % 3 == 0 ? 0.02 : 0.2);
    if (m.count() == 0) continue;
    const auto d = euclidean_distance_transform(m);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        CHECK(d[size_t(y) * w + x] == doctest::Approx(oracle::brute_mask_distance(m, x, y)).epsilon(1e-12));
  }
}

TEST_CASE("distance transform of an empty mask is infinite") {
  const auto d = euclidean_distance_transform(Mask(4, 3));
  for (double v : d) CHECK(std::isinf(v));
}

TEST_CASE("per-view distance agrees with the brute-force composition") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int power : {1, 2}) {
    std::vector<SketchView> views;
    for (int v = 0; v < 3; ++v) {
      const Camera cam = oracle::random_camera(rng, 24 + 8 * v, 20);
      views.emplace_back(cam, random_mask(rng, cam.width, cam.height, 0.03));
    }
    SketchSet set{views, std::nullopt};
    for (int i = 0; i < 200; ++i) {
      const Vec3 p{u(rng), u(rng), u(rng)};
      double mean = 0;
      for (const auto& v : views) {
        const double want = oracle::brute_view_distance(p, v.camera(), v.mask(), power);
        CHECK(per_view_distance(p, v, power) == doctest::Approx(want).epsilon(1e-9));
        mean += want / 3.0;
      }
      CHECK(multiview_distance(p, set, power) == doctest::Approx(mean).epsilon(1e-9));
    }
  }
}

TEST_CASE("distance special cases") {
  const Camera cam = orbit_camera(0, 0, 3, {0, 0, 0}, 32, 32);
  SUBCASE("point projecting onto the mask") {
    const SketchView v(cam, square_mask(32, 12, 20));
    CHECK(per_view_distance({0, 0, 0}, v) == 0.0);
  }
  SUBCASE("point behind the camera") {
    const SketchView v(cam, square_mask(32, 12, 20));
    const double diag = std::hypot(32.0, 32.0) / 32.0;
    CHECK(per_view_distance(cam.position() - cam.forward(), v, 2) == doctest::Approx(4 * diag * diag));
    CHECK(per_view_distance(cam.position() - cam.forward(), v, 1) == doctest::Approx(2 * diag));
  }
  SUBCASE("off-image distance grows monotonically") {
    const SketchView v(cam, square_mask(32, 12, 20));
    double prev = -1;
    for (double x = 0; x < 3; x += 0.05) {
      const double d = per_view_distance({x, 0, 0}, v, 1);
      CHECK(d >= prev);
      prev = d;
    }
  }
  SUBCASE("empty set") {
    CHECK(error_of([&] { multiview_distance({0, 0, 0}, SketchSet{}); }) == Errc::kEmptySketchSet);
  }
}

TEST_CASE("preservation weight") {
  CHECK(preservation_weight(0.0, 0.05) == 0.0);
  double prev = 0;
  for (double d = 0.001; d < 1; d *= 1.3) {
    const double w = preservation_weight(d, 0.05);
    CHECK(w >= prev);
    CHECK(w <= 1.0);
    prev = w;
  }
  CHECK(preservation_weight(1.0, 0.05) == doctest::Approx(1.0));
  CHECK(error_of([] { preservation_weight(0.1, 0.0); }) == Errc::kConfigError);
}

TEST_CASE("edit box of two centered squares matches the frustum intersection") {
  // 20 px squares in 64 px views from +z and +x at distance 3: the frusta
  // have half-slope k = 10 / focal.
  const Camera front = orbit_camera(0, 0, 3, {0, 0, 0}, 64, 64);
  const Camera side = orbit_camera(90, 0, 3, {0, 0, 0}, 64, 64);
  std::vector<SketchView> views{SketchView(front, square_mask(64, 22, 42)), SketchView(side, square_mask(64, 22, 42))};
  const Aabb box = compute_edit_bbox(views, {{-1, -1, -1}, {1, 1, 1}}, {64, 64, 64});
  const double k = 10.0 / front.focal();
  const double far_side = 3 * k / (1 - k), near_side = 3 * k * (1 + k) / (1 + k * k);
  const double lx = far_side + near_side, ly = 2 * far_side;
  const Vec3 e = box.extent();
  CHECK(std::abs(e.x / lx - 1) < 0.1);
  CHECK(std::abs(e.z / lx - 1) < 0.1);
  CHECK(std::abs(e.y / ly - 1) < 0.1);
  CHECK(std::abs(box.center().y) < 0.05);
}

TEST_CASE("edit box errors") {
  const Camera front = orbit_camera(0, 0, 3, {0, 0, 0}, 32, 32);
  const Aabb unit{{-1, -1, -1}, {1, 1, 1}};
  std::vector<SketchView> empty_mask{SketchView(front, Mask(32, 32))};
  CHECK(error_of([&] { compute_edit_bbox(empty_mask, unit, {16, 16, 16}); }) == Errc::kEmptyIntersection);
  // Disjoint corners: top-left of one view, bottom-right of the opposite view.
  const Camera back = orbit_camera(180, 0, 3, {0, 0, 0}, 32, 32);
  std::vector<SketchView> disjoint{SketchView(front, square_mask(32, 0, 3)), SketchView(back, square_mask(32, 29, 32))};
  CHECK(error_of([&] { compute_edit_bbox(disjoint, unit, {16, 16, 16}); }) == Errc::kEmptyIntersection);
  CHECK(error_of([&] { compute_edit_bbox({}, unit, {16, 16, 16}); }) == Errc::kEmptySketchSet);
}

TEST_CASE("visual hull membership") {
  const Camera front = orbit_camera(0, 0, 3, {0, 0, 0}, 64, 64);
  const Camera side = orbit_camera(90, 0, 3, {0, 0, 0}, 64, 64);
  std::vector<SketchView> views{SketchView(front, square_mask(64, 22, 42)), SketchView(side, square_mask(64, 22, 42))};
  CHECK(in_visual_hull({0, 0, 0}, views));
  CHECK(in_visual_hull({0.2, -0.2, 0.2}, views));
  CHECK_FALSE(in_visual_hull({0.6, 0, 0}, views));
  CHECK_FALSE(in_visual_hull({0, 0.6, 0}, views));
}

TEST_CASE("scribble fill") {
  SUBCASE("closed circle fills a disc") {
    const double r = 20, cx = 40, cy = 36;
    Polyline circle;
    for (int i = 0; i <= 90; ++i) {
      const double a = 2 * std::numbers::pi * i / 90;
      circle.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
    }
    const FillResult f = fill_scribble(std::vector<Polyline>{circle}, 80, 72);
    CHECK_FALSE(f.open_curve);
    const double area = std::numbers::pi * r * r;
    CHECK(std::abs(f.mask.count() - area) / area < 0.05);
    CHECK(f.mask.at(40, 36));
    CHECK_FALSE(f.mask.at(2, 2));
  }
  SUBCASE("nearly closed square is closed first") {
    Polyline sq{{10, 10}, {40, 10}, {40, 40}, {10, 40}, {10, 12.5}};
    const FillResult f = fill_scribble(std::vector<Polyline>{sq}, 50, 50);
    CHECK_FALSE(f.open_curve);
    CHECK(f.mask.at(25, 25));
  }
  SUBCASE("a straight line is an open curve") {
    Polyline line{{5, 5}, {40, 30}};
    const FillResult f = fill_scribble(std::vector<Polyline>{line}, 50, 50);
    CHECK(f.open_curve);
    CHECK(f.mask.count() > 0);
    CHECK(f.mask.at(22, 17));
  }
  SUBCASE("filled bitmap comes back unchanged") {
    Mask blob(30, 30);
    for (int y = 5; y < 25; ++y)
      for (int x = 8; x < 22; ++x) blob.set(x, y, true);
    const FillResult f = fill_scribble(blob);
    CHECK_FALSE(f.open_curve);
    CHECK(f.mask == blob);
  }
  SUBCASE("ring bitmap gets its hole filled") {
    Mask ring(30, 30);
    for (int y = 5; y < 25; ++y)
      for (int x = 5; x < 25; ++x)
        if (x < 7 || x > 22 || y < 7 || y > 22) ring.set(x, y, true);
    const FillResult f = fill_scribble(ring);
    CHECK(f.mask.at(15, 15));
    CHECK(f.mask.count() == 400);
  }
  SUBCASE("empty input") {
    CHECK(error_of([] { fill_scribble(std::vector<Polyline>{}, 10, 10); }) == Errc::kConfigError);
    CHECK(error_of([] { fill_scribble(Mask(10, 10)); }) == Errc::kConfigError);
  }
}

TEST_CASE("sketch package round trip") {
  std::mt19937_64 rng(3);
  SketchSet set;
  for (int v = 0; v < 3; ++v) {
    const Camera cam = oracle::random_camera(rng, 32, 24);
    Image canvas(32, 24, 3, 0.5f);
    set.views.emplace_back(cam, random_mask(rng, 32, 24, 0.3), v == 1 ? std::optional<Image>(canvas) : std::nullopt);
  }
  const std::string dir = temp_dir("roundtrip");
  save_sketch_package(dir, set, 0.125, 1);
  const SketchPackage pkg = load_sketch_package(dir);
  CHECK(pkg.beta == 0.125);
  CHECK(pkg.distance_power == 1);
  REQUIRE(pkg.set.views.size() == 3);
  for (size_t v = 0; v < 3; ++v) {
    CHECK(pkg.set.views[v].mask() == set.views[v].mask());
    CHECK(pkg.set.views[v].camera() == set.views[v].camera());
  }
  CHECK(pkg.set.views[1].canvas().has_value());
  CHECK(sketch_hash(pkg.set) == sketch_hash(set));

  SketchSet other = set;
  Mask flipped = set.views[0].mask();
  flipped.data[0] ^= 1;
  other.views[0] = SketchView(set.views[0].camera(), flipped);
  CHECK(sketch_hash(other) != sketch_hash(set));
}

TEST_CASE("sketch package errors") {
  const std::string empty = temp_dir("empty");
  std::filesystem::create_directories(empty);
  CHECK(error_of([&] { load_sketch_package(empty); }) == Errc::kEmptySketchSet);

  const std::string bad = temp_dir("bad_camera");
  SketchSet set;
  set.views.emplace_back(orbit_camera(0, 0, 3, {0, 0, 0}, 8, 8), square_mask(8, 2, 5));
  save_sketch_package(bad, set, 0.05, 2);
  {
    std::ofstream out(bad + "/view_00/camera.json");
    out << "{\"width\": ";
  }
  CHECK(error_of([&] { load_sketch_package(bad); }) == Errc::kParseError);
}
