// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "skf/editor.hpp"
#include "skf/io.hpp"
#include "skf/metrics.hpp"
#include "support/errors.hpp"

using namespace skf;
using skf::testing::error_of;

namespace {

const Aabb kUnit{{-1, -1, -1}, {1, 1, 1}};

// Small sphere with a square sketch just above it, seen from two sides.
struct Desk {
  RadianceField base = synth_scene(SceneKind::kSphere, {20, 20, 20}, kUnit);
  SketchSet sketches;
  Desk() {
    for (double az : {0.0, 90.0}) {
      const Camera cam = orbit_camera(az, 0, 3, {0, 0.6, 0}, 24, 24);
      Mask m(24, 24);
      for (int y = 8; y < 13; ++y)
        for (int x = 9; x < 15; ++x) m.set(x, y, true);
      sketches.views.emplace_back(cam, m);
    }
  }
};

EditConfig quick_config(int iterations) {
  EditConfig c;
  c.iterations = iterations;
  c.warmup_iters = iterations / 2;
  c.prune_period = 5;
  c.rays_per_iter = 16 * 16;
  c.lambda_pres = 1.0;
  return c;
}

std::string temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "skf_test_editor" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace

TEST_CASE("edit config validation and json") {
  EditConfig c;
  CHECK_NOTHROW(c.validate());
  c.iterations = 500;
  CHECK(error_of([&] { c.validate(); }) == Errc::kConfigError);
  c = {};
  c.lambda_sil = -1;
  CHECK(error_of([&] { c.validate(); }) == Errc::kConfigError);
  c = {};
  c.lr = 0;
  CHECK(error_of([&] { c.validate(); }) == Errc::kConfigError);
  c = {};
  c.distance_power = 3;
  CHECK(error_of([&] { c.validate(); }) == Errc::kConfigError);

  c = {};
  c.beta = 0.5;
  c.seed = 77;
  c.background = {0, 0, 0};
  const EditConfig back = edit_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(edit_config_from_json({{"iterations", 3000}}).iterations == 3000);
  CHECK(error_of([] { edit_config_from_json({{"iteration", 3}}); }) == Errc::kConfigError);
  CHECK(EditConfig{}.train_resolution() == 64);
}

TEST_CASE("edit job starts from a copy of the base") {
  Desk d;
  EchoProvider echo;
  const EditJob job = make_edit_job(d.base, d.sketches, quick_config(10), {}, echo);
  CHECK(job.edited.density == d.base.density);
  CHECK(job.edited.color == d.base.color);
  REQUIRE(job.sketches.edit_bbox.has_value());
  CHECK(job.edited.occupancy.count_set() >= d.base.occupancy.count_set());
  CHECK(job.mean_view.azimuth_deg == doctest::Approx(45.0).epsilon(1e-6));
  CHECK(error_of([&] { make_edit_job(d.base, SketchSet{}, quick_config(10), {}, echo); }) == Errc::kEmptySketchSet);
}

TEST_CASE("sampled training views see the whole edit box") {
  Desk d;
  EchoProvider echo;
  const EditJob job = make_edit_job(d.base, d.sketches, quick_config(10), {}, echo);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const Camera cam = sample_view(job, rng);
    CHECK(cam.width == 16);
    CHECK(sees_box(cam, *job.sketches.edit_bbox));
  }
}

TEST_CASE("steps keep the base frozen and losses finite") {
  Desk d;
  const RadianceField frozen = d.base;
  GuidanceConfig g;
  g.prompt = "a box";
  AnalyticTargetProvider provider(
      build_target_field(d.base, {{-0.2, 0.25, -0.2}, {0.2, 0.6, 0.2}}, TargetShape::kCube, g.target_color,
                         g.target_tint, g.tint_strength),
      1e-3, 0.1);
  EditJob job = make_edit_job(d.base, d.sketches, quick_config(20), g, provider);
  for (int i = 0; i < 20; ++i) {
    const LossRecord& r = step(job);
    CHECK(r.iteration == i);
    CHECK(std::isfinite(r.l_total));
    CHECK(r.l_sil > 0);
  }
  CHECK(d.base.density == frozen.density);
  CHECK(job.history.size() == 20);
  CHECK(job.history.back().lr < job.history.front().lr);
}

TEST_CASE("silhouette loss alone grows density inside the masks") {
  Desk d;
  EchoProvider echo;
  EditConfig c = quick_config(120);
  c.warmup_iters = 80;
  c.lambda_pres = 0;
  c.lambda_sp = 0;
  c.lr = 0.3;
  std::vector<LossRecord> hist;
  const RadianceField out = edit(d.base, d.sketches, c, {}, echo, {}, &hist);
  CHECK(hist.back().l_sil < 0.1 * hist.front().l_sil);
  std::vector<Mask> masks;
  std::vector<Image> before, after;
  for (const auto& v : d.sketches.views) {
    masks.push_back(v.mask());
    before.push_back(render_view(d.base, v.camera()).alpha);
    after.push_back(render_view(out, v.camera()).alpha);
  }
  CHECK(ios(masks, after) > ios(masks, before) + 0.3);
}

TEST_CASE("edit with a fixed seed is reproducible on one thread") {
  Desk d;
  const int threads = omp_get_max_threads();
  omp_set_num_threads(1);
  GuidanceConfig g;
  g.prompt = "a box";
  auto run = [&](std::vector<LossRecord>& hist) {
    AnalyticTargetProvider provider(
        build_target_field(d.base, {{-0.2, 0.25, -0.2}, {0.2, 0.6, 0.2}}, TargetShape::kCube, g.target_color,
                           g.target_tint, g.tint_strength),
        1e-3, 0.1);
    return edit(d.base, d.sketches, quick_config(12), g, provider, {}, &hist);
  };
  std::vector<LossRecord> h1, h2;
  const RadianceField a = run(h1), b = run(h2);
  omp_set_num_threads(threads);
  CHECK(loss_csv(h1) == loss_csv(h2));
  CHECK(serialize_field(a) == serialize_field(b));
}

TEST_CASE("edit hooks") {
  Desk d;
  EchoProvider echo;
  EditConfig c = quick_config(6);
  c.checkpoint_every = 3;
  const std::string dir = temp_dir("hooks");
  EditHooks hooks;
  int seen = 0;
  hooks.on_step = [&](const EditJob&, const LossRecord&) { ++seen; };
  hooks.checkpoint_dir = dir;
  hooks.loss_csv_path = dir + "/loss.csv";
  GuidanceConfig g;
  g.prompt = "bump";
  const RadianceField out = edit(d.base, d.sketches, c, g, echo, hooks);
  CHECK(seen == 6);
  CHECK(std::filesystem::exists(dir + "/ckpt_000003.skfd"));
  CHECK(std::filesystem::exists(dir + "/ckpt_000006.skfd"));
  const std::string csv = read_file_text(dir + "/loss.csv");
  CHECK(csv.rfind("iteration,l_sds,l_pres,l_sil,l_sp,l_total,lr\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
  REQUIRE(out.metadata.contains("edits"));
  const auto& e = out.metadata["edits"].back();
  CHECK(e["prompt"] == "bump");
  CHECK(e["provider"] == "echo");
  CHECK(e["base_hash"] == field_hash(d.base));
  CHECK(e["sketch_hash"].get<std::string>().size() == 16);

  std::atomic<bool> cancel{true};
  EditHooks stop;
  stop.cancel = &cancel;
  CHECK(error_of([&] { edit(d.base, d.sketches, c, g, echo, stop); }) == Errc::kCancelled);
}

TEST_CASE("non-finite guidance aborts the edit") {
  struct NanProvider final : GuidanceProvider {
    ScoreResponse score(const ScoreRequest& r) override {
      Image g(r.image.width, r.image.height, 3, NAN);
      return {g, ""};
    }
    std::string name() const override { return "nan"; }
  } nan_provider;
  Desk d;
  EditJob job = make_edit_job(d.base, d.sketches, quick_config(4), {}, nan_provider);
  CHECK_THROWS_AS(step(job), Error);
}

TEST_CASE("progressive editing chains the stages") {
  Desk d;
  EditStage first{d.sketches, quick_config(30), {}};
  first.config.lambda_sp = 0;
  first.config.lr = 0.3;
  SketchSet second_set;
  for (double az : {0.0, 90.0}) {
    const Camera cam = orbit_camera(az, 0, 3, {0, -0.4, 0}, 24, 24);
    Mask m(24, 24);
    for (int y = 12; y < 17; ++y)
      for (int x = 9; x < 15; ++x) m.set(x, y, true);
    second_set.views.emplace_back(cam, m);
  }
  EditStage second{second_set, first.config, {}};
  int built = 0;
  const RadianceField out = edit_progressive(d.base, {first, second}, [&](const RadianceField&, const EditStage&) {
    ++built;
    return std::make_unique<EchoProvider>();
  });
  CHECK(built == 2);
  REQUIRE(out.metadata["edits"].size() == 2);
  CHECK(out.metadata["edits"][1]["base_hash"] != field_hash(d.base));
}

TEST_CASE("progressive editing with zero or one stage") {
  Desk d;
  const auto echo = [](const RadianceField&, const EditStage&) { return std::make_unique<EchoProvider>(); };
  CHECK(edit_progressive(d.base, {}, echo) == d.base);

  const int threads = omp_get_max_threads();
  omp_set_num_threads(1);
  const EditStage stage{d.sketches, quick_config(8), {}};
  const RadianceField chained = edit_progressive(d.base, {stage}, echo);
  EchoProvider provider;
  const RadianceField direct = edit(d.base, d.sketches, stage.config, stage.guidance, provider);
  omp_set_num_threads(threads);
  CHECK(serialize_field(chained) == serialize_field(direct));
}

TEST_CASE("reconstruction fits posed renders") {
  const RadianceField truth = synth_scene(SceneKind::kSphere, {16, 16, 16}, kUnit);
  std::vector<PosedImage> images;
  for (int i = 0; i < 6; ++i) {
    const Camera cam = orbit_camera(60.0 * i, 15, 3, {0, 0, 0}, 20, 20);
    images.push_back({cam, render_view(truth, cam).rgb});
  }
  ReconstructConfig cfg;
  cfg.res = {16, 16, 16};
  cfg.iterations = 150;
  cfg.warmup_iters = 50;
  std::vector<double> losses;
  const RadianceField fit = reconstruct(images, cfg, &losses);
  REQUIRE(losses.size() == 150);
  double early = 0, late = 0;
  for (int i = 0; i < 10; ++i) early += losses[i], late += losses[140 + i];
  CHECK(late < 0.3 * early);
  CHECK(fit.metadata["created_by"] == "reconstruct");
}

TEST_CASE("reconstruction edge cases") {
  ReconstructConfig cfg;
  cfg.res = {12, 12, 12};
  const Camera cam = orbit_camera(0, 10, 3, {0, 0, 0}, 16, 16);
  Image blank(16, 16, 3);
  for (auto& v : blank.data) v = 1.0f;
  const std::vector<PosedImage> images{{cam, blank}};

  cfg.iterations = 0;
  const RadianceField initial = reconstruct(images, cfg);
  CHECK(std::all_of(initial.density.begin(), initial.density.end(), [&](float p) { return p == cfg.density_init; }));

  cfg.iterations = 200;
  cfg.warmup_iters = 100;
  const RadianceField fit = reconstruct(images, cfg);
  const Image alpha = render_view(fit, cam).alpha;
  double mean = 0;
  for (float a : alpha.data) mean += a;
  CHECK(mean / alpha.data.size() < 0.05);
}
