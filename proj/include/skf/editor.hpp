// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "skf/guidance.hpp"
#include "skf/losses.hpp"
#include "skf/optim.hpp"
#include "skf/render.hpp"
#include "skf/sketch.hpp"

namespace skf {

struct EditConfig {
  double lambda_pres = 10.0;
  double lambda_sil = 1.0;
  double lambda_sp = 5e-4;
  double lambda_c = 5.0;
  double beta = 0.05;
  int distance_power = 2;
  int iterations = 2000;
  int warmup_iters = 1000;
  int prune_period = 100;
  double lr = 0.05;
  double lr_final_factor = 0.1;
  int rays_per_iter = 64 * 64;  // training render is the nearest square
  uint64_t seed = 0;
  double occupancy_threshold = 0.5;
  bool jitter = false;
  int checkpoint_every = 0;  // 0 disables
  double azimuth_range_deg = 90.0;
  double elevation_min_deg = -10.0;
  double elevation_max_deg = 60.0;
  double radius_min_factor = 0.9;
  double radius_max_factor = 1.1;
  Vec3 background{1, 1, 1};

  void validate() const;
  int train_resolution() const;
};

nlohmann::json to_json(const EditConfig& c);
// Unknown keys raise Errc::kConfigError; missing keys keep `base` values.
EditConfig edit_config_from_json(const nlohmann::json& j, EditConfig base = {});

// Splits a flat object, or one with "edit" and "guidance" members, into edit
// and guidance keys merged over `edit` and `guidance`. Throws
// Errc::kConfigError on keys neither config owns.
void split_config_json(const nlohmann::json& j, nlohmann::json& edit, nlohmann::json& guidance);
// When `edit` leaves warmup_iters at its default, rescales it to keep the
// default warmup/iterations proportion.
void scale_default_warmup(nlohmann::json& edit);

struct LossRecord {
  int iteration = 0;
  double l_sds = 0, l_pres = 0, l_sil = 0, l_sp = 0, l_total = 0, lr = 0;
};

std::string loss_csv(const std::vector<LossRecord>& history);

struct EditJob {
  const RadianceField* base = nullptr;  // frozen
  RadianceField edited;
  SketchSet sketches;
  EditConfig config;
  GuidanceConfig guidance;
  GuidanceProvider* provider = nullptr;
  int iteration = 0;
  std::vector<LossRecord> history;
  Adam adam;
  std::mt19937_64 rng;
  Vec3 orbit_center;
  OrbitAngles mean_view;
};

// Copies the base, binds the edit box if missing and seeds its occupancy.
EditJob make_edit_job(const RadianceField& base, SketchSet sketches, const EditConfig& cfg,
                      const GuidanceConfig& gcfg, GuidanceProvider& provider);

// Camera for the next training view; see EditConfig for the ranges. Every
// returned camera sees all 8 corners of the edit box, or is the nearest
// sketch camera.
Camera sample_view(const EditJob& job, std::mt19937_64& rng);
bool sees_box(const Camera& cam, const Aabb& box);

// One optimization iteration. Throws Errc::kNonFiniteLoss.
const LossRecord& step(EditJob& job);

struct EditHooks {
  std::function<void(const EditJob&, const LossRecord&)> on_step;
  const std::atomic<bool>* cancel = nullptr;  // raises Errc::kCancelled
  std::string checkpoint_dir;                 // used when checkpoint_every > 0
  std::string loss_csv_path;
};

RadianceField edit(const RadianceField& base, const SketchSet& sketches, const EditConfig& cfg,
                   const GuidanceConfig& gcfg, GuidanceProvider& provider, const EditHooks& hooks = {},
                   std::vector<LossRecord>* history = nullptr);

struct EditStage {
  SketchSet sketches;
  EditConfig config;
  GuidanceConfig guidance;
};

// Folds edit over the stages. `make_provider_for` builds each stage's
// provider from the current base.
RadianceField edit_progressive(
    const RadianceField& base, const std::vector<EditStage>& stages,
    const std::function<std::unique_ptr<GuidanceProvider>(const RadianceField&, const EditStage&)>&
        make_provider_for);

struct PosedImage {
  Camera camera;
  Image rgb;
};

struct ReconstructConfig {
  GridRes res{64, 64, 64};
  Aabb bbox{{-1, -1, -1}, {1, 1, 1}};
  int iterations = 2000;
  double lr = 0.1;
  double lr_final_factor = 0.1;
  float density_init = -2.0f;
  int warmup_iters = 200;
  int prune_period = 50;
  double prune_threshold = 0.2;
  uint64_t seed = 0;
  Vec3 background{1, 1, 1};
};

// Photometric fit of a fresh field to posed images, one random image per
// iteration.
RadianceField reconstruct(std::span<const PosedImage> images, const ReconstructConfig& cfg,
                          std::vector<double>* loss_history = nullptr);

}  // namespace skf
