// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#include "skf/editor.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "skf/error.hpp"
#include "skf/io.hpp"

namespace skf {

void EditConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(Errc::kConfigError, m); };
  if (lambda_pres < 0 || lambda_sil < 0 || lambda_sp < 0 || lambda_c < 0) fail("loss weights must be >= 0");
  if (!(beta > 0)) fail("beta must be positive");
  if (distance_power != 1 && distance_power != 2) fail("distance_power must be 1 or 2");
  if (!(lr > 0)) fail("lr must be positive");
  if (!(lr_final_factor > 0)) fail("lr_final_factor must be positive");
  if (iterations < 0 || warmup_iters < 0 || prune_period <= 0) fail("bad iteration schedule");
  if (iterations > 0 && iterations <= warmup_iters) fail("iterations must exceed warmup_iters");
  if (rays_per_iter < 4) fail("rays_per_iter must be >= 4");
  if (!(occupancy_threshold > 0 && occupancy_threshold < 1)) fail("occupancy_threshold must be in (0,1)");
  if (checkpoint_every < 0) fail("checkpoint_every must be >= 0");
  if (!(elevation_min_deg <= elevation_max_deg) || !(radius_min_factor > 0 && radius_min_factor <= radius_max_factor))
    fail("bad view sampling ranges");
}

int EditConfig::train_resolution() const {
  return std::max(2, static_cast<int>(std::lround(std::sqrt(static_cast<double>(rays_per_iter)))));
}

nlohmann::json to_json(const EditConfig& c) {
  return {{"lambda_pres", c.lambda_pres},
          {"lambda_sil", c.lambda_sil},
          {"lambda_sp", c.lambda_sp},
          {"lambda_c", c.lambda_c},
          {"beta", c.beta},
          {"distance_power", c.distance_power},
          {"iterations", c.iterations},
          {"warmup_iters", c.warmup_iters},
          {"prune_period", c.prune_period},
          {"lr", c.lr},
          {"lr_final_factor", c.lr_final_factor},
          {"rays_per_iter", c.rays_per_iter},
          {"seed", c.seed},
          {"occupancy_threshold", c.occupancy_threshold},
          {"jitter", c.jitter},
          {"checkpoint_every", c.checkpoint_every},
          {"azimuth_range_deg", c.azimuth_range_deg},
          {"elevation_min_deg", c.elevation_min_deg},
          {"elevation_max_deg", c.elevation_max_deg},
          {"radius_min_factor", c.radius_min_factor},
          {"radius_max_factor", c.radius_max_factor},
          {"background", {c.background.x, c.background.y, c.background.z}}};
}

EditConfig edit_config_from_json(const nlohmann::json& j, EditConfig c) {
  if (!j.is_object()) throw Error(Errc::kConfigError, "edit config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "lambda_pres") c.lambda_pres = v.get<double>();
      else if (key == "lambda_sil") c.lambda_sil = v.get<double>();
      else if (key == "lambda_sp") c.lambda_sp = v.get<double>();
      else if (key == "lambda_c") c.lambda_c = v.get<double>();
      else if (key == "beta") c.beta = v.get<double>();
      else if (key == "distance_power") c.distance_power = v.get<int>();
      else if (key == "iterations") c.iterations = v.get<int>();
      else if (key == "warmup_iters") c.warmup_iters = v.get<int>();
      else if (key == "prune_period") c.prune_period = v.get<int>();
      else if (key == "lr") c.lr = v.get<double>();
      else if (key == "lr_final_factor") c.lr_final_factor = v.get<double>();
      else if (key == "rays_per_iter") c.rays_per_iter = v.get<int>();
      else if (key == "seed") c.seed = v.get<uint64_t>();
      else if (key == "occupancy_threshold") c.occupancy_threshold = v.get<double>();
      else if (key == "jitter") c.jitter = v.get<bool>();
      else if (key == "checkpoint_every") c.checkpoint_every = v.get<int>();
      else if (key == "azimuth_range_deg") c.azimuth_range_deg = v.get<double>();
      else if (key == "elevation_min_deg") c.elevation_min_deg = v.get<double>();
      else if (key == "elevation_max_deg") c.elevation_max_deg = v.get<double>();
      else if (key == "radius_min_factor") c.radius_min_factor = v.get<double>();
      else if (key == "radius_max_factor") c.radius_max_factor = v.get<double>();
      else if (key == "background") {
        if (!v.is_array() || v.size() != 3) throw Error(Errc::kConfigError, "background must be [r,g,b]");
        c.background = {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
      } else {
        throw Error(Errc::kConfigError, "unknown edit config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kConfigError, std::string("edit config: ") + e.what());
  }
  c.validate();
  return c;
}

void split_config_json(const nlohmann::json& j, nlohmann::json& edit, nlohmann::json& guidance) {
  if (!j.is_object()) throw Error(Errc::kConfigError, "config must be a JSON object");
  const nlohmann::json edit_keys = to_json(EditConfig{});
  const nlohmann::json guidance_keys = to_json(GuidanceConfig{});
  for (const auto& [key, v] : j.items()) {
    if ((key == "edit" || key == "guidance") && v.is_object()) {
      split_config_json(v, edit, guidance);
    } else if (edit_keys.contains(key)) {
      edit[key] = v;
    } else if (guidance_keys.contains(key) || key == "target_box") {
      guidance[key] = v;
    } else {
      throw Error(Errc::kConfigError, "unknown config key '" + key + "'");
    }
  }
}

void scale_default_warmup(nlohmann::json& edit) {
  const EditConfig d;
  const auto it = edit.find("iterations");
  if (it == edit.end() || !it->is_number_integer()) return;
  const auto w = edit.find("warmup_iters");
  if (w != edit.end() && *w != d.warmup_iters) return;
  edit["warmup_iters"] = it->get<long long>() * d.warmup_iters / d.iterations;
}

std::string loss_csv(const std::vector<LossRecord>& history) {
  std::string out = "iteration,l_sds,l_pres,l_sil,l_sp,l_total,lr\n";
  char line[256];
  for (const auto& r : history) {
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.iteration, r.l_sds, r.l_pres, r.l_sil,
                  r.l_sp, r.l_total, r.lr);
    out += line;
  }
  return out;
}

namespace {

double wrap_deg(double a) {
  a = std::fmod(a + 180.0, 360.0);
  if (a < 0) a += 360.0;
  return a - 180.0;
}

RenderSettings settings_for(const EditJob& job) {
  RenderSettings s;
  s.background = job.config.background;
  return s;
}

}  // namespace

EditJob make_edit_job(const RadianceField& base, SketchSet sketches, const EditConfig& cfg,
                      const GuidanceConfig& gcfg, GuidanceProvider& provider) {
  cfg.validate();
  gcfg.validate();
  if (sketches.views.empty()) throw Error(Errc::kEmptySketchSet, "edit needs at least one sketch view");
  EditJob job;
  job.base = &base;
  job.edited = base;
  if (!sketches.edit_bbox) bind_edit_bbox(sketches, base);
  job.sketches = std::move(sketches);
  job.config = cfg;
  job.guidance = gcfg;
  job.provider = &provider;
  job.adam = Adam(base.voxel_count());
  job.rng.seed(cfg.seed);
  seed_edit_region(job.edited, *job.sketches.edit_bbox);

  job.orbit_center = job.sketches.edit_bbox->center();
  double sx = 0, sz = 0, el = 0, r = 0;
  for (const auto& v : job.sketches.views) {
    const OrbitAngles a = orbit_angles(v.camera(), job.orbit_center);
    sx += std::sin(deg2rad(a.azimuth_deg));
    sz += std::cos(deg2rad(a.azimuth_deg));
    el += a.elevation_deg;
    r += a.radius;
  }
  const double n = static_cast<double>(job.sketches.views.size());
  job.mean_view.azimuth_deg = rad2deg(std::atan2(sx, sz));
  job.mean_view.elevation_deg = el / n;
  job.mean_view.radius = r / n;
  return job;
}

bool sees_box(const Camera& cam, const Aabb& box) {
  for (const Vec3& c : box.corners()) {
    const auto p = try_project(c, cam);
    if (!p || p->depth < cam.near || p->depth > cam.far) return false;
    if (p->u < 0 || p->v < 0 || p->u > cam.width || p->v > cam.height) return false;
  }
  return true;
}

Camera sample_view(const EditJob& job, std::mt19937_64& rng) {
  const EditConfig& c = job.config;
  const int res = c.train_resolution();
  const Camera& ref = job.sketches.views.front().camera();
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double az = 0, el = 0;
  for (int tries = 0; tries < 32; ++tries) {
    az = job.mean_view.azimuth_deg + c.azimuth_range_deg * (2 * u01(rng) - 1);
    el = c.elevation_min_deg + (c.elevation_max_deg - c.elevation_min_deg) * u01(rng);
    const double r =
        job.mean_view.radius * (c.radius_min_factor + (c.radius_max_factor - c.radius_min_factor) * u01(rng));
    Camera cam = orbit_camera(az, el, r, job.orbit_center, res, res, rad2deg(ref.fov_y), ref.near, ref.far);
    if (sees_box(cam, *job.sketches.edit_bbox)) return cam;
  }
  const SketchView* best = &job.sketches.views.front();
  double best_d = INFINITY;
  for (const auto& v : job.sketches.views) {
    const OrbitAngles a = orbit_angles(v.camera(), job.orbit_center);
    const double d = std::hypot(wrap_deg(a.azimuth_deg - az), a.elevation_deg - el);
    if (d < best_d) best_d = d, best = &v;
  }
  return best->camera().with_resolution(res, res);
}

const LossRecord& step(EditJob& job) {
  const EditConfig& c = job.config;
  RadianceField& fe = job.edited;
  LossRecord rec;
  rec.iteration = job.iteration;
  rec.lr = decayed_lr(c.lr, c.lr_final_factor, job.iteration, c.iterations);

  RenderSettings settings = settings_for(job);
  settings.step = default_step(fe);
  if (c.jitter) settings.offset = std::uniform_real_distribution<double>(0.0, 1.0)(job.rng);

  const Camera cam = sample_view(job, job.rng);
  std::vector<SampleRecord> samples;
  const RenderOutput out = render_view(fe, cam, settings, &samples);

  FieldGradient grad(fe.voxel_count());
  Image pix(cam.width, cam.height, 4, 0.0f);

  const std::string prompt = job.guidance.directional_prompts
                                 ? directional_prompt(job.guidance.prompt, cam, job.orbit_center)
                                 : job.guidance.prompt;
  const SdsResult sds = sds_pixel_gradient(out.rgb, job.guidance, *job.provider, job.rng, prompt, cam);
  rec.l_sds = sds.surrogate_loss;
  for (size_t p = 0; p < out.rgb.pixel_count(); ++p)
    for (int ch = 0; ch < 3; ++ch) pix.data[4 * p + ch] = sds.gradient.data[3 * p + ch];

  rec.l_sp = sparsity_loss(out.alpha, c.lambda_sp > 0 ? &pix : nullptr, c.lambda_sp);
  render_backward(fe, cam, settings, pix, grad);

  std::vector<double> weights(samples.size());
  const long ns = static_cast<long>(samples.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < ns; ++i)
    weights[i] = preservation_weight(multiview_distance(samples[i].position, job.sketches, c.distance_power), c.beta);
  PreservationSettings ps{settings.step, c.lambda_c, c.occupancy_threshold};
  rec.l_pres = preservation_loss(fe, *job.base, samples, weights, ps, c.lambda_pres > 0 ? &grad : nullptr,
                                 c.lambda_pres);

  RenderSettings sil = settings_for(job);
  sil.step = settings.step;
  const double norm_base = 1.0 / static_cast<double>(job.sketches.views.size());
  for (const auto& v : job.sketches.views) {
    const Camera& sc = v.camera();
    const RenderOutput so = render_view(fe, sc, sil);
    const double norm = norm_base / static_cast<double>(sc.width * sc.height);
    if (c.lambda_sil > 0) {
      Image sg(sc.width, sc.height, 4, 0.0f);
      rec.l_sil += silhouette_loss(so.alpha, v.mask(), norm, &sg, c.lambda_sil);
      render_backward(fe, sc, sil, sg, grad);
    } else {
      rec.l_sil += silhouette_loss(so.alpha, v.mask(), norm);
    }
  }

  rec.l_total = rec.l_sds + c.lambda_pres * rec.l_pres + c.lambda_sil * rec.l_sil + c.lambda_sp * rec.l_sp;
  if (!std::isfinite(rec.l_total) || !grad.all_finite()) {
    std::ostringstream msg;
    msg << "iteration " << job.iteration << ": l_sds=" << rec.l_sds << " l_pres=" << rec.l_pres
        << " l_sil=" << rec.l_sil << " l_sp=" << rec.l_sp << " grad_finite=" << grad.all_finite();
    throw Error(Errc::kNonFiniteLoss, msg.str());
  }
  if (rec.lr > 0) job.adam.step(fe, grad, rec.lr);
  ++job.iteration;
  prune(fe, job.iteration, c.warmup_iters, c.prune_period);
  job.history.push_back(rec);
  return job.history.back();
}

namespace {

std::string config_hash(const EditConfig& c, const GuidanceConfig& g) {
  return hex64(fnv1a64(to_json(c).dump() + to_json(g).dump()));
}

}  // namespace

RadianceField edit(const RadianceField& base, const SketchSet& sketches, const EditConfig& cfg,
                   const GuidanceConfig& gcfg, GuidanceProvider& provider, const EditHooks& hooks,
                   std::vector<LossRecord>* history) {
  EditJob job = make_edit_job(base, sketches, cfg, gcfg, provider);
  while (job.iteration < cfg.iterations) {
    if (hooks.cancel && hooks.cancel->load()) throw Error(Errc::kCancelled, "edit cancelled");
    const LossRecord& rec = step(job);
    if (hooks.on_step) hooks.on_step(job, rec);
    if (cfg.checkpoint_every > 0 && !hooks.checkpoint_dir.empty() && job.iteration % cfg.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "ckpt_%06d.skfd", job.iteration);
      save_field(job.edited, (std::filesystem::path(hooks.checkpoint_dir) / name).string());
    }
  }
  if (!hooks.loss_csv_path.empty()) write_file_atomic(hooks.loss_csv_path, loss_csv(job.history));

  nlohmann::json entry = {{"config_hash", config_hash(cfg, gcfg)},
                          {"prompt", gcfg.prompt},
                          {"provider", provider.name()},
                          {"sketch_hash", sketch_hash(job.sketches)},
                          {"base_hash", field_hash(base)},
                          {"iterations", cfg.iterations},
                          {"seed", cfg.seed},
                          {"config", to_json(cfg)},
                          {"guidance", to_json(gcfg)},
                          {"edit_bbox",
                           {job.sketches.edit_bbox->min.x, job.sketches.edit_bbox->min.y,
                            job.sketches.edit_bbox->min.z, job.sketches.edit_bbox->max.x,
                            job.sketches.edit_bbox->max.y, job.sketches.edit_bbox->max.z}}};
  if (!job.edited.metadata.contains("edits")) job.edited.metadata["edits"] = nlohmann::json::array();
  job.edited.metadata["edits"].push_back(entry);
  if (history) *history = std::move(job.history);
  return std::move(job.edited);
}

RadianceField edit_progressive(
    const RadianceField& base, const std::vector<EditStage>& stages,
    const std::function<std::unique_ptr<GuidanceProvider>(const RadianceField&, const EditStage&)>&
        make_provider_for) {
  RadianceField current = base;
  for (const auto& stage : stages) {
    auto provider = make_provider_for(current, stage);
    current = edit(current, stage.sketches, stage.config, stage.guidance, *provider);
  }
  return current;
}

RadianceField reconstruct(std::span<const PosedImage> images, const ReconstructConfig& cfg,
                          std::vector<double>* loss_history) {
  if (images.empty()) throw Error(Errc::kConfigError, "reconstruct needs at least one image");
  RadianceField f(cfg.res, cfg.bbox, cfg.density_init, 0.0f);
  f.occupancy.set_prune_threshold(cfg.prune_threshold);
  f.occupancy.fill(true);
  f.metadata["created_by"] = "reconstruct";
  if (cfg.iterations <= 0) return f;
  Adam adam(f.voxel_count());
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<size_t> pick(0, images.size() - 1);
  RenderSettings s;
  s.background = cfg.background;
  FieldGradient grad(f.voxel_count());
  for (int it = 0; it < cfg.iterations; ++it) {
    const PosedImage& im = images[pick(rng)];
    const Camera cam = im.camera.with_resolution(im.rgb.width, im.rgb.height);
    const RenderOutput out = render_view(f, cam, s);
    Image pix(cam.width, cam.height, 4, 0.0f);
    const double l = photometric_loss(out.rgb, im.rgb, &pix);
    if (!std::isfinite(l)) throw Error(Errc::kNonFiniteLoss, "photometric loss diverged");
    if (loss_history) loss_history->push_back(l);
    grad.zero();
    render_backward(f, cam, s, pix, grad);
    adam.step(f, grad, decayed_lr(cfg.lr, cfg.lr_final_factor, it, cfg.iterations));
    prune(f, it + 1, cfg.warmup_iters, cfg.prune_period);
  }
  return f;
}

}  // namespace skf
