// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#include "skf/guidance.hpp"

#include <cmath>

#include "skf/error.hpp"

namespace skf {

namespace {

nlohmann::json vec_json(const Vec3& v) { return {v.x, v.y, v.z}; }

Vec3 vec_from_json(const nlohmann::json& j, const char* key) {
  if (!j.is_array() || j.size() != 3) throw Error(Errc::kConfigError, std::string(key) + " must be [x,y,z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

double logit(double c) {
  c = std::clamp(c, 1e-4, 1.0 - 1e-4);
  return std::log(c / (1.0 - c));
}

}  // namespace

void GuidanceConfig::validate() const {
  if (!(guidance_scale > 0)) throw Error(Errc::kConfigError, "guidance_scale must be positive");
  if (!(0 <= t_min && t_min < t_max && t_max < schedule_steps))
    throw Error(Errc::kConfigError, "t_range must satisfy 0 <= t_min < t_max < schedule_steps");
  if (provider != "echo" && provider != "analytic" && provider != "external")
    throw Error(Errc::kConfigError, "unknown provider '" + provider + "'");
  if (!(analytic_k >= 0) || !(analytic_noise >= 0) || !(tint_strength >= 0 && tint_strength <= 1))
    throw Error(Errc::kConfigError, "analytic provider parameters out of range");
  if (!(timeout_s > 0)) throw Error(Errc::kConfigError, "timeout_s must be positive");
}

nlohmann::json to_json(const GuidanceConfig& c) {
  nlohmann::json j;
  j["prompt"] = c.prompt;
  j["guidance_scale"] = c.guidance_scale;
  j["t_range"] = {c.t_min, c.t_max};
  j["schedule_steps"] = c.schedule_steps;
  j["schedule"] = c.schedule == NoiseSchedule::kCosine ? "cosine" : "linear";
  j["directional_prompts"] = c.directional_prompts;
  j["provider"] = c.provider;
  j["endpoint"] = c.endpoint;
  j["timeout_s"] = c.timeout_s;
  j["target"] = c.target;
  if (c.target_box)
    j["target_box"] = {c.target_box->min.x, c.target_box->min.y, c.target_box->min.z,
                       c.target_box->max.x, c.target_box->max.y, c.target_box->max.z};
  else
    j["target_box"] = nullptr;
  j["target_color"] = vec_json(c.target_color);
  j["target_tint"] = vec_json(c.target_tint);
  j["tint_strength"] = c.tint_strength;
  j["analytic_k"] = c.analytic_k;
  j["analytic_noise"] = c.analytic_noise;
  return j;
}

GuidanceConfig guidance_config_from_json(const nlohmann::json& j, GuidanceConfig c) {
  if (!j.is_object()) throw Error(Errc::kConfigError, "guidance config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "prompt") c.prompt = v.get<std::string>();
      else if (key == "guidance_scale") c.guidance_scale = v.get<double>();
      else if (key == "t_range") {
        if (!v.is_array() || v.size() != 2) throw Error(Errc::kConfigError, "t_range must be [min,max]");
        c.t_min = v[0].get<int>();
        c.t_max = v[1].get<int>();
      } else if (key == "schedule_steps") c.schedule_steps = v.get<int>();
      else if (key == "schedule") {
        const auto s = v.get<std::string>();
        if (s == "cosine") c.schedule = NoiseSchedule::kCosine;
        else if (s == "linear") c.schedule = NoiseSchedule::kLinear;
        else throw Error(Errc::kConfigError, "schedule must be cosine or linear");
      } else if (key == "directional_prompts") c.directional_prompts = v.get<bool>();
      else if (key == "provider") c.provider = v.get<std::string>();
      else if (key == "endpoint") c.endpoint = v.get<std::string>();
      else if (key == "timeout_s") c.timeout_s = v.get<double>();
      else if (key == "target") c.target = v.get<std::string>();
      else if (key == "target_box") {
        if (v.is_null()) {
          c.target_box.reset();
        } else {
          if (!v.is_array() || v.size() != 6) throw Error(Errc::kConfigError, "target_box needs 6 numbers");
          c.target_box = Aabb{{v[0].get<double>(), v[1].get<double>(), v[2].get<double>()},
                              {v[3].get<double>(), v[4].get<double>(), v[5].get<double>()}};
        }
      } else if (key == "target_color") c.target_color = vec_from_json(v, "target_color");
      else if (key == "target_tint") c.target_tint = vec_from_json(v, "target_tint");
      else if (key == "tint_strength") c.tint_strength = v.get<double>();
      else if (key == "analytic_k") c.analytic_k = v.get<double>();
      else if (key == "analytic_noise") c.analytic_noise = v.get<double>();
      else throw Error(Errc::kConfigError, "unknown guidance config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::kConfigError, std::string("guidance config: ") + e.what());
  }
  c.validate();
  return c;
}

double alpha_bar(int t, const GuidanceConfig& cfg) {
  const int n = cfg.schedule_steps;
  t = std::clamp(t, 0, n - 1);
  if (cfg.schedule == NoiseSchedule::kCosine) {
    constexpr double s = 0.008;
    auto f = [&](double x) {
      const double c = std::cos((x / n + s) / (1 + s) * kPi / 2);
      return c * c;
    };
    return f(t + 1) / f(0);
  }
  double ab = 1.0;
  for (int i = 0; i <= t; ++i) ab *= 1.0 - (1e-4 + (0.02 - 1e-4) * i / std::max(1, n - 1));
  return ab;
}

ScoreResponse EchoProvider::score(const ScoreRequest& req) {
  return {Image(req.image.width, req.image.height, 3, 0.0f), "echo"};
}

std::vector<float> request_noise(uint64_t seed, size_t n) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<float> nd(0.0f, 1.0f);
  std::vector<float> out(n);
  for (auto& v : out) v = nd(gen);
  return out;
}

AnalyticTargetProvider::AnalyticTargetProvider(RadianceField target, double k, double noise,
                                               RenderSettings settings)
    : target_(std::move(target)), k_(k), noise_(noise), settings_(settings) {
  if (!(k_ > 0.0 && k_ <= 1.0)) throw Error(Errc::kConfigError, "analytic k must be in (0, 1]");
}

Image AnalyticTargetProvider::target_image(const Camera& cam) const {
  return render_view(target_, cam, settings_).rgb;
}

ScoreResponse AnalyticTargetProvider::score(const ScoreRequest& req) {
  if (!req.camera) throw Error(Errc::kConfigError, "analytic provider needs the request camera");
  if (req.image.channels != 3) throw Error(Errc::kShapeMismatch, "score request image must have 3 channels");
  const Camera cam = req.camera->with_resolution(req.image.width, req.image.height);
  const Image target = target_image(cam);
  ScoreResponse resp{Image(req.image.width, req.image.height, 3), "analytic"};
  std::vector<float> xi;
  if (noise_ > 0) xi = request_noise(req.seed ^ 0x9e3779b97f4a7c15ull, req.image.data.size());
  for (size_t i = 0; i < req.image.data.size(); ++i) {
    double r = k_ * (static_cast<double>(req.image.data[i]) - target.data[i]);
    if (noise_ > 0) r += k_ * noise_ * xi[i];
    resp.pixel_gradient.data[i] = static_cast<float>(r);
  }
  return resp;
}

TargetShape target_shape_from_string(const std::string& s) {
  if (s == "cube") return TargetShape::kCube;
  if (s == "sphere") return TargetShape::kSphere;
  throw Error(Errc::kConfigError, "unknown target shape '" + s + "'");
}

RadianceField build_target_field(const RadianceField& base, const Aabb& box, TargetShape shape,
                                 const Vec3& color, const Vec3& tint, double tint_strength,
                                 double inside_density) {
  RadianceField t = base;
  const Vec3 sp = t.spacing();
  const double voxel = std::min({sp.x, sp.y, sp.z});
  const Vec3 c = box.center(), h = box.extent() * 0.5;
  const float color_logit[3] = {static_cast<float>(logit(color.x)), static_cast<float>(logit(color.y)),
                                static_cast<float>(logit(color.z))};
  for (int k = 0; k < t.res.z; ++k)
    for (int j = 0; j < t.res.y; ++j)
      for (int i = 0; i < t.res.x; ++i) {
        const size_t idx = t.index(i, j, k);
        float* q = &t.color[3 * idx];
        for (int a = 0; a < 3; ++a)
          q[a] = static_cast<float>(logit((1 - tint_strength) * sigmoid(q[a]) + tint_strength * tint[a]));

        const Vec3 p = t.lattice_point(i, j, k) - c;
        double sdf;
        if (shape == TargetShape::kCube) {
          const Vec3 d{std::abs(p.x) - h.x, std::abs(p.y) - h.y, std::abs(p.z) - h.z};
          const Vec3 o = vmax(d, {0, 0, 0});
          sdf = length(o) + std::min(std::max({d.x, d.y, d.z}), 0.0);
        } else {
          const double r = std::min({h.x, h.y, h.z});
          sdf = length(p) - r;
        }
        const double fill = std::clamp(0.5 - sdf / voxel, 0.0, 1.0);
        if (fill <= 0.0) continue;
        const double sigma = std::max(softplus(t.density[idx]), inside_density * fill);
        t.density[idx] = static_cast<float>(softplus_inverse(sigma));
        for (int a = 0; a < 3; ++a) q[a] = color_logit[a];
      }
  update_occupancy(t);
  return t;
}

SdsResult sds_pixel_gradient(const Image& image, const GuidanceConfig& cfg, GuidanceProvider& provider,
                             std::mt19937_64& rng, const std::string& prompt, const std::optional<Camera>& camera) {
  std::uniform_int_distribution<int> tdist(cfg.t_min, cfg.t_max);
  ScoreRequest req;
  req.timestep = tdist(rng);
  req.seed = rng();
  req.image = image;
  req.prompt = prompt;
  req.guidance_scale = cfg.guidance_scale;
  req.camera = camera;
  ScoreResponse resp = provider.score(req);
  const Image& g = resp.pixel_gradient;
  if (g.width != image.width || g.height != image.height || g.channels != 3)
    throw Error(Errc::kShapeMismatch, "provider returned " + std::to_string(g.width) + "x" +
                                          std::to_string(g.height) + "x" + std::to_string(g.channels));
  SdsResult out;
  out.timestep = req.timestep;
  out.weight = 1.0 - alpha_bar(req.timestep, cfg);
  out.gradient = std::move(resp.pixel_gradient);
  double sq = 0.0;
  for (auto& v : out.gradient.data) {
    if (!std::isfinite(v)) throw Error(Errc::kNonFinite, "provider returned a non-finite gradient");
    v = static_cast<float>(out.weight * v);
    sq += static_cast<double>(v) * v;
  }
  out.surrogate_loss = out.gradient.data.empty() ? 0.0 : 0.5 * sq / out.gradient.data.size();
  return out;
}

std::string directional_prompt(const std::string& prompt, double azimuth_deg, double elevation_deg) {
  if (elevation_deg > 60.0) return prompt + ", overhead view";
  if (elevation_deg < -30.0) return prompt + ", bottom view";
  double az = std::fmod(azimuth_deg, 360.0);
  if (az > 180.0) az -= 360.0;
  if (az <= -180.0) az += 360.0;
  if (std::abs(az) <= 45.0) return prompt + ", front view";
  if (std::abs(az) <= 135.0) return prompt + ", side view";
  return prompt + ", back view";
}

std::string directional_prompt(const std::string& prompt, const Camera& cam, const Vec3& center) {
  const OrbitAngles a = orbit_angles(cam, center);
  return directional_prompt(prompt, a.azimuth_deg, a.elevation_deg);
}

std::unique_ptr<GuidanceProvider> make_provider(const GuidanceConfig& cfg, const RadianceField& base,
                                                const std::optional<Aabb>& edit_box) {
  cfg.validate();
  if (cfg.provider == "echo") return std::make_unique<EchoProvider>();
  if (cfg.provider == "external") {
    const auto colon = cfg.endpoint.rfind(':');
    if (colon == std::string::npos) throw Error(Errc::kConfigError, "endpoint must be host:port");
    int port = 0;
    try {
      port = std::stoi(cfg.endpoint.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error(Errc::kConfigError, "bad endpoint port in '" + cfg.endpoint + "'");
    }
    return std::make_unique<ExternalProvider>(cfg.endpoint.substr(0, colon), port, cfg.timeout_s);
  }
  const std::optional<Aabb> box = cfg.target_box ? cfg.target_box : edit_box;
  if (!box) throw Error(Errc::kConfigError, "analytic target needs target_box or an edit box");
  return std::make_unique<AnalyticTargetProvider>(
      build_target_field(base, *box, target_shape_from_string(cfg.target), cfg.target_color, cfg.target_tint,
                         cfg.tint_strength),
      cfg.analytic_k, cfg.analytic_noise);
}

}  // namespace skf
