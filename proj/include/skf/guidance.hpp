// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "skf/camera.hpp"
#include "skf/field.hpp"
#include "skf/image.hpp"
#include "skf/render.hpp"

namespace skf {

enum class NoiseSchedule { kCosine, kLinear };

struct GuidanceConfig {
  std::string prompt;
  double guidance_scale = 100.0;
  int t_min = 20;
  int t_max = 980;
  int schedule_steps = 1000;
  NoiseSchedule schedule = NoiseSchedule::kCosine;
  bool directional_prompts = true;

  // Provider selection: "echo", "analytic" or "external".
  std::string provider = "analytic";
  std::string endpoint = "127.0.0.1:7860";  // external only
  double timeout_s = 30.0;

  // Analytic provider. The target is the base field with `target_box` filled
  // by a solid of `target_color`, and every other color blended toward
  // `target_tint` by `tint_strength`.
  std::string target = "cube";
  std::optional<Aabb> target_box;  // defaults to the edit box
  Vec3 target_color{0.2, 0.75, 0.3};
  Vec3 target_tint{0.3, 0.35, 0.9};
  double tint_strength = 0.5;
  double analytic_k = 3e-6;
  double analytic_noise = 0.1;  // std of the residual noise, relative to k

  void validate() const;
};

nlohmann::json to_json(const GuidanceConfig& c);
// Unknown keys raise Errc::kConfigError. Missing keys keep `base` values.
GuidanceConfig guidance_config_from_json(const nlohmann::json& j, GuidanceConfig base = {});

// Cumulative signal fraction alpha_bar_t, monotone decreasing in t.
double alpha_bar(int t, const GuidanceConfig& cfg);

struct ScoreRequest {
  Image image;  // H x W x 3 in [0,1]
  std::string prompt;
  int timestep = 0;
  double guidance_scale = 100.0;
  uint64_t seed = 0;
  // Lets view-dependent providers (the analytic one) know the pose.
  std::optional<Camera> camera;
};

struct ScoreResponse {
  Image pixel_gradient;  // H x W x 3, the residual eps_hat - eps
  std::string provider_info;
};

class GuidanceProvider {
 public:
  virtual ~GuidanceProvider() = default;
  virtual ScoreResponse score(const ScoreRequest& req) = 0;
  virtual std::string name() const = 0;
};

// eps_hat = eps: zero residual.
class EchoProvider final : public GuidanceProvider {
 public:
  ScoreResponse score(const ScoreRequest& req) override;
  std::string name() const override { return "echo"; }
};

// Standard normal noise for a request, drawn from its seed.
std::vector<float> request_noise(uint64_t seed, size_t n);

// Residual k * (image - target(view)) + k * noise * xi, with the target
// rendered from the request camera.
class AnalyticTargetProvider final : public GuidanceProvider {
 public:
  AnalyticTargetProvider(RadianceField target, double k, double noise, RenderSettings settings = {});
  ScoreResponse score(const ScoreRequest& req) override;
  std::string name() const override { return "analytic"; }
  const RadianceField& target() const { return target_; }
  Image target_image(const Camera& cam) const;

 private:
  RadianceField target_;
  double k_;
  double noise_;
  RenderSettings settings_;
};

enum class TargetShape { kCube, kSphere };
TargetShape target_shape_from_string(const std::string& s);

// Base field with a solid placed in `box` and remaining colors tinted.
RadianceField build_target_field(const RadianceField& base, const Aabb& box, TargetShape shape,
                                 const Vec3& color, const Vec3& tint, double tint_strength,
                                 double inside_density = 50.0);

struct SdsResult {
  Image gradient;  // H x W x 3
  int timestep = 0;
  double weight = 0.0;  // 1 - alpha_bar_t
  double surrogate_loss = 0.0;
};

// One guidance evaluation: draws t and a noise seed from `rng`, queries the
// provider and scales the residual by 1 - alpha_bar_t. Throws
// Errc::kShapeMismatch and Errc::kNonFinite on a bad response.
SdsResult sds_pixel_gradient(const Image& image, const GuidanceConfig& cfg, GuidanceProvider& provider,
                             std::mt19937_64& rng, const std::string& prompt,
                             const std::optional<Camera>& camera = std::nullopt);

// Appends ", front view" etc. from the camera's orbit angles around `center`.
std::string directional_prompt(const std::string& prompt, const Camera& cam, const Vec3& center = {});
std::string directional_prompt(const std::string& prompt, double azimuth_deg, double elevation_deg);

// ---- Wire protocol -------------------------------------------------------

inline constexpr char kWireMagic[4] = {'S', 'K', 'G', '1'};
inline constexpr int kWireVersion = 1;
inline constexpr uint32_t kMaxHeaderBytes = 1u << 20;

struct Frame {
  nlohmann::json header;
  std::vector<float> payload;
};

// Header fields "h" and "w" (when present) fix the payload at h*w*3 floats.
std::vector<uint8_t> encode_frame(const Frame& f);
// Throws Errc::kMalformedFrame on any inconsistency.
Frame decode_frame(std::span<const uint8_t> bytes);

Frame score_request_frame(const ScoreRequest& req);
ScoreRequest score_request_from_frame(const Frame& f);
Frame score_response_frame(const ScoreResponse& resp);

// Blocking socket with deadline-based reads.
class WireConnection {
 public:
  explicit WireConnection(int fd) : fd_(fd) {}
  ~WireConnection();
  WireConnection(const WireConnection&) = delete;
  WireConnection& operator=(const WireConnection&) = delete;

  static std::unique_ptr<WireConnection> connect_to(const std::string& host, int port, double timeout_s);

  void send_bytes(std::span<const uint8_t> b);
  void send_magic() { send_bytes({reinterpret_cast<const uint8_t*>(kWireMagic), 4}); }
  void expect_magic(double timeout_s);
  void send_frame(const Frame& f);
  Frame recv_frame(double timeout_s);
  int fd() const { return fd_; }

 private:
  void recv_exact(uint8_t* dst, size_t n, double timeout_s);
  int fd_;
};

// Client for a guidance service speaking the wire protocol. Requests are
// serialized; a timed-out request is retried once on a fresh connection.
class ExternalProvider final : public GuidanceProvider {
 public:
  ExternalProvider(std::string host, int port, double timeout_s);
  ScoreResponse score(const ScoreRequest& req) override;
  std::string name() const override { return "external"; }

 private:
  ScoreResponse attempt(const ScoreRequest& req);
  std::string host_;
  int port_;
  double timeout_s_;
  std::mutex mu_;
  std::unique_ptr<WireConnection> conn_;
};

// Loopback server answering score requests with `handler`. Port 0 binds an
// ephemeral port.
class GuidanceServer {
 public:
  using Handler = std::function<ScoreResponse(const ScoreRequest&)>;
  GuidanceServer(Handler handler, int port = 0, int version = kWireVersion);
  ~GuidanceServer();
  int port() const { return port_; }
  void stop();

 private:
  void serve();
  void serve_connection(int fd);
  Handler handler_;
  int version_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stop_{false};
  std::thread thread_;
};

std::unique_ptr<GuidanceProvider> make_provider(const GuidanceConfig& cfg, const RadianceField& base,
                                                const std::optional<Aabb>& edit_box);

}  // namespace skf
