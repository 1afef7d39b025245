// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#include "skf/studio.hpp"

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "skf/editor.hpp"
#include "skf/error.hpp"
#include "skf/io.hpp"
#include "skf/metrics.hpp"

namespace skf {

namespace fs = std::filesystem;
using nlohmann::json;
using FieldPtr = std::shared_ptr<const RadianceField>;

namespace {

struct HttpError {
  int status;
  std::string message;
};

[[noreturn]] void fail(int status, const std::string& message) { throw HttpError{status, message}; }

int status_for(Errc code) {
  switch (code) {
    case Errc::kConfigError:
    case Errc::kParseError:
    case Errc::kEmptySketchSet:
    case Errc::kEmptyIntersection:
    case Errc::kOpenCurve:
    case Errc::kBadMagic:
    case Errc::kVersionMismatch:
    case Errc::kTruncatedFile:
    case Errc::kChecksumMismatch: return 400;
    default: return 500;
  }
}

void send_json(httplib::Response& res, const json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json j = json::parse(req.body, nullptr, false);
  if (j.is_discarded()) fail(400, "body is not valid JSON");
  return j;
}

Camera parse_camera(const json& j) {
  try {
    Camera cam = camera_from_json(j);
    cam.validate();
    if (cam.width < 1 || cam.height < 1 || cam.width > 1024 || cam.height > 1024)
      fail(400, "camera size must be within 1..1024");
    return cam;
  } catch (const Error& e) {
    fail(400, std::string("bad camera: ") + e.what());
  } catch (const json::exception& e) {
    fail(400, std::string("bad camera: ") + e.what());
  }
}

json aabb_json(const Aabb& b) {
  json corners = json::array();
  for (const Vec3& c : b.corners()) corners.push_back({c.x, c.y, c.z});
  return {{"min", {b.min.x, b.min.y, b.min.z}}, {"max", {b.max.x, b.max.y, b.max.z}}, {"corners", corners}};
}

std::vector<Polyline> strokes_from_json(const json& j) {
  if (!j.is_array()) fail(400, "strokes must be an array");
  auto polyline = [](const json& a) {
    Polyline p;
    for (const auto& pt : a) {
      if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number())
        fail(400, "stroke points must be [x, y]");
      p.push_back({pt[0].get<double>(), pt[1].get<double>()});
    }
    return p;
  };
  std::vector<Polyline> out;
  if (!j.empty() && j[0].is_array() && !j[0].empty() && j[0][0].is_number())
    out.push_back(polyline(j));
  else
    for (const auto& s : j) out.push_back(polyline(s));
  return out;
}

std::string losses_event(const LossRecord& r, const std::string& preview_url) {
  json e = {{"iteration", r.iteration + 1},
            {"losses",
             {{"sds", r.l_sds}, {"pres", r.l_pres}, {"sil", r.l_sil}, {"sp", r.l_sp}, {"total", r.l_total}}},
            {"lr", r.lr}};
  if (!preview_url.empty()) e["preview_url"] = preview_url;
  return e.dump();
}

}  // namespace

struct Job {
  std::string id, session;
  std::atomic<bool> cancel{false};
  std::mutex mu;
  std::condition_variable cv;
  std::vector<std::string> events;  // JSON payloads, in order
  std::string status = "created";   // created -> running -> done | failed | cancelled
  int iteration = 0;
  std::vector<uint8_t> preview;
  std::thread thread;

  bool terminal() const { return status == "done" || status == "failed" || status == "cancelled"; }
  void push(std::string event) {
    {
      std::lock_guard lock(mu);
      events.push_back(std::move(event));
    }
    cv.notify_all();
  }
};

struct Session {
  std::string id;
  FieldPtr base;
  FieldPtr edited;  // null until a job finishes or a carve
  std::vector<SketchView> sketches;
  std::string running_job;
  std::vector<std::string> jobs;

  FieldPtr current() const { return edited ? edited : base; }
};

struct Studio::Impl {
  StudioOptions opts;
  httplib::Server server;
  std::mutex mu;
  std::map<std::string, Session> sessions;
  std::map<std::string, std::shared_ptr<Job>> jobs;
  uint64_t next_session = 1, next_job = 1;

  explicit Impl(StudioOptions o) : opts(std::move(o)) {
    load_state();
    routes();
  }

  ~Impl() {
    std::vector<std::shared_ptr<Job>> all;
    {
      std::lock_guard lock(mu);
      for (auto& [id, j] : jobs) all.push_back(j);
    }
    for (auto& j : all) j->cancel = true;
    for (auto& j : all)
      if (j->thread.joinable()) j->thread.join();
  }

  // Caller holds mu.
  Session& session_locked(const std::string& id) {
    auto it = sessions.find(id);
    if (it == sessions.end()) fail(404, "unknown session " + id);
    return it->second;
  }

  std::shared_ptr<Job> job(const std::string& id) {
    std::lock_guard lock(mu);
    auto it = jobs.find(id);
    if (it == jobs.end()) fail(404, "unknown job " + id);
    return it->second;
  }

  std::string add_session(FieldPtr base) {
    std::lock_guard lock(mu);
    std::string id = "s" + std::to_string(next_session++);
    while (sessions.count(id)) id = "s" + std::to_string(next_session++);
    Session& s = sessions[id];
    s.id = id;
    s.base = std::move(base);
    persist_locked(s);
    return id;
  }

  // ---- persistence ---------------------------------------------------------

  void persist_locked(const Session& s) {
    if (opts.state_dir.empty()) return;
    const fs::path dir = fs::path(opts.state_dir) / s.id;
    fs::create_directories(dir);
    save_field(*s.base, (dir / "base.skfd").string());
    if (s.edited)
      save_field(*s.edited, (dir / "edited.skfd").string());
    else
      fs::remove(dir / "edited.skfd");
    fs::remove_all(dir / "sketches");
    if (!s.sketches.empty()) save_sketch_package((dir / "sketches").string(), {s.sketches, std::nullopt}, 0.05, 2);
  }

  void load_state() {
    if (opts.state_dir.empty()) return;
    fs::create_directories(opts.state_dir);
    for (const auto& e : fs::directory_iterator(opts.state_dir)) {
      const fs::path base = e.path() / "base.skfd";
      if (!e.is_directory() || !fs::exists(base)) continue;
      Session s;
      s.id = e.path().filename().string();
      s.base = std::make_shared<const RadianceField>(load_field(base.string()));
      if (fs::exists(e.path() / "edited.skfd"))
        s.edited = std::make_shared<const RadianceField>(load_field((e.path() / "edited.skfd").string()));
      if (fs::exists(e.path() / "sketches")) s.sketches = load_sketch_package((e.path() / "sketches").string()).set.views;
      sessions[s.id] = std::move(s);
    }
  }

  // ---- handlers ------------------------------------------------------------

  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  static httplib::Server::Handler guard(Handler fn) {
    return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const HttpError& e) {
        send_json(res, {{"error", e.message}}, e.status);
      } catch (const Error& e) {
        send_json(res, {{"error", e.what()}, {"code", errc_name(e.code())}}, status_for(e.code()));
      } catch (const json::exception& e) {
        send_json(res, {{"error", e.what()}}, 400);
      } catch (const std::exception& e) {
        send_json(res, {{"error", e.what()}}, 500);
      }
    };
  }

  void create_session(const httplib::Request& req, httplib::Response& res) {
    FieldPtr base;
    if (req.get_header_value("Content-Type") == "application/octet-stream") {
      const auto* p = reinterpret_cast<const uint8_t*>(req.body.data());
      base = std::make_shared<const RadianceField>(deserialize_field({p, req.body.size()}));
    } else {
      const json j = parse_body(req);
      if (j.contains("path")) {
        base = std::make_shared<const RadianceField>(load_field(j["path"].get<std::string>()));
      } else {
        const int r = j.value("res", 64);
        if (r < 2 || r > 256) fail(400, "res must be within 2..256");
        base = std::make_shared<const RadianceField>(
            synth_scene(scene_kind_from_string(j.value("synth", std::string("sphere"))), {r, r, r},
                        {{-1, -1, -1}, {1, 1, 1}}));
      }
    }
    send_json(res, {{"id", add_session(std::move(base))}}, 201);
  }

  json session_json_locked(const Session& s) {
    json j = {{"id", s.id},
              {"sketches", s.sketches.size()},
              {"has_edit", static_cast<bool>(s.edited)},
              {"running_job", s.running_job.empty() ? json(nullptr) : json(s.running_job)},
              {"jobs", s.jobs},
              {"base_hash", field_hash(*s.base)}};
    return j;
  }

  void render(const httplib::Request& req, httplib::Response& res) {
    FieldPtr field;
    {
      std::lock_guard lock(mu);
      const Session& s = session_locked(req.matches[1]);
      field = req.get_param_value("field") == "base" ? s.base : s.current();
    }
    json cam_json;
    if (req.has_param("camera")) {
      cam_json = json::parse(req.get_param_value("camera"), nullptr, false);
      if (cam_json.is_discarded()) fail(400, "camera is not valid JSON");
    } else {
      cam_json = parse_body(req).value("camera", json());
    }
    if (cam_json.is_null()) fail(400, "camera is required");
    const Camera cam = parse_camera(cam_json);
    const std::string channel = req.has_param("channel") ? req.get_param_value("channel") : "rgb";
    const RenderOutput out = render_view(*field, cam);
    const Image* img = nullptr;
    if (channel == "rgb") img = &out.rgb;
    else if (channel == "alpha") img = &out.alpha;
    if (!img) fail(400, "channel must be rgb or alpha");
    const std::vector<uint8_t> png = encode_png(*img);
    res.set_content(std::string(png.begin(), png.end()), "image/png");
  }

  void add_sketch(const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    if (!body.contains("camera")) fail(400, "camera is required");
    const Camera cam = parse_camera(body["camera"]);
    FillResult fill;
    if (body.contains("strokes")) {
      fill = fill_scribble(strokes_from_json(body["strokes"]), cam.width, cam.height);
    } else if (body.contains("mask_png")) {
      const Mask m = mask_from_image(decode_png(base64_decode(body["mask_png"].get<std::string>())));
      if (m.width != cam.width || m.height != cam.height) fail(400, "mask size does not match the camera");
      fill = fill_scribble(m);
    } else {
      fail(400, "give strokes or mask_png");
    }
    if (fill.mask.count() == 0) fail(400, "sketch is empty");

    json out;
    {
      std::lock_guard lock(mu);
      Session& s = session_locked(req.matches[1]);
      s.sketches.emplace_back(cam, fill.mask);
      out["index"] = s.sketches.size() - 1;
      out["edit_bbox"] = bbox_json_locked(s);
      persist_locked(s);
    }
    out["mask_png"] = base64_encode(encode_png(mask_image(fill.mask)));
    if (fill.open_curve) out["warning"] = "open_curve";
    send_json(res, out);
  }

  static Image mask_image(const Mask& m) {
    Image img(m.width, m.height, 1);
    for (size_t i = 0; i < m.data.size(); ++i) img.data[i] = m.data[i] ? 1.0f : 0.0f;
    return img;
  }

  json bbox_json_locked(const Session& s) {
    if (s.sketches.empty()) return nullptr;
    try {
      return aabb_json(compute_edit_bbox(s.sketches, s.base->bbox, s.base->occupancy.res()));
    } catch (const Error&) {
      return nullptr;
    }
  }

  void list_sketches(const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mu);
    const Session& s = session_locked(req.matches[1]);
    json views = json::array();
    for (const auto& v : s.sketches)
      views.push_back({{"camera", camera_to_json(v.camera())},
                       {"mask_png", base64_encode(encode_png(mask_image(v.mask())))}});
    send_json(res, {{"views", views}, {"edit_bbox", bbox_json_locked(s)}});
  }

  void delete_sketch(const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mu);
    Session& s = session_locked(req.matches[1]);
    if (req.matches.size() > 2 && req.matches[2].matched) {
      const size_t i = std::stoul(req.matches[2]);
      if (i >= s.sketches.size()) fail(404, "no sketch " + std::to_string(i));
      s.sketches.erase(s.sketches.begin() + static_cast<long>(i));
    } else {
      s.sketches.clear();
    }
    persist_locked(s);
    send_json(res, {{"sketches", s.sketches.size()}, {"edit_bbox", bbox_json_locked(s)}});
  }

  void start_edit(const httplib::Request& req, httplib::Response& res) {
    json ej = to_json(EditConfig{}), gj = to_json(GuidanceConfig{});
    split_config_json(parse_body(req), ej, gj);
    scale_default_warmup(ej);
    const EditConfig cfg = edit_config_from_json(ej);
    const GuidanceConfig gcfg = guidance_config_from_json(gj);

    std::lock_guard lock(mu);
    Session& s = session_locked(req.matches[1]);
    if (!s.running_job.empty()) fail(409, "job " + s.running_job + " is still running");
    if (s.sketches.empty()) fail(400, "session has no sketches");
    SketchSet set{s.sketches, std::nullopt};
    bind_edit_bbox(set, *s.base);

    auto j = std::make_shared<Job>();
    j->id = "j" + std::to_string(next_job++);
    j->session = s.id;
    j->status = "running";
    s.running_job = j->id;
    s.jobs.push_back(j->id);
    jobs[j->id] = j;
    const Camera preview_cam = s.sketches.front().camera().with_resolution(opts.preview_size, opts.preview_size);
    j->thread = std::thread([this, j, base = s.base, set, cfg, gcfg, preview_cam] {
      run_job(j, base, set, cfg, gcfg, preview_cam);
    });

    json out = {{"job", j->id}, {"events_url", "/api/v1/job/" + j->id + "/events"}};
    if (s.sketches.size() < 2) out["warning"] = "fewer than two sketches";
    send_json(res, out, 202);
  }

  void run_job(const std::shared_ptr<Job>& j, FieldPtr base, SketchSet set, EditConfig cfg, GuidanceConfig gcfg,
               Camera preview_cam) {
    std::string status = "done", error;
    FieldPtr result;
    try {
      auto provider = make_provider(gcfg, *base, set.edit_bbox);
      EditHooks hooks;
      hooks.cancel = &j->cancel;
      const int every = std::max(1, opts.preview_every);
      hooks.on_step = [&](const EditJob& job, const LossRecord& r) {
        const int it = r.iteration + 1;
        {
          std::lock_guard lock(j->mu);
          j->iteration = it;
        }
        if (it % every != 0 && it != cfg.iterations) return;
        const std::vector<uint8_t> png = encode_png(render_view(job.edited, preview_cam).rgb);
        {
          std::lock_guard lock(j->mu);
          j->preview = png;
        }
        j->push(losses_event(r, "/api/v1/job/" + j->id + "/preview.png?iteration=" + std::to_string(it)));
      };
      result = std::make_shared<const RadianceField>(edit(*base, set, cfg, gcfg, *provider, hooks));
    } catch (const Error& e) {
      status = e.code() == Errc::kCancelled ? "cancelled" : "failed";
      if (status == "failed") error = e.what();
    } catch (const std::exception& e) {
      status = "failed";
      error = e.what();
    }
    {
      std::lock_guard lock(mu);
      Session& s = sessions[j->session];
      if (result) s.edited = result;
      s.running_job.clear();
      try {
        persist_locked(s);
      } catch (const std::exception&) {
      }
    }
    json term = {{"status", status}, {"iteration", j->iteration}};
    if (!error.empty()) term["error"] = error;
    {
      std::lock_guard lock(j->mu);
      j->events.push_back(term.dump());
      j->status = status;
    }
    j->cv.notify_all();
  }

  void events(const httplib::Request& req, httplib::Response& res) {
    auto j = job(req.matches[1]);
    auto next = std::make_shared<size_t>(0);
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider("text/event-stream", [j, next](size_t, httplib::DataSink& sink) {
      std::unique_lock lock(j->mu);
      j->cv.wait_for(lock, std::chrono::milliseconds(250), [&] { return *next < j->events.size() || j->terminal(); });
      std::vector<std::string> batch(j->events.begin() + static_cast<long>(*next), j->events.end());
      *next = j->events.size();
      const bool finished = j->terminal();
      lock.unlock();
      for (const auto& e : batch) {
        const std::string frame = "data: " + e + "\n\n";
        if (!sink.write(frame.data(), frame.size())) return false;
      }
      if (finished) sink.done();
      return true;
    });
  }

  void job_status(const httplib::Request& req, httplib::Response& res) {
    auto j = job(req.matches[1]);
    std::lock_guard lock(j->mu);
    send_json(res, {{"id", j->id}, {"session", j->session}, {"status", j->status}, {"iteration", j->iteration}});
  }

  void preview(const httplib::Request& req, httplib::Response& res) {
    auto j = job(req.matches[1]);
    std::lock_guard lock(j->mu);
    if (j->preview.empty()) fail(404, "no preview yet");
    res.set_content(std::string(j->preview.begin(), j->preview.end()), "image/png");
  }

  void cancel(const httplib::Request& req, httplib::Response& res) {
    auto j = job(req.matches[1]);
    j->cancel = true;
    std::lock_guard lock(j->mu);
    send_json(res, {{"id", j->id}, {"status", j->status}}, 202);
  }

  void carve_session(const httplib::Request& req, httplib::Response& res) {
    FieldPtr current;
    SketchSet set;
    std::string id = req.matches[1];
    {
      std::lock_guard lock(mu);
      Session& s = session_locked(id);
      if (!s.running_job.empty()) fail(409, "job " + s.running_job + " is still running");
      if (s.sketches.empty()) fail(400, "session has no sketches");
      current = s.current();
      set.views = s.sketches;
    }
    RadianceField carved = *current;
    carve(carved, set);
    std::lock_guard lock(mu);
    Session& s = session_locked(id);
    if (!s.running_job.empty()) fail(409, "job " + s.running_job + " is still running");
    s.edited = std::make_shared<const RadianceField>(std::move(carved));
    persist_locked(s);
    send_json(res, {{"status", "carved"}, {"field_hash", field_hash(*s.edited)}});
  }

  void eval(const httplib::Request& req, httplib::Response& res) {
    FieldPtr base, current;
    SketchSet set;
    {
      std::lock_guard lock(mu);
      const Session& s = session_locked(req.matches[1]);
      if (s.sketches.empty()) fail(400, "session has no sketches");
      base = s.base;
      current = s.current();
      set.views = s.sketches;
    }
    send_json(res, evaluate(*base, *current, set).to_json());
  }

  void download(const httplib::Request& req, httplib::Response& res) {
    FieldPtr field;
    {
      std::lock_guard lock(mu);
      const Session& s = session_locked(req.matches[1]);
      field = req.get_param_value("field") == "base" ? s.base : s.current();
    }
    const std::vector<uint8_t> bytes = serialize_field(*field);
    res.set_header("Content-Disposition", "attachment; filename=\"field.skfd\"");
    res.set_content(std::string(bytes.begin(), bytes.end()), "application/octet-stream");
  }

  // Promotes the edited field to the session base and clears the sketches.
  void use_as_base(const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mu);
    Session& s = session_locked(req.matches[1]);
    if (!s.running_job.empty()) fail(409, "job " + s.running_job + " is still running");
    if (!s.edited) fail(400, "session has no edited field");
    s.base = std::move(s.edited);
    s.edited.reset();
    s.sketches.clear();
    persist_locked(s);
    send_json(res, session_json_locked(s));
  }

  void routes() {
    const std::string S = R"(/api/v1/session/([A-Za-z0-9_-]+))";
    const std::string J = R"(/api/v1/job/([A-Za-z0-9_-]+))";
    auto bind = [this](void (Impl::*m)(const httplib::Request&, httplib::Response&)) {
      return guard([this, m](const httplib::Request& q, httplib::Response& r) { (this->*m)(q, r); });
    };
    server.Post("/api/v1/session", bind(&Impl::create_session));
    server.Get("/api/v1/sessions", guard([this](const httplib::Request&, httplib::Response& res) {
                 std::lock_guard lock(mu);
                 json out = json::array();
                 for (const auto& [id, s] : sessions) out.push_back(session_json_locked(s));
                 send_json(res, out);
               }));
    server.Get(S, guard([this](const httplib::Request& req, httplib::Response& res) {
                 std::lock_guard lock(mu);
                 send_json(res, session_json_locked(session_locked(req.matches[1])));
               }));
    server.Get(S + "/render", bind(&Impl::render));
    server.Post(S + "/render", bind(&Impl::render));
    server.Get(S + "/sketch", bind(&Impl::list_sketches));
    server.Post(S + "/sketch", bind(&Impl::add_sketch));
    server.Delete(S + "/sketch", bind(&Impl::delete_sketch));
    server.Delete(S + R"(/sketch/(\d+))", bind(&Impl::delete_sketch));
    server.Post(S + "/edit", bind(&Impl::start_edit));
    server.Post(S + "/carve", bind(&Impl::carve_session));
    server.Get(S + "/eval", bind(&Impl::eval));
    server.Get(S + "/field.skfd", bind(&Impl::download));
    server.Post(S + "/use-as-base", bind(&Impl::use_as_base));
    server.Get(J, bind(&Impl::job_status));
    server.Get(J + "/events", bind(&Impl::events));
    server.Get(J + "/preview.png", bind(&Impl::preview));
    server.Post(J + "/cancel", bind(&Impl::cancel));
    if (!opts.static_dir.empty() && !server.set_mount_point("/", opts.static_dir))
      throw Error(Errc::kIoError, "static directory " + opts.static_dir + " does not exist");
  }
};

Studio::Studio(StudioOptions opts) : impl_(std::make_unique<Impl>(std::move(opts))) {}
Studio::~Studio() {
  stop();
}

int Studio::bind() {
  auto& o = impl_->opts;
  if (o.port == 0) {
    o.port = impl_->server.bind_to_any_port(o.host);
    if (o.port < 0) throw Error(Errc::kIoError, "cannot bind " + o.host);
  } else if (!impl_->server.bind_to_port(o.host, o.port)) {
    throw Error(Errc::kIoError, "cannot bind " + o.host + ":" + std::to_string(o.port));
  }
  return o.port;
}

void Studio::run() { impl_->server.listen_after_bind(); }
void Studio::stop() { impl_->server.stop(); }

std::string Studio::add_session(RadianceField base) {
  return impl_->add_session(std::make_shared<const RadianceField>(std::move(base)));
}

}  // namespace skf
