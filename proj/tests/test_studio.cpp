// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "skf/io.hpp"
#include "skf/sketch.hpp"
#include "skf/studio.hpp"

using namespace skf;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "skf_test_studio" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

struct Server {
  Studio studio;
  int port;
  std::thread thread;
  explicit Server(StudioOptions o) : studio(with_free_port(std::move(o))), port(studio.bind()) {
    thread = std::thread([this] { studio.run(); });
  }
  ~Server() {
    studio.stop();
    thread.join();
  }
  static StudioOptions with_free_port(StudioOptions o) {
    o.port = 0;
    o.preview_every = 4;
    o.preview_size = 32;
    return o;
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(60, 0);
    return c;
  }
};

Camera view_camera(double az) { return orbit_camera(az, 0, 3, {0, 0.6, 0}, 24, 24); }

json square_sketch(double az) {
  return {{"camera", camera_to_json(view_camera(az))}, {"strokes", {{9, 8}, {15, 8}, {15, 13}, {9, 13}, {9, 8}}}};
}

json post(httplib::Client& c, const std::string& path, const json& body, int expect) {
  auto r = c.Post(path, body.dump(), "application/json");
  REQUIRE(r);
  CHECK(r->status == expect);
  return json::parse(r->body, nullptr, false);
}

std::string new_session(httplib::Client& c, int res = 16) {
  return post(c, "/api/v1/session", {{"synth", "sphere"}, {"res", res}}, 201)["id"];
}

// Reads a job's event stream to the end.
std::vector<json> read_events(httplib::Client& c, const std::string& job,
                              const std::function<void(const json&)>& on_event = {}) {
  std::string buf;
  std::vector<json> events;
  auto r = c.Get("/api/v1/job/" + job + "/events", [&](const char* data, size_t n) {
    buf.append(data, n);
    size_t end;
    while ((end = buf.find("\n\n")) != std::string::npos) {
      const std::string frame = buf.substr(0, end);
      buf.erase(0, end + 2);
      REQUIRE(frame.rfind("data: ", 0) == 0);
      events.push_back(json::parse(frame.substr(6)));
      if (on_event) on_event(events.back());
    }
    return true;
  });
  REQUIRE(r);
  CHECK(r->status == 200);
  return events;
}

const json kQuickJob = {{"edit", {{"iterations", 12}, {"rays_per_iter", 64}, {"prune_period", 2}}},
                        {"guidance", {{"provider", "echo"}}}};

double mean_alpha_in_mask(const Image& alpha, const Mask& m) {
  double s = 0;
  size_t n = 0;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      if (m.at(x, y)) s += alpha.at(x, y), ++n;
  return s / n;
}

}  // namespace

TEST_CASE("studio render endpoint") {
  Server srv({});
  auto c = srv.client();
  const std::string id = new_session(c);
  const std::string cam = camera_to_json(view_camera(30)).dump();
  const std::string path = "/api/v1/session/" + id + "/render?camera=" + httplib::detail::encode_url(cam);
  auto a = c.Get(path), b = c.Get(path);
  REQUIRE(a);
  REQUIRE(b);
  CHECK(a->status == 200);
  CHECK(a->get_header_value("Content-Type") == "image/png");
  CHECK(a->body == b->body);
  const Image img = decode_png({a->body.begin(), a->body.end()});
  CHECK(img.width == 24);

  json bad = camera_to_json(view_camera(30));
  bad["pose_world_from_camera"][0] = 3.0;
  CHECK(c.Get("/api/v1/session/" + id + "/render?camera=" + httplib::detail::encode_url(bad.dump()))->status == 400);
  CHECK(c.Get("/api/v1/session/" + id + "/render?camera=%7Bnope")->status == 400);
  CHECK(c.Get("/api/v1/session/" + id + "/render")->status == 400);
  CHECK(c.Get("/api/v1/session/nope/render?camera=" + httplib::detail::encode_url(cam))->status == 404);
  const auto alpha = c.Get(path + "&channel=alpha");
  CHECK(decode_png({alpha->body.begin(), alpha->body.end()}).channels == 1);
}

TEST_CASE("studio sketches") {
  Server srv({});
  auto c = srv.client();
  const std::string id = new_session(c);
  const std::string base = "/api/v1/session/" + id;

  const json first = post(c, base + "/sketch", square_sketch(0), 200);
  CHECK(first["index"] == 0);
  CHECK_FALSE(first.contains("warning"));
  const auto bytes = base64_decode(first["mask_png"].get<std::string>());
  const Mask m = mask_from_image(decode_png(bytes));
  CHECK(m.at(12, 10));
  CHECK_FALSE(m.at(2, 2));

  const json second = post(c, base + "/sketch", square_sketch(90), 200);
  CHECK(second["index"] == 1);
  REQUIRE(second["edit_bbox"].is_object());
  // Both frusta pass through the orbit target; intersecting them shrinks the box.
  auto volume = [](const json& b) {
    double v = 1;
    for (int i = 0; i < 3; ++i) v *= b["max"][i].get<double>() - b["min"][i].get<double>();
    return v;
  };
  const json& box = second["edit_bbox"];
  for (int i = 0; i < 3; ++i) {
    const double t = i == 1 ? 0.6 : 0.0;
    CHECK(box["min"][i].get<double>() <= t);
    CHECK(box["max"][i].get<double>() >= t);
  }
  CHECK(volume(box) < volume(first["edit_bbox"]));
  CHECK(box["corners"].size() == 8);

  json open = square_sketch(45);
  open["strokes"] = {{2, 2}, {20, 3}};
  const json warned = post(c, base + "/sketch", open, 200);
  CHECK(warned["warning"] == "open_curve");
  CHECK(warned["index"] == 2);

  CHECK(c.Delete(base + "/sketch/7")->status == 404);
  CHECK(c.Delete(base + "/sketch/2")->status == 200);
  const auto listed = json::parse(c.Get(base + "/sketch")->body);
  CHECK(listed["views"].size() == 2);
  CHECK(camera_from_json(listed["views"][1]["camera"]) == view_camera(90));

  post(c, base + "/sketch", {{"camera", camera_to_json(view_camera(0))}}, 400);
  post(c, base + "/sketch", {{"strokes", {{1, 1}}}}, 400);
}

TEST_CASE("studio edit jobs") {
  Server srv({});
  auto c = srv.client();
  const std::string id = new_session(c);
  const std::string base = "/api/v1/session/" + id;
  const std::string base_hash = json::parse(c.Get(base)->body)["base_hash"];

  post(c, base + "/edit", kQuickJob, 400);  // no sketches yet
  post(c, base + "/sketch", square_sketch(0), 200);
  const json one = post(c, base + "/edit", kQuickJob, 202);
  CHECK(one["warning"] == "fewer than two sketches");
  read_events(c, one["job"]);
  post(c, base + "/sketch", square_sketch(90), 200);

  SUBCASE("progress events and completion") {
    const json started = post(c, base + "/edit", kQuickJob, 202);
    const std::string job = started["job"];
    CHECK_FALSE(started.contains("warning"));
    const auto events = read_events(c, job);
    REQUIRE(events.size() == 4);
    for (int i = 0; i < 3; ++i) {
      CHECK(events[i]["iteration"] == 4 * (i + 1));
      CHECK(events[i]["losses"].contains("sil"));
      const auto png = c.Get(events[i]["preview_url"].get<std::string>());
      CHECK(png->status == 200);
      CHECK(decode_png({png->body.begin(), png->body.end()}).width == 32);
    }
    CHECK(events.back()["status"] == "done");
    CHECK(json::parse(c.Get("/api/v1/job/" + job)->body)["status"] == "done");

    const auto edited = c.Get(base + "/field.skfd");
    const RadianceField f = deserialize_field({reinterpret_cast<const uint8_t*>(edited->body.data()),
                                               edited->body.size()});
    CHECK(f.metadata["edits"].size() == 1);
    const auto kept = c.Get(base + "/field.skfd?field=base");
    CHECK(field_hash(deserialize_field({reinterpret_cast<const uint8_t*>(kept->body.data()), kept->body.size()})) ==
          base_hash);

    const json report = json::parse(c.Get(base + "/eval")->body);
    for (const char* key : {"psnr", "ios", "ssim", "views"}) CHECK(report.contains(key));

    // Progressive editing: the edited field becomes the next base.
    const json promoted = post(c, base + "/use-as-base", json::object(), 200);
    CHECK(promoted["base_hash"] != base_hash);
    CHECK(promoted["sketches"] == 0);
    post(c, base + "/edit", kQuickJob, 400);
    post(c, base + "/sketch", square_sketch(0), 200);
    post(c, base + "/sketch", square_sketch(90), 200);
    const std::string job2 = post(c, base + "/edit", kQuickJob, 202)["job"];
    CHECK(read_events(c, job2).back()["status"] == "done");
    const auto chained = c.Get(base + "/field.skfd");
    CHECK(deserialize_field({reinterpret_cast<const uint8_t*>(chained->body.data()), chained->body.size()})
              .metadata["edits"]
              .size() == 2);
  }

  SUBCASE("concurrent start, carve lock and cancel") {
    const std::string before = c.Get(base + "/field.skfd")->body;
    json long_job = kQuickJob;
    long_job["edit"]["iterations"] = 100000;
    const std::string job = post(c, base + "/edit", long_job, 202)["job"];
    post(c, base + "/edit", kQuickJob, 409);
    post(c, base + "/carve", json::object(), 409);
    // Renders of the frozen base stay available while the job runs.
    const std::string cam = camera_to_json(view_camera(0)).dump();
    CHECK(c.Get(base + "/render?camera=" + httplib::detail::encode_url(cam))->status == 200);
    auto control = srv.client();
    const auto events = read_events(c, job, [&](const json& e) {
      if (e.contains("iteration") && !e.contains("status")) post(control, "/api/v1/job/" + job + "/cancel", {}, 202);
    });
    CHECK(events.back()["status"] == "cancelled");
    CHECK(c.Get(base + "/field.skfd")->body == before);
  }

  CHECK(c.Get("/api/v1/job/nope/events")->status == 404);
  CHECK(c.Post("/api/v1/job/nope/cancel")->status == 404);
}

TEST_CASE("studio carve empties the sketched region") {
  Server srv({});
  auto c = srv.client();
  const std::string id = new_session(c, 24);
  const std::string base = "/api/v1/session/" + id;
  // Squares wide enough that their visual hull contains the whole sphere.
  for (double az : {0.0, 90.0}) {
    const json s = {{"camera", camera_to_json(orbit_camera(az, 0, 3, {0, 0, 0}, 24, 24))},
                    {"strokes", {{3, 3}, {21, 3}, {21, 21}, {3, 21}, {3, 3}}}};
    post(c, base + "/sketch", s, 200);
  }
  const Camera cam = orbit_camera(0, 0, 3, {0, 0, 0}, 24, 24);
  Mask m(24, 24);
  for (int y = 9; y < 13; ++y)
    for (int x = 10; x < 14; ++x) m.set(x, y, true);
  auto alpha = [&] {
    const auto r = c.Get(base + "/render?channel=alpha&camera=" + httplib::detail::encode_url(camera_to_json(cam).dump()));
    return decode_png({r->body.begin(), r->body.end()});
  };
  const double before = mean_alpha_in_mask(alpha(), m);
  post(c, base + "/carve", json::object(), 200);
  const double after = mean_alpha_in_mask(alpha(), m);
  CHECK(before > 0.5);
  CHECK(after < 0.05);
}

TEST_CASE("studio sessions, persistence and static files") {
  const std::string state = temp_dir("state"), web = temp_dir("web");
  write_file_atomic(web + "/index.html", std::string_view("<html>studio</html>"));
  std::string id;
  StudioOptions opts;
  opts.static_dir = web;
  opts.state_dir = state;
  {
    Server srv(opts);
    auto c = srv.client();
    const auto page = c.Get("/index.html");
    REQUIRE(page);
    CHECK(page->body == "<html>studio</html>");

    const RadianceField f = synth_scene(SceneKind::kBox, {10, 10, 10}, {{-1, -1, -1}, {1, 1, 1}});
    const auto bytes = serialize_field(f);
    auto r = c.Post("/api/v1/session", std::string(bytes.begin(), bytes.end()), "application/octet-stream");
    REQUIRE(r->status == 201);
    id = json::parse(r->body)["id"];
    post(c, "/api/v1/session/" + id + "/sketch", square_sketch(0), 200);
    CHECK(fs::exists(state + "/" + id + "/base.skfd"));
    post(c, "/api/v1/session", {{"synth", "teapot"}}, 400);
    CHECK(c.Post("/api/v1/session", "garbage", "application/octet-stream")->status == 400);
  }
  opts.static_dir.clear();
  Server again(opts);
  auto c = again.client();
  const json s = json::parse(c.Get("/api/v1/session/" + id)->body);
  CHECK(s["sketches"] == 1);
}
