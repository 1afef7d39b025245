// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <filesystem>

#include "json.hpp"
#include "skf/error.hpp"
#include "skf/io.hpp"
#include "skf/sketch.hpp"

namespace skf {

namespace fs = std::filesystem;

namespace {
std::string view_dir_name(size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "view_%02zu", i);
  return buf;
}
}  // namespace

void save_sketch_package(const std::string& dir, const SketchSet& set, double beta, int distance_power) {
  nlohmann::json index;
  index["views"] = nlohmann::json::array();
  for (size_t i = 0; i < set.views.size(); ++i) {
    const auto& v = set.views[i];
    const std::string name = view_dir_name(i);
    const fs::path vd = fs::path(dir) / name;
    fs::create_directories(vd);
    write_file_atomic((vd / "camera.json").string(), camera_to_json(v.camera()).dump(2));
    const auto png = encode_png([&] {
      Image img(v.mask().width, v.mask().height, 1);
      for (size_t k = 0; k < v.mask().data.size(); ++k) img.data[k] = v.mask().data[k] ? 1.0f : 0.0f;
      return img;
    }());
    write_file_atomic((vd / "mask.png").string(), png);
    if (v.canvas()) write_file_atomic((vd / "canvas.png").string(), encode_png(*v.canvas()));
    index["views"].push_back(name);
  }
  index["beta"] = beta;
  index["distance_power"] = distance_power;
  write_file_atomic((fs::path(dir) / "sketchset.json").string(), index.dump(2));
}

SketchPackage load_sketch_package(const std::string& dir) {
  SketchPackage pkg;
  const fs::path root(dir);
  std::vector<std::string> names;
  const fs::path index_path = root / "sketchset.json";
  if (fs::exists(index_path)) {
    nlohmann::json index;
    try {
      index = nlohmann::json::parse(read_file_text(index_path.string()));
      for (const auto& n : index.at("views")) names.push_back(n.get<std::string>());
      pkg.beta = index.value("beta", pkg.beta);
      pkg.distance_power = index.value("distance_power", pkg.distance_power);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::kParseError, std::string("sketchset.json: ") + e.what());
    }
  } else {
    for (size_t i = 0; fs::exists(root / view_dir_name(i)); ++i) names.push_back(view_dir_name(i));
  }
  if (names.empty()) throw Error(Errc::kEmptySketchSet, "no views in sketch package " + dir);
  for (const auto& name : names) {
    const fs::path vd = root / name;
    nlohmann::json cj;
    try {
      cj = nlohmann::json::parse(read_file_text((vd / "camera.json").string()));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::kParseError, name + "/camera.json: " + e.what());
    }
    Camera cam = camera_from_json(cj);
    Mask mask = read_mask_png((vd / "mask.png").string());
    std::optional<Image> canvas;
    if (fs::exists(vd / "canvas.png")) canvas = read_png((vd / "canvas.png").string());
    pkg.set.views.emplace_back(cam, std::move(mask), std::move(canvas));
  }
  return pkg;
}

std::string sketch_hash(const SketchSet& set) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& v : set.views) {
    h = fnv1a64(v.mask().data, h);
    h = fnv1a64(camera_to_json(v.camera()).dump(), h);
  }
  return hex64(h);
}

}  // namespace skf
