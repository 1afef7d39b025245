// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#include "skf/cli.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>

#include "CLI11.hpp"
#include "skf/editor.hpp"
#include "skf/io.hpp"
#include "skf/metrics.hpp"
#include "skf/studio.hpp"

namespace skf {

namespace fs = std::filesystem;

ExitCode exit_code_for(Errc code) {
  switch (code) {
    case Errc::kNonFiniteLoss:
    case Errc::kNonFiniteGradient:
    case Errc::kNonFinite: return kExitNumeric;
    case Errc::kIoError:
    case Errc::kBadMagic:
    case Errc::kVersionMismatch:
    case Errc::kTruncatedFile:
    case Errc::kChecksumMismatch:
    case Errc::kParseError:
    case Errc::kProviderTimeout:
    case Errc::kHandshakeVersionError:
    case Errc::kMalformedFrame: return kExitIo;
    default: return kExitUsage;
  }
}

namespace {

// Values of mirrored config flags, keyed by JSON key.
using FlagValues = std::map<std::string, std::string>;

// Adds one --key flag per JSON key of `defaults`, accepting JSON text or a
// bare string.
void mirror_flags(CLI::App* cmd, const nlohmann::json& defaults, FlagValues& values, const std::string& group) {
  for (const auto& [key, v] : defaults.items()) {
    std::string name = "--" + key;
    std::string alias = key;
    std::replace(alias.begin(), alias.end(), '_', '-');
    if (alias != key) name += ",--" + alias;
    cmd->add_option(name, values[key], "default " + v.dump())->group(group);
  }
}

nlohmann::json flag_json(const FlagValues& values) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, text] : values) {
    if (text.empty()) continue;
    nlohmann::json v = nlohmann::json::parse(text, nullptr, false);
    j[key] = v.is_discarded() ? nlohmann::json(text) : v;
  }
  return j;
}

nlohmann::json load_json_file(const std::string& path) {
  const std::string text = read_file_text(path);
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::kParseError, path + " is not valid JSON");
  return j;
}

Vec3 parse_vec3(const std::string& s) {
  Vec3 v;
  if (std::sscanf(s.c_str(), "%lf,%lf,%lf", &v.x, &v.y, &v.z) != 3)
    throw Error(Errc::kConfigError, "expected x,y,z but got '" + s + "'");
  return v;
}

std::string view_name(size_t i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "view_%03zu.%s", i, ext);
  return buf;
}

Image channel_image(const RenderOutput& out, const std::string& channel) {
  if (channel == "rgb") return out.rgb;
  if (channel == "alpha") return out.alpha;
  if (channel == "depth") {
    Image d = out.depth;
    float hi = 0.0f;
    for (float v : d.data) hi = std::max(hi, v);
    if (hi > 0)
      for (float& v : d.data) v /= hi;
    return d;
  }
  throw Error(Errc::kConfigError, "channel must be rgb, alpha or depth");
}

// Accepts a single polyline [[x,y],…] or a list of polylines.
std::vector<Polyline> parse_strokes(const nlohmann::json& j) {
  std::vector<Polyline> out;
  if (!j.is_array()) throw Error(Errc::kParseError, "strokes must be an array");
  auto polyline = [](const nlohmann::json& a) {
    Polyline p;
    for (const auto& pt : a) {
      if (!pt.is_array() || pt.size() != 2) throw Error(Errc::kParseError, "stroke points must be [x, y]");
      p.push_back({pt[0].get<double>(), pt[1].get<double>()});
    }
    return p;
  };
  if (!j.empty() && j[0].is_array() && !j[0].empty() && j[0][0].is_number()) {
    out.push_back(polyline(j));
  } else {
    for (const auto& s : j) out.push_back(polyline(s));
  }
  return out;
}

struct Globals {
  int threads = 0;
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"sketch-guided editing of voxel radiance fields", "skf"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--threads", g.threads, "worker threads (default: all cores)")->check(CLI::NonNegativeNumber);

  // synth
  std::string synth_kind = "sphere", synth_out;
  int synth_res = 64;
  auto* synth = app.add_subcommand("synth", "make a synthetic base field");
  synth->add_option("--kind", synth_kind, "sphere | box | plate | composite")->capture_default_str();
  synth->add_option("--res", synth_res, "grid resolution per axis")->capture_default_str()->check(CLI::Range(2, 512));
  synth->add_option("-o,--output", synth_out, "output .skfd")->required();

  // reconstruct
  std::string rec_images, rec_out;
  ReconstructConfig rec_cfg;
  int rec_res = 64;
  auto* rec = app.add_subcommand("reconstruct", "fit a field to posed images (view_NNN.png + view_NNN.json)");
  rec->add_option("--images", rec_images, "directory of posed images")->required();
  rec->add_option("--res", rec_res, "grid resolution per axis")->capture_default_str()->check(CLI::Range(2, 512));
  rec->add_option("--iters", rec_cfg.iterations, "optimization steps")->capture_default_str();
  rec->add_option("--lr", rec_cfg.lr, "learning rate")->capture_default_str();
  rec->add_option("--seed", rec_cfg.seed, "random seed")->capture_default_str();
  rec->add_option("-o,--output", rec_out, "output .skfd")->required();

  // render
  std::string render_field, render_dir = ".", render_camera, render_channel = "rgb", render_target = "0,0,0";
  int render_orbit = 8, render_size = 128;
  double render_elevation = 20, render_radius = 3.0, render_fov = 40;
  auto* render = app.add_subcommand("render", "render views or a turntable to PNG");
  render->add_option("field", render_field, "input .skfd")->required();
  render->add_option("--orbit", render_orbit, "number of turntable views")->capture_default_str()->check(CLI::PositiveNumber);
  render->add_option("--camera", render_camera, "single camera JSON instead of a turntable");
  render->add_option("--elevation", render_elevation, "turntable elevation, degrees")->capture_default_str();
  render->add_option("--radius", render_radius, "turntable radius")->capture_default_str();
  render->add_option("--target", render_target, "turntable center x,y,z")->capture_default_str();
  render->add_option("--size", render_size, "image size in pixels")->capture_default_str()->check(CLI::Range(1, 4096));
  render->add_option("--fov", render_fov, "vertical field of view, degrees")->capture_default_str();
  render->add_option("--channel", render_channel, "rgb | alpha | depth")->capture_default_str();
  render->add_option("-o,--output", render_dir, "output directory")->capture_default_str();

  // sketchpack
  std::string pack_strokes, pack_out;
  std::vector<std::string> pack_masks, pack_cameras;
  double pack_beta = 0.05;
  int pack_power = 2;
  auto* pack = app.add_subcommand("sketchpack", "build a sketch package from strokes or masks");
  pack->add_option("--strokes", pack_strokes, "stroke JSON {\"views\":[{\"camera\":…,\"strokes\":…}]}");
  pack->add_option("--mask", pack_masks, "mask PNG (repeat, paired with --camera)");
  pack->add_option("--camera", pack_cameras, "camera JSON (repeat, paired with --mask)");
  pack->add_option("--beta", pack_beta, "recorded beta")->capture_default_str();
  pack->add_option("--distance_power,--distance-power", pack_power, "recorded distance power")->capture_default_str();
  pack->add_option("-o,--output", pack_out, "output directory")->required();

  // edit
  std::string edit_base, edit_sketch, edit_out, edit_csv, edit_ckpt, edit_config;
  int edit_iters = -1;
  FlagValues edit_flags, guidance_flags;
  auto* edit_cmd = app.add_subcommand("edit", "run a sketch-guided edit");
  edit_cmd->add_option("base", edit_base, "base .skfd")->required();
  edit_cmd->add_option("--sketch", edit_sketch, "sketch package directory")->required();
  edit_cmd->add_option("-o,--output", edit_out, "output .skfd")->required();
  edit_cmd->add_option("--loss-csv", edit_csv, "loss history CSV (default: <output stem>.loss.csv)");
  edit_cmd->add_option("--checkpoint-dir", edit_ckpt, "directory for periodic checkpoints");
  edit_cmd->add_option("--config", edit_config, "JSON file with any subset of the edit/guidance keys");
  edit_cmd->add_option("--iters", edit_iters, "alias of --iterations");
  mirror_flags(edit_cmd, to_json(EditConfig{}), edit_flags, "Edit config");
  mirror_flags(edit_cmd, to_json(GuidanceConfig{}), guidance_flags, "Guidance config");

  // carve
  std::string carve_base, carve_sketch, carve_out;
  auto* carve_cmd = app.add_subcommand("carve", "empty the visual hull of the sketches");
  carve_cmd->add_option("base", carve_base, "base .skfd")->required();
  carve_cmd->add_option("--sketch", carve_sketch, "sketch package directory")->required();
  carve_cmd->add_option("-o,--output", carve_out, "output .skfd")->required();

  // eval
  std::string eval_base, eval_edited, eval_sketch, eval_out;
  auto* eval = app.add_subcommand("eval", "PSNR / IoS / SSIM report as JSON");
  eval->add_option("--base", eval_base, "base .skfd")->required();
  eval->add_option("--edited", eval_edited, "edited .skfd")->required();
  eval->add_option("--sketch", eval_sketch, "sketch package directory")->required();
  eval->add_option("-o,--output", eval_out, "also write the report here");

  // serve
  StudioOptions studio_opts;
  std::string serve_base;
  auto* serve = app.add_subcommand("serve", "run the studio HTTP API");
  serve->add_option("--host", studio_opts.host, "bind address")->capture_default_str();
  serve->add_option("--port", studio_opts.port, "port")->capture_default_str();
  serve->add_option("--static", studio_opts.static_dir, "UI bundle directory served at /");
  serve->add_option("--state-dir", studio_opts.state_dir, "persist sessions here");
  serve->add_option("--base", serve_base, "preload a session from this .skfd");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  if (g.threads > 0) omp_set_num_threads(g.threads);

  try {
    if (*synth) {
      RadianceField f = synth_scene(scene_kind_from_string(synth_kind), {synth_res, synth_res, synth_res},
                                    {{-1, -1, -1}, {1, 1, 1}});
      f.metadata["created_by"] = std::string("synth ") + synth_kind;
      save_field(f, synth_out);
      out << "wrote " << synth_out << "\n";
    } else if (*rec) {
      std::vector<PosedImage> images;
      std::vector<fs::path> pngs;
      for (const auto& e : fs::directory_iterator(rec_images))
        if (e.path().extension() == ".png") pngs.push_back(e.path());
      std::sort(pngs.begin(), pngs.end());
      for (const auto& p : pngs) {
        fs::path cam = p;
        cam.replace_extension(".json");
        if (!fs::exists(cam)) continue;
        Image img = read_png(p.string());
        if (img.channels != 3) {
          Image rgb(img.width, img.height, 3);
          for (size_t i = 0; i < rgb.pixel_count(); ++i)
            for (int c = 0; c < 3; ++c) rgb.data[3 * i + c] = img.data[i * img.channels + std::min(c, img.channels - 1)];
          img = std::move(rgb);
        }
        images.push_back({camera_from_json(load_json_file(cam.string())), std::move(img)});
      }
      if (images.empty()) throw Error(Errc::kIoError, "no posed images (view_NNN.png + .json) in " + rec_images);
      rec_cfg.res = {rec_res, rec_res, rec_res};
      std::vector<double> losses;
      const RadianceField f = reconstruct(images, rec_cfg, &losses);
      save_field(f, rec_out);
      out << "reconstructed from " << images.size() << " images, final loss "
          << (losses.empty() ? 0.0 : losses.back()) << "\n";
    } else if (*render) {
      const RadianceField f = load_field(render_field);
      std::vector<Camera> cams;
      if (!render_camera.empty()) {
        cams.push_back(camera_from_json(load_json_file(render_camera)));
      } else {
        const Vec3 target = parse_vec3(render_target);
        for (int i = 0; i < render_orbit; ++i)
          cams.push_back(orbit_camera(360.0 * i / render_orbit, render_elevation, render_radius, target, render_size,
                                      render_size, render_fov));
      }
      for (size_t i = 0; i < cams.size(); ++i) {
        const RenderOutput r = render_view(f, cams[i]);
        write_png((fs::path(render_dir) / view_name(i, "png")).string(), channel_image(r, render_channel));
        write_file_atomic((fs::path(render_dir) / view_name(i, "json")).string(), camera_to_json(cams[i]).dump(2));
      }
      out << "wrote " << cams.size() << " views to " << render_dir << "\n";
    } else if (*pack) {
      SketchSet set;
      if (!pack_strokes.empty()) {
        const nlohmann::json j = load_json_file(pack_strokes);
        if (!j.contains("views") || !j["views"].is_array()) throw Error(Errc::kParseError, "stroke JSON needs \"views\"");
        for (const auto& v : j["views"]) {
          const Camera cam = camera_from_json(v.at("camera"));
          const FillResult fill = fill_scribble(parse_strokes(v.at("strokes")), cam.width, cam.height);
          if (fill.open_curve)
            err << "warning: view " << set.views.size() << " strokes enclose nothing; using the dilated stroke\n";
          set.views.emplace_back(cam, fill.mask);
        }
      } else {
        if (pack_masks.empty() || pack_masks.size() != pack_cameras.size())
          throw Error(Errc::kConfigError, "give --strokes, or matching --mask/--camera pairs");
        for (size_t i = 0; i < pack_masks.size(); ++i) {
          const Camera cam = camera_from_json(load_json_file(pack_cameras[i]));
          const FillResult fill = fill_scribble(read_mask_png(pack_masks[i]));
          if (fill.open_curve) err << "warning: mask " << pack_masks[i] << " encloses nothing; using it dilated\n";
          set.views.emplace_back(cam, fill.mask);
        }
      }
      save_sketch_package(pack_out, set, pack_beta, pack_power);
      out << "wrote " << set.views.size() << " sketch views to " << pack_out << "\n";
    } else if (*edit_cmd) {
      const RadianceField base = load_field(edit_base);
      const SketchPackage pkg = load_sketch_package(edit_sketch);
      nlohmann::json ej = to_json(EditConfig{}), gj = to_json(GuidanceConfig{});
      ej["beta"] = pkg.beta;
      ej["distance_power"] = pkg.distance_power;
      if (!edit_config.empty()) split_config_json(load_json_file(edit_config), ej, gj);
      ej.update(flag_json(edit_flags));
      gj.update(flag_json(guidance_flags));
      if (edit_iters >= 0) ej["iterations"] = edit_iters;
      scale_default_warmup(ej);
      const EditConfig cfg = edit_config_from_json(ej);
      const GuidanceConfig gcfg = guidance_config_from_json(gj);
      SketchSet sketches = pkg.set;
      bind_edit_bbox(sketches, base);
      auto provider = make_provider(gcfg, base, sketches.edit_bbox);

      EditHooks hooks;
      hooks.checkpoint_dir = edit_ckpt;
      hooks.loss_csv_path = edit_csv.empty() ? (fs::path(edit_out).replace_extension(".loss.csv")).string() : edit_csv;
      const int every = std::max(1, cfg.iterations / 20);
      hooks.on_step = [&](const EditJob&, const LossRecord& r) {
        if ((r.iteration + 1) % every == 0 || r.iteration + 1 == cfg.iterations) {
          char line[160];
          std::snprintf(line, sizeof line, "iter %6d  total %.5g  sds %.4g  pres %.4g  sil %.4g  sp %.4g\n",
                        r.iteration + 1, r.l_total, r.l_sds, r.l_pres, r.l_sil, r.l_sp);
          err << line << std::flush;
        }
      };
      const RadianceField edited = edit(base, sketches, cfg, gcfg, *provider, hooks);
      save_field(edited, edit_out);
      out << "wrote " << edit_out << " and " << hooks.loss_csv_path << "\n";
    } else if (*carve_cmd) {
      RadianceField f = load_field(carve_base);
      carve(f, load_sketch_package(carve_sketch).set);
      save_field(f, carve_out);
      out << "wrote " << carve_out << "\n";
    } else if (*eval) {
      const EvalReport rep =
          evaluate(load_field(eval_base), load_field(eval_edited), load_sketch_package(eval_sketch).set);
      const std::string text = rep.to_json().dump(2);
      if (!eval_out.empty()) write_file_atomic(eval_out, text + "\n");
      out << text << "\n";
    } else if (*serve) {
      Studio studio(studio_opts);
      if (!serve_base.empty()) out << "session " << studio.add_session(load_field(serve_base)) << "\n";
      const int port = studio.bind();
      out << "listening on http://" << studio_opts.host << ":" << port << "\n" << std::flush;
      studio.run();
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}

}  // namespace skf
