#pragma once

#include <json.hpp>

#include "mosaic/io.hpp"
#include "mosaic/synth.hpp"

namespace mosaic {

// Scene specs persist alongside generated data so ground truth can be
// re-instantiated exactly (the generator is deterministic).

inline void to_json(json& j, const MotionSpec& m) {
  j = json{{"tx", m.tx},           {"ty", m.ty},
           {"rot", m.rot},         {"theta0", m.theta0},
           {"bend_amp", m.bend_amp}, {"bend_freq", m.bend_freq},
           {"bend_rate", m.bend_rate}, {"bend_skew", m.bend_skew},
           {"scale", m.scale}};
}

inline void from_json(const json& j, MotionSpec& m) {
  MotionSpec d;
  m.tx = j.value("tx", d.tx);
  m.ty = j.value("ty", d.ty);
  m.rot = j.value("rot", d.rot);
  m.theta0 = j.value("theta0", d.theta0);
  m.bend_amp = j.value("bend_amp", d.bend_amp);
  m.bend_freq = j.value("bend_freq", d.bend_freq);
  m.bend_rate = j.value("bend_rate", d.bend_rate);
  m.bend_skew = j.value("bend_skew", d.bend_skew);
  m.scale = j.value("scale", d.scale);
}

inline void to_json(json& j, const OccluderSpec& o) {
  j = json{{"enabled", o.enabled}, {"cx", o.cx}, {"cy", o.cy}, {"w", o.w}, {"h", o.h},
           {"dx", o.dx}, {"dy", o.dy}, {"t0", o.t0}, {"t1", o.t1},
           {"stripe_period", o.stripe_period}};
}

inline void from_json(const json& j, OccluderSpec& o) {
  OccluderSpec d;
  o.enabled = j.value("enabled", d.enabled);
  o.cx = j.value("cx", d.cx);
  o.cy = j.value("cy", d.cy);
  o.w = j.value("w", d.w);
  o.h = j.value("h", d.h);
  o.dx = j.value("dx", d.dx);
  o.dy = j.value("dy", d.dy);
  o.t0 = j.value("t0", d.t0);
  o.t1 = j.value("t1", d.t1);
  o.stripe_period = j.value("stripe_period", d.stripe_period);
}

inline void to_json(json& j, const LightingSpec& l) {
  j = json{{"gain0", l.gain0}, {"gain1", l.gain1}};
}

inline void from_json(const json& j, LightingSpec& l) {
  LightingSpec d;
  l.gain0 = j.value("gain0", d.gain0);
  l.gain1 = j.value("gain1", d.gain1);
}

inline void to_json(json& j, const SceneSpec& s) {
  j = json{{"width", s.width},
           {"height", s.height},
           {"frames", s.frames},
           {"motion", s.motion},
           {"occluder", s.occluder},
           {"lighting", s.lighting},
           {"n_flow_tracks", s.n_flow_tracks},
           {"n_semantic_tracks", s.n_semantic_tracks},
           {"seed", s.seed},
           {"texture_seed", s.texture_seed},
           {"background", s.background},
           {"mask_margin", s.mask_margin}};
}

inline void from_json(const json& j, SceneSpec& s) {
  SceneSpec d;
  s.width = j.value("width", d.width);
  s.height = j.value("height", d.height);
  s.frames = j.value("frames", d.frames);
  if (j.contains("motion")) s.motion = j["motion"].get<MotionSpec>();
  if (j.contains("occluder")) s.occluder = j["occluder"].get<OccluderSpec>();
  if (j.contains("lighting")) s.lighting = j["lighting"].get<LightingSpec>();
  s.n_flow_tracks = j.value("n_flow_tracks", d.n_flow_tracks);
  s.n_semantic_tracks = j.value("n_semantic_tracks", d.n_semantic_tracks);
  s.seed = j.value("seed", d.seed);
  s.texture_seed = j.value("texture_seed", d.texture_seed);
  s.background = j.value("background", d.background);
  s.mask_margin = j.value("mask_margin", d.mask_margin);
}

// "key=value,key=value" parser used by the CLI spec flags.
inline std::map<std::string, double> parse_kv_spec(const std::string& spec) {
  std::map<std::string, double> out;
  if (spec.empty() || spec == "static" || spec == "none") return out;
  std::string body = spec;
  auto colon = body.find(':');
  if (colon != std::string::npos) body = body.substr(colon + 1);  // e.g. "rect:..."
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto eq = item.find('=');
    require(eq != std::string::npos, "spec entry must be key=value: " + item);
    try {
      out[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw validation_error("spec value is not a number: " + item);
    }
  }
  return out;
}

inline MotionSpec parse_motion_spec(const std::string& spec) {
  MotionSpec m;
  auto kv = parse_kv_spec(spec);
  for (const auto& [k, v] : kv) {
    if (k == "tx") m.tx = v;
    else if (k == "ty") m.ty = v;
    else if (k == "rot") m.rot = v;
    else if (k == "theta0") m.theta0 = v;
    else if (k == "bend") m.bend_amp = v;
    else if (k == "freq") m.bend_freq = v;
    else if (k == "brate") m.bend_rate = v;
    else if (k == "bskew") m.bend_skew = v;
    else if (k == "scale") m.scale = v;
    else throw validation_error("unknown motion key: " + k);
  }
  return m;
}

inline OccluderSpec parse_occluder_spec(const std::string& spec) {
  OccluderSpec o;
  if (spec.empty() || spec == "none") return o;
  o.enabled = true;
  auto kv = parse_kv_spec(spec);
  for (const auto& [k, v] : kv) {
    if (k == "cx") o.cx = v;
    else if (k == "cy") o.cy = v;
    else if (k == "w") o.w = v;
    else if (k == "h") o.h = v;
    else if (k == "dx") o.dx = v;
    else if (k == "dy") o.dy = v;
    else if (k == "t0") o.t0 = static_cast<int>(v);
    else if (k == "t1") o.t1 = static_cast<int>(v);
    else if (k == "stripes") o.stripe_period = v;
    else throw validation_error("unknown occluder key: " + k);
  }
  return o;
}

inline LightingSpec parse_lighting_spec(const std::string& spec) {
  LightingSpec l;
  auto kv = parse_kv_spec(spec);
  for (const auto& [k, v] : kv) {
    if (k == "gain0") l.gain0 = v;
    else if (k == "gain1") l.gain1 = v;
    else throw validation_error("unknown lighting key: " + k);
  }
  return l;
}

// ---------------------------------------------------------------------------
// On-disk scene layout written by the synth command.

struct SceneDirs {
  std::string frames, masks, gt, gt_map, gt_occ;
};

inline void save_scene(const std::string& dir, const SyntheticScene& scene, bool png_frames) {
  const SceneSpec& spec = scene.truth.spec();
  fs::create_directories(dir);
  fs::create_directories(fs::path(dir) / "frames");
  fs::create_directories(fs::path(dir) / "masks");
  fs::create_directories(fs::path(dir) / "gt" / "map");
  fs::create_directories(fs::path(dir) / "gt" / "occ");

  ShotManifest manifest;
  manifest.shot_id = "synth_" + std::to_string(spec.seed);
  for (int t = 0; t < spec.frames; ++t) {
    std::string frame_rel;
    if (png_frames) {
      frame_rel = "frames/" + frame_name(t).substr(0, 4) + ".png";
      write_png((fs::path(dir) / frame_rel).string(), scene.sequence.frames[t]);
    } else {
      frame_rel = "frames/" + frame_name(t);
      write_pfm((fs::path(dir) / frame_rel).string(), scene.sequence.frames[t]);
    }
    manifest.frame_paths.push_back(frame_rel);
    std::string mask_rel = "masks/" + frame_name(t).substr(0, 4) + ".png";
    write_png((fs::path(dir) / mask_rel).string(), scene.sequence.masks[t]);
    manifest.mask_paths.push_back(mask_rel);
  }
  save_track_set((fs::path(dir) / "tracks.jsonl").string(), scene.tracks);
  manifest.track_path = "tracks.jsonl";
  save_manifest((fs::path(dir) / "manifest.json").string(), manifest);

  // Ground truth: the exact spec (regenerates the analytic maps), track
  // sites, and dense per-frame dumps at the canonical grid.
  {
    json j = spec;
    std::ofstream out((fs::path(dir) / "gt" / "spec.json").string());
    out << j.dump(2) << "\n";
  }
  {
    std::ofstream out((fs::path(dir) / "gt" / "sites.jsonl").string());
    for (const auto& [id, q] : scene.sites) {
      json j{{"id", id}, {"q", {q.x, q.y}}};
      out << j.dump() << "\n";
    }
  }
  MosaicGrid grid = choose_grid(spec.width, spec.height);
  {
    std::ofstream out((fs::path(dir) / "gt" / "gain.csv").string());
    out << "frame,gain\n";
    for (int t = 0; t < spec.frames; ++t) out << t << "," << scene.truth.gain(t) << "\n";
  }
  for (int t = 0; t < spec.frames; ++t) {
    Image map(grid.width, grid.height, 2);
    Image occ(grid.width, grid.height, 1);
    for (int j = 0; j < grid.height; ++j)
      for (int i = 0; i < grid.width; ++i) {
        Vec2 q = grid_to_unit(i, j, grid);
        Vec2 p = scene.truth.map_site(q, t);
        map.at(i, j, 0) = static_cast<float>(p.x);
        map.at(i, j, 1) = static_cast<float>(p.y);
        occ.at(i, j) = scene.truth.site_visible(q, t) ? 1.f : 0.f;
      }
    write_pfm((fs::path(dir) / "gt" / "map" / frame_name(t)).string(), map);
    write_png((fs::path(dir) / "gt" / "occ" / (frame_name(t).substr(0, 4) + ".png")).string(), occ);
  }
}

inline SceneSpec load_scene_spec(const std::string& scene_dir) {
  std::ifstream in((fs::path(scene_dir) / "gt" / "spec.json").string());
  if (!in) throw io_error("missing gt/spec.json under " + scene_dir);
  json j;
  in >> j;
  return j.get<SceneSpec>();
}

inline std::map<std::int64_t, Vec2> load_scene_sites(const std::string& scene_dir) {
  std::ifstream in((fs::path(scene_dir) / "gt" / "sites.jsonl").string());
  if (!in) throw io_error("missing gt/sites.jsonl under " + scene_dir);
  std::map<std::int64_t, Vec2> sites;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    sites[j.at("id").get<std::int64_t>()] = {j.at("q")[0].get<double>(), j.at("q")[1].get<double>()};
  }
  return sites;
}

} // namespace mosaic
