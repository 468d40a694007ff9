#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mosaic/core.hpp"
#include "mosaic/errors.hpp"
#include "mosaic/pfm.hpp"
#include "mosaic/png_io.hpp"

namespace mosaic {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Hashing (FNV-1a 64) for provenance.

inline std::uint64_t fnv1a(const void* bytes, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const std::uint8_t*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hash_string(const std::string& s) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(s.data(), s.size())));
  return buf;
}

inline std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot hash missing file: " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[65536];
  while (in.good()) {
    in.read(buf, sizeof buf);
    h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

// ---------------------------------------------------------------------------
// Config <-> JSON.

inline void to_json(json& j, const SolverConfig& c) {
  j = json{{"lambda_b", c.lambda_b},
           {"lambda_c", c.lambda_c},
           {"tau", c.tau},
           {"mu1", c.mu1},
           {"mu2", c.mu2},
           {"l_min", c.l_min},
           {"l_max", c.l_max},
           {"pair_subsample_threshold", c.pair_subsample_threshold},
           {"pair_keep_top", c.pair_keep_top},
           {"pair_keep_random", c.pair_keep_random},
           {"knn", c.knn},
           {"map_max_iters", c.map_max_iters},
           {"map_tol", c.map_tol},
           {"map_warm_start", c.map_warm_start},
           {"grid_scale", c.grid_scale},
           {"vis_iters", c.vis_iters},
           {"vis_lr", c.vis_lr},
           {"vis_tol", c.vis_tol},
           {"vis_residual_cost", c.vis_residual_cost},
           {"mosaic_epochs", c.mosaic_epochs},
           {"mosaic_batch", c.mosaic_batch},
           {"mosaic_lr", c.mosaic_lr},
           {"mosaic_lr_final", c.mosaic_lr_final},
           {"flow_levels", c.flow_levels},
           {"flow_iters", c.flow_iters},
           {"flow_alpha", c.flow_alpha},
           {"flow_max_disp", c.flow_max_disp},
           {"refine_guard", c.refine_guard},
           {"light_lambda", c.light_lambda},
           {"light_factor", c.light_factor},
           {"n_sweeps", c.n_sweeps},
           {"psf", c.psf},
           {"pixel_budget", c.pixel_budget},
           {"refine_sweeps", c.refine_sweeps},
           {"universal_batch", c.universal_batch},
           {"universal_epochs", c.universal_epochs},
           {"universal_lr", c.universal_lr},
           {"universal_tau", c.universal_tau},
           {"correspondence_weight", c.correspondence_weight},
           {"structure_block", c.structure_block},
           {"seed", c.seed}};
}

inline void from_json(const json& j, SolverConfig& c) {
  SolverConfig d;
#define MOSAIC_CFG(field) c.field = j.value(#field, d.field)
  MOSAIC_CFG(lambda_b); MOSAIC_CFG(lambda_c); MOSAIC_CFG(tau);
  MOSAIC_CFG(mu1); MOSAIC_CFG(mu2); MOSAIC_CFG(l_min); MOSAIC_CFG(l_max);
  MOSAIC_CFG(pair_subsample_threshold); MOSAIC_CFG(pair_keep_top); MOSAIC_CFG(pair_keep_random);
  MOSAIC_CFG(knn); MOSAIC_CFG(map_max_iters); MOSAIC_CFG(map_tol); MOSAIC_CFG(map_warm_start);
  MOSAIC_CFG(grid_scale);
  MOSAIC_CFG(vis_iters); MOSAIC_CFG(vis_lr); MOSAIC_CFG(vis_tol); MOSAIC_CFG(vis_residual_cost);
  MOSAIC_CFG(mosaic_epochs); MOSAIC_CFG(mosaic_batch); MOSAIC_CFG(mosaic_lr); MOSAIC_CFG(mosaic_lr_final);
  MOSAIC_CFG(flow_levels); MOSAIC_CFG(flow_iters); MOSAIC_CFG(flow_alpha); MOSAIC_CFG(flow_max_disp);
  MOSAIC_CFG(refine_guard);
  MOSAIC_CFG(light_lambda); MOSAIC_CFG(light_factor);
  MOSAIC_CFG(n_sweeps); MOSAIC_CFG(psf);
  MOSAIC_CFG(pixel_budget); MOSAIC_CFG(refine_sweeps);
  MOSAIC_CFG(universal_batch); MOSAIC_CFG(universal_epochs); MOSAIC_CFG(universal_lr);
  MOSAIC_CFG(universal_tau); MOSAIC_CFG(correspondence_weight); MOSAIC_CFG(structure_block);
  MOSAIC_CFG(seed);
#undef MOSAIC_CFG
}

inline std::string config_hash(const SolverConfig& c) {
  json j = c;
  return hash_string(j.dump());
}

// Applies "key=value" overrides on top of a config.
inline void apply_config_override(SolverConfig& c, const std::string& kv) {
  auto eq = kv.find('=');
  require(eq != std::string::npos, "config override must be key=value: " + kv);
  json j = c;
  std::string key = kv.substr(0, eq);
  std::string val = kv.substr(eq + 1);
  require(j.contains(key), "unknown config key: " + key);
  json parsed;
  try {
    parsed = json::parse(val);
  } catch (const json::exception&) {
    parsed = val;  // bare strings (e.g. psf=tent)
  }
  j[key] = parsed;
  c = j.get<SolverConfig>();
}

// ---------------------------------------------------------------------------
// Shot manifest.

struct ShotManifest {
  std::string shot_id;
  std::vector<std::string> frame_paths;
  std::vector<std::string> mask_paths;  // empty or same length as frames
  std::string track_path;               // empty when absent
  std::string base_dir;                 // directory of the manifest file

  std::string resolve(const std::string& p) const {
    fs::path q(p);
    if (q.is_absolute() || base_dir.empty()) return p;
    return (fs::path(base_dir) / q).string();
  }
};

inline ShotManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open manifest: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw io_error("malformed manifest " + path + ": " + e.what());
  }
  ShotManifest m;
  m.base_dir = fs::path(path).parent_path().string();
  m.shot_id = j.value("shot_id", std::string("shot"));
  require(j.contains("frames") && j["frames"].is_array(), "manifest: missing frames array");
  for (const auto& f : j["frames"]) m.frame_paths.push_back(f.get<std::string>());
  if (j.contains("masks") && !j["masks"].is_null())
    for (const auto& f : j["masks"]) m.mask_paths.push_back(f.get<std::string>());
  if (j.contains("tracks") && !j["tracks"].is_null()) m.track_path = j["tracks"].get<std::string>();
  require(!m.frame_paths.empty(), "manifest: no frames listed");
  require(m.mask_paths.empty() || m.mask_paths.size() == m.frame_paths.size(),
          "manifest: mask count differs from frame count");
  return m;
}

inline void save_manifest(const std::string& path, const ShotManifest& m) {
  json j;
  j["shot_id"] = m.shot_id;
  j["frames"] = m.frame_paths;
  if (m.mask_paths.empty()) j["masks"] = nullptr; else j["masks"] = m.mask_paths;
  if (m.track_path.empty()) j["tracks"] = nullptr; else j["tracks"] = m.track_path;
  std::ofstream out(path);
  if (!out) throw io_error("cannot write manifest: " + path);
  out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Frames: PFM for floats, PNG for integer formats. An 8/16-bit mask PNG
// loads as 0/1 from its first channel.

inline Image load_frame_file(const std::string& path) {
  std::string ext = fs::path(path).extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(ch));
  if (ext == ".pfm") {
    Image img = read_pfm(path);
    if (img.channels == 1) {  // promote grayscale
      Image rgb(img.width, img.height, 3);
      for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
          for (int c = 0; c < 3; ++c) rgb.at(x, y, c) = img.at(x, y);
      return rgb;
    }
    require(img.channels == 3, "frame PFM must be 1- or 3-channel: " + path);
    return img;
  }
  if (ext == ".png") return read_png(path);
  throw io_error("unsupported frame format '" + ext + "': " + path);
}

inline Image load_mask_file(const std::string& path) {
  std::string ext = fs::path(path).extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(ch));
  Image src = (ext == ".pfm") ? read_pfm(path) : read_png(path);
  Image mask(src.width, src.height, 1);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x)
      mask.at(x, y) = src.at(x, y, 0) > 0.5f ? 1.f : 0.f;
  return mask;
}

inline ImageSequence load_frames(const ShotManifest& m) {
  ImageSequence seq;
  for (std::size_t i = 0; i < m.frame_paths.size(); ++i) {
    Image f = load_frame_file(m.resolve(m.frame_paths[i]));
    if (i == 0) {
      seq.width = f.width;
      seq.height = f.height;
    } else {
      require(f.width == seq.width && f.height == seq.height,
              "frame dimension mismatch at " + m.frame_paths[i]);
    }
    seq.frames.push_back(std::move(f));
  }
  for (const auto& p : m.mask_paths) {
    Image mk = load_mask_file(m.resolve(p));
    require(mk.width == seq.width && mk.height == seq.height,
            "mask dimension mismatch at " + p);
    seq.masks.push_back(std::move(mk));
  }
  seq.validate();
  return seq;
}

// ---------------------------------------------------------------------------
// Tracks: JSON Lines, one track per line.

inline TrackSet load_track_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open track file: " + path);
  TrackSet tracks;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw validation_error("track file " + path + " line " + std::to_string(lineno) +
                             ": " + e.what());
    }
    Track t;
    t.id = j.at("id").get<std::int64_t>();
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "flow") t.kind = TrackKind::Flow;
    else if (kind == "semantic") t.kind = TrackKind::Semantic;
    else throw validation_error("track " + std::to_string(t.id) + ": unknown kind '" + kind + "'");
    if (j.contains("semantic_key") && !j["semantic_key"].is_null())
      t.semantic_key = j["semantic_key"].get<std::int64_t>();
    std::set<int> frames_seen;
    for (const auto& js : j.at("samples")) {
      TrackSample s;
      s.frame = js.at("t").get<int>();
      s.x = js.at("x").get<double>();
      s.y = js.at("y").get<double>();
      s.visible = js.at("visible").get<bool>();
      if (js.contains("bx") && js.contains("by")) {
        s.has_backward = true;
        s.bx = js["bx"].get<double>();
        s.by = js["by"].get<double>();
      }
      require(frames_seen.insert(s.frame).second,
              "track " + std::to_string(t.id) + ": duplicate sample for frame " +
                  std::to_string(s.frame));
      t.samples.push_back(s);
    }
    std::sort(t.samples.begin(), t.samples.end(),
              [](const TrackSample& a, const TrackSample& b) { return a.frame < b.frame; });
    tracks.push_back(std::move(t));
  }
  validate_tracks(tracks);
  return tracks;
}

inline void save_track_set(const std::string& path, const TrackSet& tracks) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write track file: " + path);
  for (const auto& t : tracks) {
    json j;
    j["id"] = t.id;
    j["kind"] = t.kind == TrackKind::Flow ? "flow" : "semantic";
    if (t.semantic_key) j["semantic_key"] = *t.semantic_key; else j["semantic_key"] = nullptr;
    json samples = json::array();
    for (const auto& s : t.samples) {
      json js{{"t", s.frame}, {"x", s.x}, {"y", s.y}, {"visible", s.visible}};
      if (s.has_backward) {
        js["bx"] = s.bx;
        js["by"] = s.by;
      }
      samples.push_back(std::move(js));
    }
    j["samples"] = std::move(samples);
    out << j.dump() << "\n";
  }
}

// Drops flow tracks whose forward/backward positions disagree by more than
// `threshold_px` in any sample carrying a backward position.
inline TrackSet filter_consistent_tracks(const TrackSet& tracks, double threshold_px = 1.0) {
  TrackSet kept;
  for (const auto& t : tracks) {
    bool ok = true;
    if (t.kind == TrackKind::Flow) {
      for (const auto& s : t.samples) {
        if (!s.has_backward) continue;
        double dx = s.x - s.bx, dy = s.y - s.by;
        if (std::sqrt(dx * dx + dy * dy) > threshold_px) {
          ok = false;
          break;
        }
      }
    }
    if (ok) kept.push_back(t);
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Embedding JSONL.

inline void save_embedding(const std::string& path, const Embedding& e) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write embedding file: " + path);
  for (const auto& entry : e.entries) {
    json j{{"id", entry.id}, {"u", {entry.u.x, entry.u.y}}, {"partition", entry.partition}};
    if (entry.semantic_key) j["semantic_key"] = *entry.semantic_key;
    out << j.dump() << "\n";
  }
}

inline Embedding load_embedding(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open embedding file: " + path);
  Embedding e;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    Embedding::Entry entry;
    entry.id = j.at("id").get<std::int64_t>();
    entry.u = {j.at("u")[0].get<double>(), j.at("u")[1].get<double>()};
    entry.partition = j.at("partition").get<int>();
    if (j.contains("semantic_key") && !j["semantic_key"].is_null())
      entry.semantic_key = j["semantic_key"].get<std::int64_t>();
    e.entries.push_back(entry);
  }
  return e;
}

// ---------------------------------------------------------------------------
// Energy CSV.

inline void save_energy_log(const std::string& path, const EnergyLog& log) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write energy log: " + path);
  out << "stage,sweep,E_data,E_b,E_c,total,wall_seconds\n";
  out.precision(12);
  for (const auto& r : log)
    out << r.stage << "," << r.sweep << "," << r.e_data << "," << r.e_b << ","
        << r.e_c << "," << r.total << "," << r.wall_seconds << "\n";
}

inline EnergyLog load_energy_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open energy log: " + path);
  EnergyLog log;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EnergyRow r;
    std::stringstream ss(line);
    std::string tok;
    std::getline(ss, r.stage, ',');
    std::getline(ss, tok, ','); r.sweep = std::stoi(tok);
    std::getline(ss, tok, ','); r.e_data = std::stod(tok);
    std::getline(ss, tok, ','); r.e_b = std::stod(tok);
    std::getline(ss, tok, ','); r.e_c = std::stod(tok);
    std::getline(ss, tok, ','); r.total = std::stod(tok);
    std::getline(ss, tok, ','); r.wall_seconds = std::stod(tok);
    log.push_back(std::move(r));
  }
  return log;
}

// ---------------------------------------------------------------------------
// Shot model directory: meta.json, mosaic.pfm, coverage.pfm, warp/%04d.pfm,
// vis/%04d.pfm, light_gain/%04d.pfm, light_offset/%04d.pfm, embedding.jsonl.

inline std::string frame_name(int t) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d.pfm", t);
  return buf;
}

inline void save_shot_model(const std::string& dir, const ShotModel& model) {
  model.validate();
  fs::create_directories(dir);
  fs::create_directories(fs::path(dir) / "warp");
  fs::create_directories(fs::path(dir) / "vis");

  json meta;
  meta["version"] = 1;
  meta["width"] = model.width;
  meta["height"] = model.height;
  meta["frames"] = model.frame_count();
  meta["grid"] = {{"width", model.grid.width}, {"height", model.grid.height}};
  meta["shot_id"] = model.provenance.shot_id;
  meta["source_manifest"] = model.provenance.source_manifest;
  meta["config_hash"] = model.provenance.config_hash;
  meta["seed"] = model.provenance.seed;
  meta["input_hashes"] = model.provenance.input_hashes;
  meta["warnings"] = model.provenance.warnings;
  meta["embedding"] = {
      {"objective", model.embedding.objective},
      {"norm_offset", {model.embedding.norm_offset.x, model.embedding.norm_offset.y}},
      {"norm_scale", {model.embedding.norm_scale.x, model.embedding.norm_scale.y}},
      {"prenorm_min", {model.embedding.prenorm_min.x, model.embedding.prenorm_min.y}},
      {"prenorm_max", {model.embedding.prenorm_max.x, model.embedding.prenorm_max.y}}};
  meta["lighting"] = {{"active", model.lighting.active()}, {"factor", model.lighting.factor}};
  json flags = json::array();
  for (auto f : model.warps.constrained) flags.push_back(static_cast<bool>(f));
  meta["constrained_frames"] = flags;
  {
    std::ofstream out((fs::path(dir) / "meta.json").string());
    if (!out) throw io_error("cannot write meta.json in " + dir);
    out << meta.dump(2) << "\n";
  }

  write_pfm((fs::path(dir) / "mosaic.pfm").string(), model.mosaic.color);
  write_pfm((fs::path(dir) / "coverage.pfm").string(), model.mosaic.coverage);
  for (int t = 0; t < model.frame_count(); ++t) {
    write_pfm((fs::path(dir) / "warp" / frame_name(t)).string(), model.warps.frames[t]);
    write_pfm((fs::path(dir) / "vis" / frame_name(t)).string(), model.visibility.frames[t]);
  }
  if (model.warps.has_inverse()) {
    fs::create_directories(fs::path(dir) / "inv");
    for (int t = 0; t < model.frame_count(); ++t)
      write_pfm((fs::path(dir) / "inv" / frame_name(t)).string(), model.warps.inverse[t]);
  }
  if (model.lighting.active()) {
    fs::create_directories(fs::path(dir) / "light_gain");
    fs::create_directories(fs::path(dir) / "light_offset");
    for (int t = 0; t < model.frame_count(); ++t) {
      write_pfm((fs::path(dir) / "light_gain" / frame_name(t)).string(), model.lighting.gain[t]);
      write_pfm((fs::path(dir) / "light_offset" / frame_name(t)).string(), model.lighting.offset[t]);
    }
  }
  save_embedding((fs::path(dir) / "embedding.jsonl").string(), model.embedding);
  if (!model.energy_log.empty())
    save_energy_log((fs::path(dir) / "energy.csv").string(), model.energy_log);
}

inline ShotModel load_shot_model(const std::string& dir) {
  fs::path root(dir);
  std::ifstream in((root / "meta.json").string());
  if (!in) throw io_error("cannot open shot model (missing meta.json): " + dir);
  json meta;
  try {
    in >> meta;
  } catch (const json::exception& e) {
    throw io_error("malformed meta.json in " + dir + ": " + e.what());
  }

  ShotModel model;
  model.width = meta.at("width").get<int>();
  model.height = meta.at("height").get<int>();
  int T = meta.at("frames").get<int>();
  model.grid = {meta.at("grid").at("width").get<int>(), meta.at("grid").at("height").get<int>()};
  model.provenance.shot_id = meta.value("shot_id", std::string());
  model.provenance.source_manifest = meta.value("source_manifest", std::string());
  model.provenance.config_hash = meta.value("config_hash", std::string());
  model.provenance.seed = meta.value("seed", std::uint64_t(0));
  if (meta.contains("input_hashes"))
    model.provenance.input_hashes =
        meta["input_hashes"].get<std::map<std::string, std::string>>();
  if (meta.contains("warnings"))
    model.provenance.warnings = meta["warnings"].get<std::vector<std::string>>();
  if (meta.contains("embedding")) {
    const auto& je = meta["embedding"];
    model.embedding.objective = je.value("objective", 0.0);
    auto v2 = [](const json& a) { return Vec2{a[0].get<double>(), a[1].get<double>()}; };
    if (je.contains("norm_offset")) model.embedding.norm_offset = v2(je["norm_offset"]);
    if (je.contains("norm_scale")) model.embedding.norm_scale = v2(je["norm_scale"]);
    if (je.contains("prenorm_min")) model.embedding.prenorm_min = v2(je["prenorm_min"]);
    if (je.contains("prenorm_max")) model.embedding.prenorm_max = v2(je["prenorm_max"]);
  }

  model.mosaic.grid = model.grid;
  model.mosaic.color = read_pfm((root / "mosaic.pfm").string());
  if (fs::exists(root / "coverage.pfm"))
    model.mosaic.coverage = read_pfm((root / "coverage.pfm").string());
  model.warps.grid = model.grid;
  model.visibility.grid = model.grid;
  for (int t = 0; t < T; ++t) {
    fs::path wp = root / "warp" / frame_name(t);
    if (!fs::exists(wp))
      throw io_error("shot model missing warp for frame " + std::to_string(t) + ": " + wp.string());
    model.warps.frames.push_back(read_pfm(wp.string()));
    fs::path vp = root / "vis" / frame_name(t);
    if (!fs::exists(vp))
      throw io_error("shot model missing visibility for frame " + std::to_string(t) + ": " + vp.string());
    model.visibility.frames.push_back(read_pfm(vp.string()));
  }
  if (fs::exists(root / "inv")) {
    for (int t = 0; t < T; ++t) {
      fs::path ip = root / "inv" / frame_name(t);
      if (fs::exists(ip)) model.warps.inverse.push_back(read_pfm(ip.string()));
    }
    if (static_cast<int>(model.warps.inverse.size()) != T) model.warps.inverse.clear();
  }
  if (meta.contains("lighting") && meta["lighting"].value("active", false)) {
    model.lighting.factor = meta["lighting"].value("factor", 8);
    model.lighting.frame_width = model.width;
    model.lighting.frame_height = model.height;
    for (int t = 0; t < T; ++t) {
      model.lighting.gain.push_back(read_pfm((root / "light_gain" / frame_name(t)).string()));
      model.lighting.offset.push_back(read_pfm((root / "light_offset" / frame_name(t)).string()));
    }
  }
  if (meta.contains("constrained_frames")) {
    for (const auto& f : meta["constrained_frames"])
      model.warps.constrained.push_back(f.get<bool>() ? 1 : 0);
  }
  if (fs::exists(root / "embedding.jsonl")) {
    Embedding coords = load_embedding((root / "embedding.jsonl").string());
    coords.objective = model.embedding.objective;
    coords.norm_offset = model.embedding.norm_offset;
    coords.norm_scale = model.embedding.norm_scale;
    coords.prenorm_min = model.embedding.prenorm_min;
    coords.prenorm_max = model.embedding.prenorm_max;
    model.embedding = std::move(coords);
  }
  if (fs::exists(root / "energy.csv"))
    model.energy_log = load_energy_log((root / "energy.csv").string());

  model.validate();
  return model;
}

// Records a warning on the loaded model when its stored config hash differs
// from the hash of the config now in use.
inline void check_config_hash(ShotModel& model, const SolverConfig& cfg) {
  std::string h = config_hash(cfg);
  if (!model.provenance.config_hash.empty() && model.provenance.config_hash != h)
    model.provenance.warnings.push_back("config hash mismatch: model " +
                                        model.provenance.config_hash + " vs current " + h);
}

} // namespace mosaic
