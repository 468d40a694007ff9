// mosaicedit: unfold a filmed object into an editable mosaic, solve the
// per-frame mappings and visibility, and project mosaic edits back into
// frames (single shot or transferred across linked shots).

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iostream>

#include "mosaic/edit.hpp"
#include "mosaic/io.hpp"
#include "mosaic/multires.hpp"
#include "mosaic/multishot.hpp"
#include "mosaic/parallel.hpp"
#include "mosaic/render.hpp"
#include "mosaic/solver.hpp"
#include "mosaic/synth_io.hpp"

namespace {

using namespace mosaic;

struct GlobalOpts {
  std::string workdir = ".";
  int threads = 0;
};

std::string resolve(const GlobalOpts& g, const std::string& path) {
  fs::path p(path);
  if (p.is_absolute()) return path;
  return (fs::path(g.workdir) / p).string();
}

SolverConfig load_config(const std::string& config_path, const std::vector<std::string>& sets,
                         std::optional<std::uint64_t> seed) {
  SolverConfig cfg;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw io_error("cannot open config: " + config_path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw validation_error(std::string("malformed config JSON: ") + e.what());
    }
    cfg = j.get<SolverConfig>();
  }
  for (const auto& kv : sets) apply_config_override(cfg, kv);
  if (seed) cfg.seed = *seed;
  cfg.validate();
  return cfg;
}

void write_provenance(const std::string& dir, const SolverConfig& cfg,
                      const std::map<std::string, std::string>& inputs,
                      const std::vector<std::string>& argv_rec,
                      const std::vector<std::string>& warnings) {
  json j;
  j["config"] = cfg;
  j["config_hash"] = config_hash(cfg);
  j["seed"] = cfg.seed;
  j["inputs"] = inputs;
  j["argv"] = argv_rec;
  j["warnings"] = warnings;
  std::ofstream out((fs::path(dir) / "provenance.json").string());
  out << j.dump(2) << "\n";
}

std::map<std::string, std::string> hash_manifest_inputs(const ShotManifest& m) {
  std::map<std::string, std::string> h;
  for (const auto& p : m.frame_paths) h[p] = hash_file(m.resolve(p));
  for (const auto& p : m.mask_paths) h[p] = hash_file(m.resolve(p));
  if (!m.track_path.empty()) h[m.track_path] = hash_file(m.resolve(m.track_path));
  return h;
}

// ---------------------------------------------------------------------------

int cmd_synth(const GlobalOpts& g, const std::string& out_dir, const std::string& size,
              int frames, const std::string& motion, const std::string& occluder,
              const std::string& lighting, std::uint64_t seed, std::uint64_t texture_seed,
              int flow_tracks, int semantic_tracks, bool png_frames) {
  SceneSpec spec;
  auto x = size.find('x');
  require(x != std::string::npos, "--size must be WxH");
  spec.width = std::stoi(size.substr(0, x));
  spec.height = std::stoi(size.substr(x + 1));
  spec.frames = frames;
  spec.motion = parse_motion_spec(motion);
  spec.occluder = parse_occluder_spec(occluder);
  spec.lighting = parse_lighting_spec(lighting);
  spec.seed = seed;
  spec.texture_seed = texture_seed;
  spec.n_flow_tracks = flow_tracks;
  spec.n_semantic_tracks = semantic_tracks;

  SyntheticScene scene = generate_synthetic_scene(spec);
  std::string dir = resolve(g, out_dir);
  save_scene(dir, scene, png_frames);
  std::printf("synth: wrote %d frames (%dx%d), %zu tracks to %s\n", spec.frames, spec.width,
              spec.height, scene.tracks.size(), dir.c_str());
  return 0;
}

int cmd_solve(const GlobalOpts& g, const std::string& manifest_path, const std::string& config_path,
              const std::string& out_dir, bool multires, const std::vector<std::string>& sets,
              std::optional<std::uint64_t> seed, double track_consistency,
              const std::string& flow_dir, const std::vector<std::string>& argv_rec) {
  SolverConfig cfg = load_config(config_path.empty() ? "" : resolve(g, config_path), sets, seed);
  ShotManifest manifest = load_manifest(resolve(g, manifest_path));
  ImageSequence seq = load_frames(manifest);
  require(!manifest.track_path.empty(), "manifest has no track file; solve needs tracks");
  TrackSet tracks = load_track_set(manifest.resolve(manifest.track_path));
  std::size_t before = tracks.size();
  tracks = filter_consistent_tracks(tracks, track_consistency);
  validate_tracks(tracks, seq.count());

  auto t0 = std::chrono::steady_clock::now();
  ShotModel model = multires ? solve_multires(seq, tracks, cfg)
                             : solve_shot(seq, tracks, cfg, flow_dir.empty() ? "" : resolve(g, flow_dir));
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  model.provenance.shot_id = manifest.shot_id;
  model.provenance.source_manifest = fs::absolute(resolve(g, manifest_path)).string();
  model.provenance.input_hashes = hash_manifest_inputs(manifest);
  if (before != tracks.size())
    model.provenance.warnings.push_back(std::to_string(before - tracks.size()) +
                                        " tracks dropped by the consistency filter");

  std::string dir = resolve(g, out_dir);
  save_shot_model(dir, model);
  write_provenance(dir, cfg, model.provenance.input_hashes, argv_rec, model.provenance.warnings);

  const auto& last = model.energy_log.back();
  std::printf("solve: %s in %.1f s; E_data %.4f, total %.4f, %zu stages", manifest.shot_id.c_str(),
              secs, last.e_data, last.total, model.energy_log.size());
  int reverts = 0;
  for (const auto& w : model.provenance.warnings)
    if (w.rfind("stage reverted", 0) == 0) ++reverts;
  if (reverts) std::printf(" (%d reverted)", reverts);
  std::printf("\nsolve: model written to %s\n", dir.c_str());
  return 0;
}

int cmd_render(const GlobalOpts& g, const std::string& model_dir, const std::string& out_dir,
               const std::string& manifest_override) {
  ShotModel model = load_shot_model(resolve(g, model_dir));
  std::string manifest_path =
      manifest_override.empty() ? model.provenance.source_manifest : resolve(g, manifest_override);
  require(!manifest_path.empty(), "model has no recorded manifest; pass --manifest");
  ShotManifest manifest = load_manifest(manifest_path);
  ImageSequence seq = load_frames(manifest);
  require(seq.count() == model.frame_count(), "frame count differs from the model");

  std::string dir = resolve(g, out_dir);
  fs::create_directories(fs::path(dir) / "render");
  std::vector<double> psnr_all(seq.count()), psnr_mask(seq.count());
  parallel_for(seq.count(), [&](std::size_t t) {
    RenderedFrame r = render_frame(model, static_cast<int>(t));
    Image out(model.width, model.height, 3);
    for (int y = 0; y < model.height; ++y)
      for (int x = 0; x < model.width; ++x)
        for (int c = 0; c < 3; ++c)
          out.at(x, y, c) = r.covered(x, y)
                                ? static_cast<float>(std::clamp(
                                      corrected_value(r, model.lighting.active() ? &model.lighting : nullptr,
                                                      static_cast<int>(t), x, y, c),
                                      0.0, 1.0))
                                : 0.f;
    write_pfm((fs::path(dir) / "render" / frame_name(static_cast<int>(t))).string(), out);
    psnr_all[t] = psnr(out, seq.frames[t]);
    psnr_mask[t] = seq.has_masks() ? psnr(out, seq.frames[t], &seq.masks[t]) : psnr_all[t];
  });

  std::ofstream csv((fs::path(dir) / "psnr.csv").string());
  csv << "frame,psnr,psnr_mask\n";
  double mean = 0.0;
  for (int t = 0; t < seq.count(); ++t) {
    csv << t << "," << psnr_all[t] << "," << psnr_mask[t] << "\n";
    mean += psnr_mask[t];
  }
  mean /= seq.count();
  std::printf("render: mean PSNR %.2f dB over %d frames (mask-weighted)\n", mean, seq.count());
  return 0;
}

int cmd_apply_edit(const GlobalOpts& g, const std::string& model_dir, const std::string& edited_path,
                   const std::string& out_dir, const std::string& manifest_override) {
  ShotModel model = load_shot_model(resolve(g, model_dir));
  std::string manifest_path =
      manifest_override.empty() ? model.provenance.source_manifest : resolve(g, manifest_override);
  require(!manifest_path.empty(), "model has no recorded manifest; pass --manifest");
  ShotManifest manifest = load_manifest(manifest_path);
  ImageSequence seq = load_frames(manifest);
  require(seq.count() == model.frame_count(), "frame count differs from the model");

  Image edited = load_frame_file(resolve(g, edited_path));
  EditDiff diff = diff_mosaic(model.mosaic, edited);

  std::string dir = resolve(g, out_dir);
  fs::create_directories(fs::path(dir) / "frames");
  std::vector<char> copied(seq.count(), 0);
  parallel_for(seq.count(), [&](std::size_t t) {
    std::string src_ext = fs::path(manifest.frame_paths[t]).extension().string();
    fs::path out_path = fs::path(dir) / "frames" / (frame_name(static_cast<int>(t)).substr(0, 4) + src_ext);
    if (diff.empty()) {
      // Byte-identical passthrough.
      fs::copy_file(manifest.resolve(manifest.frame_paths[t]), out_path,
                    fs::copy_options::overwrite_existing);
      copied[t] = 1;
      return;
    }
    Image out = project_edit(diff, model, static_cast<int>(t), seq.frames[t]);
    if (src_ext == ".png") write_png(out_path.string(), out);
    else write_pfm(out_path.string(), out);
  });
  std::printf("apply-edit: %d frames written to %s%s\n", seq.count(), dir.c_str(),
              diff.empty() ? " (empty diff: sources copied)" : "");
  return 0;
}

int cmd_link(const GlobalOpts& g, const std::vector<std::string>& model_dirs,
             const std::string& out_dir, const std::string& config_path,
             const std::vector<std::string>& sets, std::optional<std::uint64_t> seed) {
  require(model_dirs.size() == 2, "link expects exactly two --models directories");
  SolverConfig cfg = load_config(config_path.empty() ? "" : resolve(g, config_path), sets, seed);
  ShotModel a = load_shot_model(resolve(g, model_dirs[0]));
  ShotModel b = load_shot_model(resolve(g, model_dirs[1]));
  std::string name_a = a.provenance.shot_id.empty() ? "A" : a.provenance.shot_id;
  std::string name_b = b.provenance.shot_id.empty() ? "B" : b.provenance.shot_id;
  if (name_a == name_b) name_b += "_2";

  CorrespondenceSet cs = mosaic_correspondences({&a, &b}, cfg);
  double tau = cfg.universal_tau > 0.0
                   ? cfg.universal_tau
                   : std::pow(0.05 * std::max({a.grid.width, a.grid.height, b.grid.width,
                                               b.grid.height}), 2.0) * 16.0;
  UniversalEmbedding uni = embed_universal(cs, cfg, tau);
  MosaicWarp warp = build_mosaic_warp(cs, uni, a, b, cfg);

  std::string dir = resolve(g, out_dir);
  fs::create_directories(dir);
  std::size_t shared = cs.links.size();
  {
    json j;
    j["shots"] = {{{"id", name_a}, {"model", fs::absolute(resolve(g, model_dirs[0])).string()}},
                  {{"id", name_b}, {"model", fs::absolute(resolve(g, model_dirs[1])).string()}}};
    j["shared_keys"] = shared;
    j["stress"] = uni.stress;
    j["correspondence"] = uni.correspondence;
    j["config_hash"] = config_hash(cfg);
    std::ofstream out((fs::path(dir) / "link.json").string());
    out << j.dump(2) << "\n";
  }
  for (int k = 0; k < 2; ++k) {
    const std::string& nm = k == 0 ? name_a : name_b;
    std::ofstream out((fs::path(dir) / ("uemb_" + nm + ".jsonl")).string());
    for (std::size_t i = 0; i < cs.points[k].size(); ++i) {
      json j{{"idx", i},
             {"key", cs.points[k][i].semantic_key >= 0 ? json(cs.points[k][i].semantic_key) : json()},
             {"y", {cs.points[k][i].y.x, cs.points[k][i].y.y}},
             {"u", {uni.u[k][i].x, uni.u[k][i].y}}};
      out << j.dump() << "\n";
    }
  }
  write_pfm((fs::path(dir) / ("mwarp_" + name_a + "_" + name_b + ".pfm")).string(), warp.fwd);
  write_png((fs::path(dir) / ("mwarp_" + name_a + "_" + name_b + "_valid.png")).string(), warp.fwd_valid);
  write_pfm((fs::path(dir) / ("mwarp_" + name_b + "_" + name_a + ".pfm")).string(), warp.rev);
  write_png((fs::path(dir) / ("mwarp_" + name_b + "_" + name_a + "_valid.png")).string(), warp.rev_valid);
  std::printf("link: %zu shared keys; warps %s<->%s written to %s\n", shared, name_a.c_str(),
              name_b.c_str(), dir.c_str());
  return 0;
}

int cmd_transfer_edit(const GlobalOpts& g, const std::string& link_dir, const std::string& from_shot,
                      const std::string& edited_path, const std::string& out_dir) {
  std::string ldir = resolve(g, link_dir);
  std::ifstream in((fs::path(ldir) / "link.json").string());
  if (!in) throw io_error("missing link.json under " + ldir);
  json lj;
  in >> lj;
  require(lj["shots"].size() == 2, "link.json must list two shots");
  int from_idx = -1;
  for (int k = 0; k < 2; ++k)
    if (lj["shots"][k]["id"].get<std::string>() == from_shot) from_idx = k;
  require(from_idx >= 0, "shot '" + from_shot + "' not present in the link");
  int to_idx = 1 - from_idx;
  std::string from_id = lj["shots"][from_idx]["id"].get<std::string>();
  std::string to_id = lj["shots"][to_idx]["id"].get<std::string>();

  ShotModel src = load_shot_model(lj["shots"][from_idx]["model"].get<std::string>());
  ShotModel dst = load_shot_model(lj["shots"][to_idx]["model"].get<std::string>());

  MosaicWarp warp;
  warp.grid_a = src.grid;
  warp.grid_b = dst.grid;
  warp.fwd = read_pfm((fs::path(ldir) / ("mwarp_" + from_id + "_" + to_id + ".pfm")).string());
  warp.fwd_valid = load_mask_file((fs::path(ldir) / ("mwarp_" + from_id + "_" + to_id + "_valid.png")).string());
  warp.rev = read_pfm((fs::path(ldir) / ("mwarp_" + to_id + "_" + from_id + ".pfm")).string());
  warp.rev_valid = load_mask_file((fs::path(ldir) / ("mwarp_" + to_id + "_" + from_id + "_valid.png")).string());

  Image edited = load_frame_file(resolve(g, edited_path));
  EditDiff diff = diff_mosaic(src.mosaic, edited);
  TransferResult tr = transfer_edit(diff.delta, diff.alpha, warp);

  std::string dir = resolve(g, out_dir);
  fs::create_directories(fs::path(dir) / "frames");
  write_pfm((fs::path(dir) / "tdiff.pfm").string(), tr.delta);
  write_pfm((fs::path(dir) / "talpha.pfm").string(), tr.alpha);

  // Edited target mosaic for inspection.
  Image edited_dst = dst.mosaic.color;
  for (int j = 0; j < dst.grid.height; ++j)
    for (int i = 0; i < dst.grid.width; ++i)
      for (int c = 0; c < 3; ++c)
        edited_dst.at(i, j, c) += tr.delta.at(i, j, c) * tr.alpha.at(i, j);
  write_pfm((fs::path(dir) / "edited_mosaic.pfm").string(), edited_dst);

  // Project into the target shot's frames.
  require(!dst.provenance.source_manifest.empty(),
          "target model has no recorded manifest; re-solve with provenance");
  ShotManifest manifest = load_manifest(dst.provenance.source_manifest);
  ImageSequence seq = load_frames(manifest);
  EditDiff ddiff;
  ddiff.grid = dst.grid;
  ddiff.delta = tr.delta;
  ddiff.alpha = tr.alpha;
  parallel_for(seq.count(), [&](std::size_t t) {
    Image out = project_edit(ddiff, dst, static_cast<int>(t), seq.frames[t]);
    write_pfm((fs::path(dir) / "frames" / frame_name(static_cast<int>(t))).string(), out);
  });
  {
    json j{{"from", from_id}, {"to", to_id}, {"support_lost", tr.support_lost}};
    std::ofstream out((fs::path(dir) / "transfer.json").string());
    out << j.dump(2) << "\n";
  }
  std::printf("transfer-edit: %s -> %s, support lost %.1f%%, %d frames written to %s\n",
              from_id.c_str(), to_id.c_str(), 100.0 * tr.support_lost, seq.count(), dir.c_str());
  return 0;
}

int cmd_verify(const GlobalOpts& g, const std::string& model_dir) {
  std::string dir = resolve(g, model_dir);
  int failures = 0;
  auto report = [&](bool ok, const std::string& name, const std::string& detail) {
    std::printf("[%s] %s%s%s\n", ok ? "ok" : "FAIL", name.c_str(), detail.empty() ? "" : ": ",
                detail.c_str());
    if (!ok) ++failures;
  };

  ShotModel model = load_shot_model(dir);
  report(true, "load+validate", "all per-frame structures consistent");

  bool vis_ok = true;
  for (const auto& b : model.visibility.frames)
    for (float v : b.data) vis_ok &= (v >= 0.f && v <= 1.f);
  report(vis_ok, "visibility range", "values in [0,1]");

  bool mosaic_ok = true;
  for (float v : model.mosaic.color.data) mosaic_ok &= std::isfinite(v) && v >= 0.f && v <= 1.f;
  report(mosaic_ok, "mosaic range", "finite, clamped to [0,1]");

  // Warp/inverse round trip over texels that actually render: visible,
  // in-frame, positive Jacobian, and splat-covered in the inverse.
  std::size_t total = 0, good = 0;
  for (int t = 0; t < model.frame_count(); ++t) {
    InverseField inv = invert_mapping(model.warps.frames[t], model.grid, model.width, model.height);
    Image jac = jacobian_determinant(model.warps.frames[t]);
    // Round trips are well defined only where the warp keeps an injectivity
    // margin; use the same Jacobian floor convention as the mosaic warps.
    std::vector<float> jpos;
    for (float v : jac.data)
      if (v > 0.f) jpos.push_back(v);
    float j_floor = 0.f;
    if (!jpos.empty()) {
      std::nth_element(jpos.begin(), jpos.begin() + jpos.size() / 2, jpos.end());
      j_floor = 0.25f * jpos[jpos.size() / 2];
    }
    for (int j = 0; j < model.grid.height; ++j)
      for (int i = 0; i < model.grid.width; ++i) {
        if (model.visibility.frames[t].at(i, j) < 0.5f) continue;
        if (!model.mosaic.coverage.empty() && model.mosaic.coverage.at(i, j) <= 0.f)
          continue;  // no object content at this texel
        if (jac.at(i, j) <= j_floor) continue;
        double px = model.warps.frames[t].at(i, j, 0), py = model.warps.frames[t].at(i, j, 1);
        if (!in_frame(model.width, model.height, px, py)) continue;
        if (inv.valid.sample(px, py) < 0.99f) continue;
        Vec2 u = grid_to_unit(i, j, model.grid);
        double err = std::hypot((inv.coords.sample(px, py, 0) - u.x) * model.grid.width,
                                (inv.coords.sample(px, py, 1) - u.y) * model.grid.height);
        ++total;
        if (err <= 1.0) ++good;
      }
  }
  double frac = total ? static_cast<double>(good) / total : 1.0;
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.2f%% of visible texels within 1 texel", 100.0 * frac);
  report(frac >= 0.99, "warp/inverse round-trip", buf);

  // Energy checkpoints non-increasing within each level segment.
  bool monotone = true;
  std::string where;
  for (std::size_t i = 1; i < model.energy_log.size(); ++i) {
    const auto& prev = model.energy_log[i - 1];
    const auto& cur = model.energy_log[i];
    auto level_of = [](const std::string& s) {
      return s.rfind("L", 0) == 0 ? s.substr(0, s.find('/')) : std::string();
    };
    if (level_of(prev.stage) != level_of(cur.stage)) continue;
    if (cur.total > prev.total * (1.0 + 1e-9)) {
      monotone = false;
      where = cur.stage;
    }
  }
  report(monotone, "energy monotonicity",
         model.energy_log.empty() ? "no energy log" : (monotone ? "non-increasing" : "rises at " + where));

  bool cover_ok = model.mosaic.coverage.width == model.grid.width &&
                  model.mosaic.coverage.height == model.grid.height;
  for (float v : model.mosaic.coverage.data) cover_ok &= v >= 0.f;
  report(cover_ok, "coverage map", "non-negative, grid-sized");

  bool emb_ok = !model.embedding.entries.empty();
  for (const auto& e : model.embedding.entries)
    emb_ok &= std::isfinite(e.u.x) && std::isfinite(e.u.y) && e.u.x >= -0.01 && e.u.x <= 1.01 &&
              e.u.y >= -0.01 && e.u.y <= 1.01 && (e.partition == 1 || e.partition == 2);
  report(emb_ok, "embedding", "entries finite, inside Q");

  std::printf(failures ? "verify: %d check(s) FAILED\n" : "verify: all checks passed\n", failures);
  return failures ? 2 : 0;
}

json error_json(const std::string& kind, const std::string& what, int code) {
  return json{{"error", {{"kind", kind}, {"message", what}, {"code", code}}}};
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"mosaic-based video editing: unfold, solve, edit, transfer"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--workdir", g.workdir, "base directory for relative paths");
  app.add_option("--threads", g.threads, "worker threads (0 = hardware)");

  std::vector<std::string> argv_rec(argv, argv + argc);

  // --- synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic scene with ground truth");
  std::string s_out, s_size = "256x256", s_motion = "static", s_occ = "none", s_light = "none";
  int s_frames = 30, s_flow = 300, s_sem = 100;
  std::uint64_t s_seed = 7, s_tex_seed = 99;
  bool s_png = false;
  synth->add_option("--out", s_out, "output directory")->required();
  synth->add_option("--size", s_size, "frame size WxH");
  synth->add_option("--frames", s_frames, "frame count");
  synth->add_option("--motion", s_motion, "motion spec, e.g. tx=1,rot=0.004,bend=6,brate=0.15");
  synth->add_option("--occluder", s_occ, "occluder spec, e.g. rect:cx=64,cy=64,w=40,h=40,dx=2");
  synth->add_option("--lighting", s_light, "lighting spec, e.g. gain0=1,gain1=1.2");
  synth->add_option("--seed", s_seed, "scene seed");
  synth->add_option("--texture-seed", s_tex_seed, "texture/semantic-site seed (shared across shots)");
  synth->add_option("--flow-tracks", s_flow, "flow track count");
  synth->add_option("--semantic-tracks", s_sem, "semantic track count");
  synth->add_flag("--png", s_png, "write 8-bit PNG frames instead of PFM");

  // --- solve
  auto* solve = app.add_subcommand("solve", "solve a shot model from a manifest");
  std::string so_manifest, so_config, so_out, so_flow_dir;
  bool so_multires = false;
  std::vector<std::string> so_sets;
  std::optional<std::uint64_t> so_seed;
  double so_consistency = 1.0;
  solve->add_option("--manifest", so_manifest, "shot manifest JSON")->required();
  solve->add_option("--config", so_config, "solver config JSON");
  solve->add_option("--out", so_out, "output model directory")->required();
  solve->add_flag("--multires", so_multires, "coarse-to-fine solve");
  solve->add_option("--set", so_sets, "config override key=value (repeatable)");
  solve->add_option("--seed", so_seed, "override config seed");
  solve->add_option("--track-consistency", so_consistency,
                    "forward/backward agreement threshold in px");
  solve->add_option("--flow-dir", so_flow_dir, "external 2-channel PFM flow files for refinement");

  // --- render
  auto* render = app.add_subcommand("render", "re-render frames from a model and report PSNR");
  std::string r_model, r_out, r_manifest;
  render->add_option("--model", r_model, "model directory")->required();
  render->add_option("--out", r_out, "output directory")->required();
  render->add_option("--manifest", r_manifest, "override the recorded manifest");

  // --- apply-edit
  auto* apply = app.add_subcommand("apply-edit", "project an edited mosaic into all frames");
  std::string a_model, a_edit, a_out, a_manifest;
  apply->add_option("--model", a_model, "model directory")->required();
  apply->add_option("--edited-mosaic", a_edit, "edited mosaic (PFM or PNG, mosaic-sized)")->required();
  apply->add_option("--out", a_out, "output directory")->required();
  apply->add_option("--manifest", a_manifest, "override the recorded manifest");

  // --- link
  auto* link = app.add_subcommand("link", "build cross-shot mosaic warps via a universal embedding");
  std::vector<std::string> l_models;
  std::string l_out, l_config;
  std::vector<std::string> l_sets;
  std::optional<std::uint64_t> l_seed;
  link->add_option("--models", l_models, "two model directories")->expected(2)->required();
  link->add_option("--out", l_out, "link output directory")->required();
  link->add_option("--config", l_config, "solver config JSON");
  link->add_option("--set", l_sets, "config override key=value (repeatable)");
  link->add_option("--seed", l_seed, "override config seed");

  // --- transfer-edit
  auto* transfer = app.add_subcommand("transfer-edit", "transfer an edit to the linked shot");
  std::string t_link, t_from, t_edit, t_out;
  transfer->add_option("--link", t_link, "link directory")->required();
  transfer->add_option("--from", t_from, "source shot id")->required();
  transfer->add_option("--edited-mosaic", t_edit, "edited mosaic of the source shot")->required();
  transfer->add_option("--out", t_out, "output directory")->required();

  // --- verify
  auto* verify = app.add_subcommand("verify", "run the model invariant suite");
  std::string v_model;
  verify->add_option("--model", v_model, "model directory")->required();

  CLI11_PARSE(app, argc, argv);
  thread_count() = g.threads;

  try {
    if (synth->parsed())
      return cmd_synth(g, s_out, s_size, s_frames, s_motion, s_occ, s_light, s_seed, s_tex_seed,
                       s_flow, s_sem, s_png);
    if (solve->parsed())
      return cmd_solve(g, so_manifest, so_config, so_out, so_multires, so_sets, so_seed,
                       so_consistency, so_flow_dir, argv_rec);
    if (render->parsed()) return cmd_render(g, r_model, r_out, r_manifest);
    if (apply->parsed()) return cmd_apply_edit(g, a_model, a_edit, a_out, a_manifest);
    if (link->parsed()) return cmd_link(g, l_models, l_out, l_config, l_sets, l_seed);
    if (transfer->parsed()) return cmd_transfer_edit(g, t_link, t_from, t_edit, t_out);
    if (verify->parsed()) return cmd_verify(g, v_model);
  } catch (const mosaic::validation_error& e) {
    std::cerr << error_json("validation", e.what(), 2).dump() << "\n";
    return 2;
  } catch (const mosaic::divergence_error& e) {
    std::cerr << error_json("divergence", e.what(), 3).dump() << "\n";
    return 3;
  } catch (const mosaic::io_error& e) {
    std::cerr << error_json("io", e.what(), 4).dump() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << error_json("internal", e.what(), 1).dump() << "\n";
    return 1;
  }
  return 1;
}
