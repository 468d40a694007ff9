#pragma once

#include <vector>

#include "mosaic/core.hpp"
#include "mosaic/solver.hpp"

namespace mosaic {

// ---------------------------------------------------------------------------
// Coarse-to-fine driver: full solve at the coarsest level, then per level
// upsample the model and run reduced-budget refinement sweeps.

// Smallest r such that (W / 2^r) * (H / 2^r) fits the pixel budget.
inline int plan_levels(int W, int H, long pixel_budget) {
  require(pixel_budget > 0, "plan_levels: budget must be positive");
  int r = 0;
  long w = W, h = H;
  while (w * h > pixel_budget && w > 2 && h > 2) {
    w /= 2;
    h /= 2;
    ++r;
  }
  return r;
}

inline ImageSequence downsample_sequence(const ImageSequence& seq, int r) {
  ImageSequence out = seq;
  for (int level = 0; level < r; ++level) {
    for (auto& f : out.frames) f = box_downsample(f);
    for (auto& m : out.masks) {
      m = box_downsample(m);
      for (auto& v : m.data) v = v >= 0.5f ? 1.f : 0.f;
    }
  }
  if (!out.frames.empty()) {
    out.width = out.frames[0].width;
    out.height = out.frames[0].height;
  }
  return out;
}

inline TrackSet downsample_tracks(const TrackSet& tracks, int r) {
  TrackSet out = tracks;
  const double s = 1.0 / static_cast<double>(1 << r);
  for (auto& t : out)
    for (auto& smp : t.samples) {
      smp.x *= s;
      smp.y *= s;
      smp.bx *= s;
      smp.by *= s;
    }
  return out;
}

// One level finer: color and visibility upsampled bilinearly, warps upsampled
// with their values scaled by the resolution ratio (a factor of two for even
// dimensions). The embedding is resolution-free and the lighting fields are
// dropped for re-fitting at the finer level.
inline ShotModel upsample_model(const ShotModel& coarse, int fine_w, int fine_h) {
  ShotModel fine;
  fine.width = fine_w;
  fine.height = fine_h;
  fine.grid = {coarse.grid.width * 2, coarse.grid.height * 2};
  fine.embedding = coarse.embedding;
  fine.provenance = coarse.provenance;
  fine.energy_log = coarse.energy_log;

  fine.mosaic.grid = fine.grid;
  fine.mosaic.color = resize_bilinear(coarse.mosaic.color, fine.grid.width, fine.grid.height);
  fine.mosaic.coverage =
      resize_bilinear(coarse.mosaic.coverage, fine.grid.width, fine.grid.height);

  const double sx = static_cast<double>(fine_w) / coarse.width;
  const double sy = static_cast<double>(fine_h) / coarse.height;
  fine.warps.grid = fine.grid;
  fine.warps.constrained = coarse.warps.constrained;
  fine.visibility.grid = fine.grid;
  for (int t = 0; t < coarse.frame_count(); ++t) {
    Image w = resize_bilinear(coarse.warps.frames[t], fine.grid.width, fine.grid.height);
    for (int j = 0; j < w.height; ++j)
      for (int i = 0; i < w.width; ++i) {
        w.at(i, j, 0) = static_cast<float>(w.at(i, j, 0) * sx);
        w.at(i, j, 1) = static_cast<float>(w.at(i, j, 1) * sy);
      }
    fine.warps.frames.push_back(std::move(w));
    fine.visibility.frames.push_back(
        resize_bilinear(coarse.visibility.frames[t], fine.grid.width, fine.grid.height));
  }
  return fine;
}

namespace detail {

inline SolverConfig refinement_config(const SolverConfig& base) {
  SolverConfig c = base;
  c.vis_iters = std::max(1, base.vis_iters / 2);
  c.mosaic_epochs = std::max(1, base.mosaic_epochs / 2);
  c.flow_iters = std::max(1, base.flow_iters / 2);
  return c;
}

} // namespace detail

// Refinement-only pass at one level, in the spec'd order, with stage guards
// and rows tagged by level.
inline void refine_level(const ImageSequence& seq, ShotModel& model, const SolverConfig& cfg,
                         std::mt19937_64& rng, int level) {
  detail::StageRunner runner(seq, model, cfg);
  std::string tag = "L" + std::to_string(level) + "/";

  auto snap_vis = [&] { return model.visibility.frames; };
  auto rest_vis = [&](std::vector<Image>&& s) { model.visibility.frames = std::move(s); };
  auto snap_mosaic = [&] { return model.mosaic.color; };
  auto rest_mosaic = [&](Image&& s) { model.mosaic.color = std::move(s); };
  auto snap_warp = [&] { return model.warps.frames; };
  auto rest_warp = [&](std::vector<Image>&& s) { model.warps.frames = std::move(s); };
  auto snap_light = [&] { return model.lighting; };
  auto rest_light = [&](LightingField&& s) { model.lighting = std::move(s); };

  for (int sweep = 1; sweep <= cfg.refine_sweeps; ++sweep) {
    runner.run(tag + "estimate_visibility", sweep,
               [&] { estimate_visibility(seq, model, cfg); }, snap_vis, rest_vis);
    runner.run(tag + "estimate_mosaic", sweep,
               [&] { estimate_mosaic(seq, model, cfg, rng); }, snap_mosaic, rest_mosaic);
    runner.run(tag + "refine_mapping", sweep,
               [&] { refine_mapping(seq, model, cfg); }, snap_warp, rest_warp);
    runner.run(tag + "fit_lighting", sweep,
               [&] { fit_lighting(seq, model, cfg); }, snap_light, rest_light);
  }
  for (const auto& name : runner.reverted())
    model.provenance.warnings.push_back("stage reverted by energy guard: " + tag + name);
}

// Full coarse-to-fine solve. With r = 0 this is exactly solve_shot.
inline ShotModel solve_multires(const ImageSequence& seq, const TrackSet& tracks,
                                const SolverConfig& cfg) {
  cfg.validate();
  seq.validate();
  const int r = plan_levels(seq.width, seq.height, cfg.pixel_budget);
  if (r == 0) return solve_shot(seq, tracks, cfg);

  // Per-level inputs, finest first.
  std::vector<ImageSequence> seqs(r + 1);
  seqs[0] = seq;
  for (int l = 1; l <= r; ++l) seqs[l] = downsample_sequence(seqs[l - 1], 1);

  SolverConfig coarse_cfg = cfg;
  coarse_cfg.grid_scale = cfg.grid_scale;  // grid follows the level resolution
  ShotModel model = solve_shot(seqs[r], downsample_tracks(tracks, r), coarse_cfg);
  // Tag the coarse rows by level.
  for (auto& row : model.energy_log)
    if (row.stage.rfind("L", 0) != 0) row.stage = "L" + std::to_string(r) + "/" + row.stage;

  std::mt19937_64 rng(cfg.seed ^ 0x8f1b5c7a3d92e461ull);
  SolverConfig fine_cfg = detail::refinement_config(cfg);
  for (int l = r - 1; l >= 0; --l) {
    model = upsample_model(model, seqs[l].width, seqs[l].height);
    refine_level(seqs[l], model, fine_cfg, rng, l);
  }
  model.validate();
  return model;
}

} // namespace mosaic
