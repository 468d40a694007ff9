#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mosaic/errors.hpp"
#include "mosaic/image.hpp"

namespace mosaic {

// ---------------------------------------------------------------------------
// Mosaic grid: texel (i,j) centers map to the unit square Q.

struct MosaicGrid {
  int width = 0;   // texels
  int height = 0;  // texels
};

inline Vec2 grid_to_unit(int i, int j, const MosaicGrid& g) {
  require(i >= 0 && i < g.width && j >= 0 && j < g.height,
          "grid_to_unit: texel index out of range");
  return {(i + 0.5) / g.width, (j + 0.5) / g.height};
}

// Nearest texel index of a unit-square point.
inline std::pair<int, int> unit_to_grid(const Vec2& u, const MosaicGrid& g) {
  int i = static_cast<int>(std::floor(u.x * g.width));
  int j = static_cast<int>(std::floor(u.y * g.height));
  return {std::clamp(i, 0, g.width - 1), std::clamp(j, 0, g.height - 1)};
}

// Texel-unit (pixel-like) coordinates of a unit-square point: centers at
// integers, matching the Image sampling convention.
inline Vec2 unit_to_texel(const Vec2& u, const MosaicGrid& g) {
  return {u.x * g.width - 0.5, u.y * g.height - 0.5};
}

inline Vec2 texel_to_unit(const Vec2& p, const MosaicGrid& g) {
  return {(p.x + 0.5) / g.width, (p.y + 0.5) / g.height};
}

// Picks grid dimensions with w*h ~= scale*W*H (within 10%) and the given
// aspect ratio (defaults to W/H, overridden by the embedded track bounding
// box when one is known).
inline MosaicGrid choose_grid(int W, int H, double scale = 1.0,
                              std::optional<double> aspect = std::nullopt) {
  require(W >= 2 && H >= 2, "choose_grid: image dimensions must be >= 2");
  require(scale > 0.0, "choose_grid: scale must be positive");
  double target = scale * static_cast<double>(W) * H;
  double a = aspect.value_or(static_cast<double>(W) / H);
  if (!(a > 0.0) || !std::isfinite(a)) a = 1.0;
  int w = std::max(2, static_cast<int>(std::lround(std::sqrt(target * a))));
  int h = std::max(2, static_cast<int>(std::lround(target / w)));
  return {w, h};
}

// ---------------------------------------------------------------------------
// 2D affine maps and their least-squares fit from point pairs.

struct Affine2 {
  // row-major 2x3: [a00 a01 tx; a10 a11 ty]
  double m[6] = {1, 0, 0, 0, 1, 0};
  Vec2 operator()(const Vec2& q) const {
    return {m[0] * q.x + m[1] * q.y + m[2], m[3] * q.x + m[4] * q.y + m[5]};
  }
  Affine2 inverse() const {
    double det = m[0] * m[4] - m[1] * m[3];
    require(std::abs(det) > 1e-12, "affine inverse: singular");
    Affine2 r;
    r.m[0] = m[4] / det;
    r.m[1] = -m[1] / det;
    r.m[3] = -m[3] / det;
    r.m[4] = m[0] / det;
    r.m[2] = -(r.m[0] * m[2] + r.m[1] * m[5]);
    r.m[5] = -(r.m[3] * m[2] + r.m[4] * m[5]);
    return r;
  }
};

inline Affine2 fit_affine(const std::vector<std::pair<Vec2, Vec2>>& pairs) {
  require(pairs.size() >= 3, "fit_affine: need at least 3 pairs");
  // Normal equations of [x y 1] * [a b c]^T = px (and py), accumulated directly.
  double M[3][3] = {};
  double rx[3] = {}, ry[3] = {};
  for (const auto& [q, p] : pairs) {
    double row[3] = {q.x, q.y, 1.0};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) M[i][j] += row[i] * row[j];
      rx[i] += row[i] * p.x;
      ry[i] += row[i] * p.y;
    }
  }
  // 3x3 Gaussian elimination with partial pivoting.
  double aug[3][5];
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) aug[i][j] = M[i][j];
    aug[i][3] = rx[i];
    aug[i][4] = ry[i];
  }
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(aug[r][col]) > std::abs(aug[piv][col])) piv = r;
    require(std::abs(aug[piv][col]) > 1e-12, "fit_affine: degenerate points");
    if (piv != col)
      for (int j = 0; j < 5; ++j) std::swap(aug[piv][j], aug[col][j]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      double f = aug[r][col] / aug[col][col];
      for (int j = 0; j < 5; ++j) aug[r][j] -= f * aug[col][j];
    }
  }
  Affine2 a;
  a.m[0] = aug[0][3] / aug[0][0];
  a.m[1] = aug[1][3] / aug[1][1];
  a.m[2] = aug[2][3] / aug[2][2];
  a.m[3] = aug[0][4] / aug[0][0];
  a.m[4] = aug[1][4] / aug[1][1];
  a.m[5] = aug[2][4] / aug[2][2];
  return a;
}

// ---------------------------------------------------------------------------
// Tracks.

enum class TrackKind { Flow, Semantic };

struct TrackSample {
  int frame = 0;
  double x = 0.0;
  double y = 0.0;
  bool visible = true;
  // Optional backward-tracked position for the consistency filter.
  bool has_backward = false;
  double bx = 0.0;
  double by = 0.0;
};

struct Track {
  std::int64_t id = 0;
  TrackKind kind = TrackKind::Flow;
  std::optional<std::int64_t> semantic_key;
  std::vector<TrackSample> samples;  // sorted by frame, at most one per frame

  const TrackSample* sample_at(int frame) const {
    for (const auto& s : samples)
      if (s.frame == frame) return &s;
    return nullptr;
  }

  void validate(int frame_count = -1) const {
    require(!samples.empty(), "track " + std::to_string(id) + ": no samples");
    bool any_visible = false;
    int prev = -1;
    for (const auto& s : samples) {
      require(s.frame > prev, "track " + std::to_string(id) +
                                  ": samples not strictly ordered by frame");
      require(s.frame >= 0, "track " + std::to_string(id) + ": negative frame");
      if (frame_count >= 0)
        require(s.frame < frame_count,
                "track " + std::to_string(id) + ": frame index out of range");
      require(std::isfinite(s.x) && std::isfinite(s.y),
              "track " + std::to_string(id) + ": non-finite position");
      any_visible |= s.visible;
      prev = s.frame;
    }
    require(any_visible, "track " + std::to_string(id) + ": no visible sample");
    if (kind == TrackKind::Semantic)
      require(semantic_key.has_value(),
              "track " + std::to_string(id) + ": semantic track without key");
  }
};

using TrackSet = std::vector<Track>;

inline void validate_tracks(const TrackSet& tracks, int frame_count = -1) {
  std::map<std::int64_t, int> seen;
  for (const auto& t : tracks) {
    require(seen.emplace(t.id, 1).second,
            "duplicate track id " + std::to_string(t.id));
    t.validate(frame_count);
  }
}

// ---------------------------------------------------------------------------
// Image sequence with optional per-frame object masks (1-channel, 0/1).

struct ImageSequence {
  std::vector<Image> frames;
  std::vector<Image> masks;  // empty or one 1-channel mask per frame
  int width = 0;
  int height = 0;

  int count() const { return static_cast<int>(frames.size()); }
  bool has_masks() const { return !masks.empty(); }
  bool in_mask(int x, int y, int t) const {
    if (!has_masks()) return true;
    return masks[t].at(x, y) > 0.5f;
  }

  void validate() const {
    require(!frames.empty(), "sequence: no frames");
    for (const auto& f : frames)
      require(f.width == width && f.height == height && f.channels == 3,
              "sequence: frame dimensions inconsistent");
    if (!masks.empty()) {
      require(masks.size() == frames.size(),
              "sequence: mask count differs from frame count");
      for (const auto& m : masks)
        require(m.width == width && m.height == height && m.channels == 1,
                "sequence: mask dimensions inconsistent");
    }
  }
};

// ---------------------------------------------------------------------------
// Embedding of tracks into Q.

struct Embedding {
  struct Entry {
    std::int64_t id = 0;
    Vec2 u;            // normalized coordinates in Q
    int partition = 1; // 1 = flow, 2 = semantic
    std::optional<std::int64_t> semantic_key;
  };
  std::vector<Entry> entries;

  // Final value of the stress objective at the pre-normalization coordinates.
  double objective = 0.0;
  // Affine normalization into Q: u = (pre - offset) * scale (per axis).
  Vec2 norm_offset;
  Vec2 norm_scale{1.0, 1.0};
  // Pre-normalization bounding box (drives the mosaic grid aspect).
  Vec2 prenorm_min, prenorm_max;

  const Entry* find(std::int64_t id) const {
    for (const auto& e : entries)
      if (e.id == id) return &e;
    return nullptr;
  }

  Vec2 denormalize(const Vec2& u) const {
    return {u.x / (norm_scale.x != 0 ? norm_scale.x : 1.0) + norm_offset.x,
            u.y / (norm_scale.y != 0 ? norm_scale.y : 1.0) + norm_offset.y};
  }

  double prenorm_aspect() const {
    double w = prenorm_max.x - prenorm_min.x;
    double h = prenorm_max.y - prenorm_min.y;
    if (w <= 0 || h <= 0) return 1.0;
    return w / h;
  }
};

// ---------------------------------------------------------------------------
// Per-frame fields.

// Forward warps: per frame a (grid.width x grid.height) 2-channel field of
// image pixel coordinates. Inverse fields are built on demand.
struct WarpField {
  MosaicGrid grid;
  std::vector<Image> frames;      // 2-channel, grid-sized, pixel coords
  std::vector<Image> inverse;     // optional: 2-channel, WxH, unit coords
  std::vector<Image> inverse_ok;  // optional: 1-channel, WxH, splat coverage
  std::vector<std::uint8_t> constrained;  // per frame: had >= 3 visible tracks

  int count() const { return static_cast<int>(frames.size()); }
  bool has_inverse() const { return !inverse.empty(); }
};

struct VisibilityField {
  MosaicGrid grid;
  std::vector<Image> frames;  // 1-channel, grid-sized, values in [0,1]

  int count() const { return static_cast<int>(frames.size()); }
  // Thresholded binary view.
  bool visible(int i, int j, int t) const {
    return frames[t].at(i, j) >= 0.5f;
  }
};

struct Mosaic {
  MosaicGrid grid;
  Image color;     // 3-channel, grid-sized
  Image coverage;  // 1-channel, grid-sized, contributing-sample counts
};

// Per-frame affine lighting correction stored on a coarse grid
// (1/`factor` of frame resolution), bilinearly upsampled at evaluation.
struct LightingField {
  int factor = 8;
  int frame_width = 0;
  int frame_height = 0;
  std::vector<Image> gain;    // 3-channel coarse grids
  std::vector<Image> offset;  // 3-channel coarse grids

  bool active() const { return !gain.empty(); }
  int count() const { return static_cast<int>(gain.size()); }

  // Coarse-grid coordinates of a pixel.
  Vec2 coarse_coord(double x, double y, const Image& grid_img) const {
    double sx = static_cast<double>(frame_width) / grid_img.width;
    double sy = static_cast<double>(frame_height) / grid_img.height;
    return {(x + 0.5) / sx - 0.5, (y + 0.5) / sy - 0.5};
  }
  float gain_at(int t, double x, double y, int c) const {
    if (!active()) return 1.f;
    Vec2 g = coarse_coord(x, y, gain[t]);
    return gain[t].sample(g.x, g.y, c);
  }
  float offset_at(int t, double x, double y, int c) const {
    if (!active()) return 0.f;
    Vec2 g = coarse_coord(x, y, offset[t]);
    return offset[t].sample(g.x, g.y, c);
  }
};

// ---------------------------------------------------------------------------
// Solver configuration. Defaults are config-overridable and recorded in
// provenance. Fields with value 0 marked "auto" are resolved at solve time.

struct SolverConfig {
  // Energy weights.
  double lambda_b = 0.1;
  double lambda_c = 1e-4;

  // Embedding.
  double tau = 0.0;  // Gaussian distance scale (px^2); auto: (0.15*max(W,H))^2
  double mu1 = 1e-2;
  double mu2 = 1e-4;
  int l_min = 30;
  int l_max = 300;
  int pair_subsample_threshold = 2000;
  int pair_keep_top = 64;
  int pair_keep_random = 16;

  // Mapping interpolation.
  int knn = 8;  // K nearest neighbors in mosaic space
  int map_max_iters = 2000;
  double map_tol = 1e-6;  // gradient-norm stop
  bool map_warm_start = true;

  // Mosaic grid.
  double grid_scale = 1.0;  // w*h ~= grid_scale * W * H

  // Visibility estimation.
  int vis_iters = 300;
  double vis_lr = 0.05;
  double vis_tol = 1e-5;           // relative energy change stop
  double vis_residual_cost = 0.12; // invisible-cost threshold r0

  // Mosaic estimation.
  int mosaic_epochs = 50;
  int mosaic_batch = 4;
  double mosaic_lr = 0.02;
  double mosaic_lr_final = 1e-3;

  // Mapping refinement (built-in flow).
  int flow_levels = 3;
  int flow_iters = 50;
  double flow_alpha = 0.02;   // diffusion strength
  double flow_max_disp = 8.0; // px at full resolution
  double refine_guard = 0.01; // revert a frame if data energy worsens > 1%

  // Lighting.
  double light_lambda = 10.0;
  int light_factor = 8;

  // Pipeline.
  int n_sweeps = 2;
  std::string psf = "tent";

  // Multi-resolution.
  int pixel_budget = 230400;
  int refine_sweeps = 1;  // refinement passes per finer level

  // Multi-shot universal embedding.
  int universal_batch = 1024;
  int universal_epochs = 200;
  double universal_lr = 0.5;
  double universal_tau = 0.0;  // auto: (0.05*max(grid w,h))^2
  double correspondence_weight = 1.0;
  int structure_block = 8;  // one structure sample per 8x8 covered block

  // Reproducibility.
  std::uint64_t seed = 1234;

  double resolve_tau(int W, int H) const {
    if (tau > 0.0) return tau;
    double s = 0.15 * std::max(W, H);
    return s * s;
  }

  void validate() const {
    require(lambda_b >= 0 && lambda_c >= 0, "config: weights must be >= 0");
    require(l_min < l_max, "config: l_min must be < l_max");
    require(mu2 <= mu1, "config: mu2 must be <= mu1");
    require(knn >= 1, "config: knn must be >= 1");
    require(psf == "tent", "config: unsupported psf kernel '" + psf + "'");
    require(mosaic_batch >= 1 && mosaic_epochs >= 0, "config: bad mosaic SGD settings");
    require(pixel_budget > 0, "config: pixel_budget must be positive");
  }
};

// ---------------------------------------------------------------------------
// Energy bookkeeping: one row per accepted pipeline stage.

struct EnergyRow {
  std::string stage;
  int sweep = 0;
  double e_data = 0.0;
  double e_b = 0.0;
  double e_c = 0.0;
  double total = 0.0;
  double wall_seconds = 0.0;
};

using EnergyLog = std::vector<EnergyRow>;

// ---------------------------------------------------------------------------
// Provenance recorded with every saved model.

struct Provenance {
  std::string shot_id;
  std::string source_manifest;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> input_hashes;
  std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------
// The solved model of one shot.

struct ShotModel {
  int width = 0;   // image W
  int height = 0;  // image H
  MosaicGrid grid;
  Mosaic mosaic;
  WarpField warps;
  VisibilityField visibility;
  Embedding embedding;
  LightingField lighting;
  Provenance provenance;
  EnergyLog energy_log;

  int frame_count() const { return warps.count(); }

  void validate() const {
    int T = warps.count();
    require(T >= 1, "model: no frames");
    require(static_cast<int>(visibility.frames.size()) == T,
            "model: visibility frame count mismatch");
    require(mosaic.color.width == grid.width && mosaic.color.height == grid.height,
            "model: mosaic dimensions inconsistent with grid");
    for (const auto& w : warps.frames)
      require(w.width == grid.width && w.height == grid.height && w.channels == 2,
              "model: warp field dimensions inconsistent");
    for (const auto& b : visibility.frames)
      require(b.width == grid.width && b.height == grid.height && b.channels == 1,
              "model: visibility field dimensions inconsistent");
    if (lighting.active())
      require(lighting.count() == T, "model: lighting frame count mismatch");
  }
};

} // namespace mosaic
