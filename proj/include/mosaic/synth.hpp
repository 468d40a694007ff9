#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mosaic/core.hpp"
#include "mosaic/errors.hpp"

namespace mosaic {

// ---------------------------------------------------------------------------
// Synthetic scenes: a procedurally textured sheet under a smooth parametric
// deformation (translation, rotation, bend), an optional moving opaque
// occluder, and a per-frame lighting gain ramp. The forward map is analytic,
// so tracks and ground truth are exact by construction.

struct MotionSpec {
  double tx = 0.0;        // px per frame
  double ty = 0.0;        // px per frame
  double rot = 0.0;       // radians per frame about the sheet center
  double theta0 = 0.0;    // initial rotation
  double bend_amp = 0.0;  // px
  double bend_freq = 1.0; // spatial cycles across the sheet
  double bend_rate = 0.0; // bend phase advance, radians per frame
  double bend_skew = 0.0; // phase shift across the sheet height (folds when extreme)
  double scale = 0.72;    // sheet extent as a fraction of min(W, H)
};

struct OccluderSpec {
  bool enabled = false;
  double cx = 0.0, cy = 0.0;  // center at t = 0, px
  double w = 0.0, h = 0.0;    // extents, px
  double dx = 0.0, dy = 0.0;  // px per frame
  int t0 = 0;                 // active frame window [t0, t1]
  int t1 = 1 << 30;
  double stripe_period = 8.0; // contrast stripes so residuals stay large
};

struct LightingSpec {
  double gain0 = 1.0;  // sheet gain at t = 0, linearly ramped to gain1
  double gain1 = 1.0;
};

struct SceneSpec {
  int width = 256;
  int height = 256;
  int frames = 2;
  MotionSpec motion;
  OccluderSpec occluder;
  LightingSpec lighting;
  int n_flow_tracks = 300;
  int n_semantic_tracks = 100;
  std::uint64_t seed = 7;
  std::uint64_t texture_seed = 99;  // fixes texture and semantic sites across shots
  double background = 0.3;
  // The object mask marks the trackable interior of the sheet: texture
  // region [mask_margin, 1 - mask_margin]^2 projected into the frame.
  double mask_margin = 0.06;
};

// Analytic ground truth: exact mappings, occlusion and lighting queries.
class GroundTruth {
public:
  GroundTruth() = default;
  explicit GroundTruth(const SceneSpec& spec) : spec_(spec) {}

  const SceneSpec& spec() const { return spec_; }

  // Texture site q in [0,1]^2 -> image pixel position at frame t.
  Vec2 map_site(const Vec2& q, int t) const {
    const auto& m = spec_.motion;
    double theta = m.theta0 + m.rot * t;
    double ex = 0.5 * m.scale * std::min(spec_.width, spec_.height);
    double ey = ex;
    double lx = (q.x - 0.5) * 2.0 * ex;
    double ly = (q.y - 0.5) * 2.0 * ey;
    double px = std::cos(theta) * lx - std::sin(theta) * ly;
    double py = std::sin(theta) * lx + std::cos(theta) * ly;
    double bend = bend_amount(t) *
                  std::sin(2.0 * M_PI * m.bend_freq * q.x + m.bend_skew * q.y);
    return {0.5 * (spec_.width - 1) + m.tx * t + px,
            0.5 * (spec_.height - 1) + m.ty * t + py + bend};
  }

  // Inverse of map_site by fixed-point iteration on the bend term.
  // Returns false when the pixel lies off the sheet.
  bool invert(const Vec2& p, int t, Vec2& q_out) const {
    const auto& m = spec_.motion;
    double theta = m.theta0 + m.rot * t;
    double ex = 0.5 * m.scale * std::min(spec_.width, spec_.height);
    double cx = 0.5 * (spec_.width - 1) + m.tx * t;
    double cy = 0.5 * (spec_.height - 1) + m.ty * t;
    double B = bend_amount(t);
    Vec2 q{0.5, 0.5};
    for (int it = 0; it < 40; ++it) {
      double bend = B * std::sin(2.0 * M_PI * m.bend_freq * q.x + m.bend_skew * q.y);
      double rx = p.x - cx;
      double ry = p.y - cy - bend;
      double lx = std::cos(theta) * rx + std::sin(theta) * ry;
      double ly = -std::sin(theta) * rx + std::cos(theta) * ry;
      Vec2 next{lx / (2.0 * ex) + 0.5, ly / (2.0 * ex) + 0.5};
      double step = std::abs(next.x - q.x) + std::abs(next.y - q.y);
      q = next;
      if (step < 1e-12) break;
    }
    q_out = q;
    return q.x >= 0.0 && q.x <= 1.0 && q.y >= 0.0 && q.y <= 1.0;
  }

  bool occluder_covers(const Vec2& p, int t) const {
    const auto& o = spec_.occluder;
    if (!o.enabled || t < o.t0 || t > o.t1) return false;
    double cx = o.cx + o.dx * t;
    double cy = o.cy + o.dy * t;
    return std::abs(p.x - cx) <= 0.5 * o.w && std::abs(p.y - cy) <= 0.5 * o.h;
  }

  // Whether the surface point q is seen in frame t (in frame and unoccluded).
  bool site_visible(const Vec2& q, int t) const {
    Vec2 p = map_site(q, t);
    if (!in_frame(spec_.width, spec_.height, p.x, p.y)) return false;
    return !occluder_covers(p, t);
  }

  double gain(int t) const {
    if (spec_.frames <= 1) return spec_.lighting.gain0;
    double a = static_cast<double>(t) / (spec_.frames - 1);
    return spec_.lighting.gain0 + a * (spec_.lighting.gain1 - spec_.lighting.gain0);
  }

  double bend_amount(int t) const {
    const auto& m = spec_.motion;
    if (m.bend_rate == 0.0) return m.bend_amp == 0.0 ? 0.0 : m.bend_amp;
    return m.bend_amp * std::sin(m.bend_rate * t);
  }

private:
  SceneSpec spec_;
};

struct SyntheticScene {
  ImageSequence sequence;
  TrackSet tracks;
  GroundTruth truth;
  Image texture;                         // the sheet's texture map
  std::map<std::int64_t, Vec2> sites;    // track id -> texture site
};

namespace detail {

// Band-limited texture: low- to mid-frequency sinusoid mix, smooth enough
// that bilinear resampling stays well above 50 dB.
inline Image make_texture(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  struct Wave { double fx, fy, phase, amp; int channel; };
  std::vector<Wave> waves;
  for (int c = 0; c < 3; ++c) {
    for (int k = 0; k < 14; ++k) {
      double f = 1.0 + 15.0 * std::pow(unif(rng), 1.6);
      double ang = 2.0 * M_PI * unif(rng);
      waves.push_back({f * std::cos(ang), f * std::sin(ang),
                       2.0 * M_PI * unif(rng), 0.55 / (1.0 + 0.35 * f), c});
    }
  }
  Image tex(w, h, 3, 0.5f);
  for (int y = 0; y < h; ++y) {
    double v = (y + 0.5) / h;
    for (int x = 0; x < w; ++x) {
      double u = (x + 0.5) / w;
      double acc[3] = {0.0, 0.0, 0.0};
      for (const auto& wv : waves)
        acc[wv.channel] += wv.amp * std::sin(2.0 * M_PI * (wv.fx * u + wv.fy * v) + wv.phase);
      for (int c = 0; c < 3; ++c)
        tex.at(x, y, c) = static_cast<float>(std::clamp(0.5 + 0.36 * acc[c], 0.04, 0.96));
    }
  }
  return tex;
}

inline float occluder_color(double px, double py, const OccluderSpec& o, int channel) {
  double s = (px + py) / std::max(1.0, o.stripe_period);
  bool onstripe = (static_cast<long long>(std::floor(s)) % 2) == 0;
  float base = onstripe ? 0.92f : 0.08f;
  return channel == 2 ? 1.f - base : base;  // blue-tinted stripes
}

} // namespace detail

// Renders the scene, samples tracks and packages exact ground truth.
// Deterministic for a fixed spec. Rejects motions that fold the sheet over.
inline SyntheticScene generate_synthetic_scene(const SceneSpec& spec) {
  require(spec.width >= 32 && spec.height >= 32, "scene: dimensions must be >= 32");
  require(spec.frames >= 2, "scene: need at least 2 frames");

  SyntheticScene scene;
  scene.truth = GroundTruth(spec);
  const GroundTruth& gt = scene.truth;

  // Fold-over check: the bend shear must keep the analytic Jacobian positive.
  for (int t = 0; t < spec.frames; ++t) {
    for (int gy = 0; gy <= 16; ++gy) {
      for (int gx = 0; gx <= 16; ++gx) {
        Vec2 q{gx / 16.0, gy / 16.0};
        const double h = 1e-4;
        Vec2 dx = (gt.map_site({q.x + h, q.y}, t) - gt.map_site({q.x - h, q.y}, t)) * (0.5 / h);
        Vec2 dy = (gt.map_site({q.x, q.y + h}, t) - gt.map_site({q.x, q.y - h}, t)) * (0.5 / h);
        double det = dx.x * dy.y - dx.y * dy.x;
        if (det <= 0.0)
          throw validation_error("scene: degenerate motion (mapping fold-over at frame " +
                                 std::to_string(t) + ")");
      }
    }
  }

  scene.texture = detail::make_texture(spec.width, spec.height, spec.texture_seed);

  // Frames and masks: inverse-map each pixel onto the sheet, painter's order
  // puts the occluder in front. The mask marks the sheet's full projected
  // support, occluded or not.
  scene.sequence.width = spec.width;
  scene.sequence.height = spec.height;
  for (int t = 0; t < spec.frames; ++t) {
    Image frame(spec.width, spec.height, 3, static_cast<float>(spec.background));
    Image mask(spec.width, spec.height, 1, 0.f);
    double g = gt.gain(t);
    const double mm = spec.mask_margin;
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        Vec2 q;
        if (gt.invert({static_cast<double>(x), static_cast<double>(y)}, t, q)) {
          if (q.x >= mm && q.x <= 1.0 - mm && q.y >= mm && q.y <= 1.0 - mm)
            mask.at(x, y) = 1.f;
          for (int c = 0; c < 3; ++c) {
            double v = scene.texture.sample(q.x * spec.width - 0.5, q.y * spec.height - 0.5, c);
            frame.at(x, y, c) = static_cast<float>(std::clamp(v * g, 0.0, 1.0));
          }
        }
        if (gt.occluder_covers({static_cast<double>(x), static_cast<double>(y)}, t))
          for (int c = 0; c < 3; ++c)
            frame.at(x, y, c) = detail::occluder_color(x, y, spec.occluder, c);
      }
    }
    scene.sequence.frames.push_back(std::move(frame));
    scene.sequence.masks.push_back(std::move(mask));
  }

  // Flow tracks at seeded random sites; semantic tracks on a fixed lattice
  // keyed by lattice index, stable across shots of the same texture.
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.01, 0.99);
  std::int64_t next_id = 0;
  auto add_track = [&](const Vec2& q, TrackKind kind, std::optional<std::int64_t> key) {
    Track tr;
    tr.id = next_id++;
    tr.kind = kind;
    tr.semantic_key = key;
    bool any_visible = false;
    for (int t = 0; t < spec.frames; ++t) {
      Vec2 p = gt.map_site(q, t);
      TrackSample s;
      s.frame = t;
      s.x = p.x;
      s.y = p.y;
      s.visible = gt.site_visible(q, t);
      any_visible |= s.visible;
      tr.samples.push_back(s);
    }
    if (!any_visible) return;  // site never seen; skip it
    scene.sites[tr.id] = q;
    scene.tracks.push_back(std::move(tr));
  };

  for (int i = 0; i < spec.n_flow_tracks; ++i)
    add_track({unif(rng), unif(rng)}, TrackKind::Flow, std::nullopt);

  // Silhouette ring: flow tracks strung along the sheet boundary keep the
  // interpolated warp pinned out to the rim.
  {
    int per_edge = std::max(8, 2 * static_cast<int>(std::ceil(std::sqrt(
                                     static_cast<double>(std::max(1, spec.n_flow_tracks))))));
    const double inset = 0.008;
    for (int e = 0; e < per_edge; ++e) {
      double s = (e + 0.5) / per_edge;
      add_track({s, inset}, TrackKind::Flow, std::nullopt);
      add_track({s, 1.0 - inset}, TrackKind::Flow, std::nullopt);
      add_track({inset, s}, TrackKind::Flow, std::nullopt);
      add_track({1.0 - inset, s}, TrackKind::Flow, std::nullopt);
    }
  }

  if (spec.n_semantic_tracks > 0) {
    int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(spec.n_semantic_tracks))));
    int key = 0;
    for (int j = 0; j < side && key < spec.n_semantic_tracks; ++j)
      for (int i = 0; i < side && key < spec.n_semantic_tracks; ++i, ++key) {
        Vec2 q{0.02 + 0.96 * (side == 1 ? 0.5 : static_cast<double>(i) / (side - 1)),
               0.02 + 0.96 * (side == 1 ? 0.5 : static_cast<double>(j) / (side - 1))};
        add_track(q, TrackKind::Semantic, key);
      }
  }

  validate_tracks(scene.tracks, spec.frames);
  scene.sequence.validate();
  return scene;
}

} // namespace mosaic
