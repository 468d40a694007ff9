#pragma once

#include <cmath>
#include <vector>

#include "mosaic/core.hpp"
#include "mosaic/warpfield.hpp"

namespace mosaic {

// Pixels with splat weight below this are uncovered.
constexpr double kCoverEps = 1e-8;
// A pixel is also uncovered when the visibility-weighted mass falls below
// this fraction of the geometric splat mass: the relaxed b never reaches an
// exact zero, so "all contributors essentially invisible" must threshold.
constexpr double kCoverFrac = 0.3;

struct RenderedFrame {
  Image color;   // payload channels
  Image weight;  // denominator sum_u A(u,x) b(u)
  Image geometry;  // sum_u A(u,x), independent of visibility

  bool covered(int x, int y) const {
    double d = weight.at(x, y);
    if (d <= kCoverEps) return false;
    double g = geometry.empty() ? 0.0 : geometry.at(x, y);
    return g <= kCoverEps || d > kCoverFrac * g;
  }
};

// Forward model: out(x) = sum_u A(u,x) b(u) P(u) / sum_u A(u,x) b(u), with
// A(u,x) = tent(w(u) - x) * max(J(u), 0). The tent kernel has radius 1 px, so
// each texel touches its four bilinear neighbors. Null visibility means b = 1.
inline RenderedFrame render_field(const Image& payload, const Image& warp, const Image& jac,
                                  const Image* visibility, int W, int H) {
  require(warp.channels == 2, "render_field: warp must be 2-channel");
  require(payload.width == warp.width && payload.height == warp.height,
          "render_field: payload and warp dimensions differ");
  const int C = payload.channels;
  RenderedFrame out;
  out.color = Image(W, H, C);
  out.weight = Image(W, H, 1);
  out.geometry = Image(W, H, 1);

  std::vector<double> num(static_cast<std::size_t>(W) * H * C, 0.0);
  std::vector<double> den(static_cast<std::size_t>(W) * H, 0.0);
  std::vector<double> geo(static_cast<std::size_t>(W) * H, 0.0);

  for (int j = 0; j < warp.height; ++j)
    for (int i = 0; i < warp.width; ++i) {
      double J = std::max(0.0, static_cast<double>(jac.at(i, j)));
      if (J <= 0.0) continue;
      double px = warp.at(i, j, 0), py = warp.at(i, j, 1);
      if (!std::isfinite(px) || !std::isfinite(py)) continue;
      double b = visibility ? visibility->at(i, j) : 1.0;
      int x0 = static_cast<int>(std::floor(px));
      int y0 = static_cast<int>(std::floor(py));
      for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) {
          int x = x0 + dx, y = y0 + dy;
          if (x < 0 || x >= W || y < 0 || y >= H) continue;
          double tent = (1.0 - std::abs(px - x)) * (1.0 - std::abs(py - y));
          if (tent <= 0.0) continue;
          std::size_t pix = static_cast<std::size_t>(y) * W + x;
          geo[pix] += tent * J;
          if (b <= 0.0) continue;
          double a = tent * J * b;
          for (int c = 0; c < C; ++c) num[pix * C + c] += a * payload.at(i, j, c);
          den[pix] += a;
        }
    }

  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      std::size_t pix = static_cast<std::size_t>(y) * W + x;
      out.weight.at(x, y) = static_cast<float>(den[pix]);
      out.geometry.at(x, y) = static_cast<float>(geo[pix]);
      if (den[pix] > kCoverEps)
        for (int c = 0; c < C; ++c)
          out.color.at(x, y, c) = static_cast<float>(num[pix * C + c] / den[pix]);
    }
  return out;
}

inline RenderedFrame render_frame(const ShotModel& model, int t) {
  Image jac = jacobian_determinant(model.warps.frames[t]);
  return render_field(model.mosaic.color, model.warps.frames[t], jac,
                      &model.visibility.frames[t], model.width, model.height);
}

// Lighting-corrected value of a rendered pixel.
inline double corrected_value(const RenderedFrame& r, const LightingField* light, int t,
                              int x, int y, int c) {
  double v = r.color.at(x, y, c);
  if (light && light->active())
    v = light->gain_at(t, x, y, c) * v + light->offset_at(t, x, y, c);
  return v;
}

// ---------------------------------------------------------------------------
// Data energy: L1 over covered, in-mask pixels.

struct DataEnergy {
  double total = 0.0;
  double per_pixel_mean = 0.0;
  std::size_t pixels = 0;     // covered, in-mask
  std::size_t uncovered = 0;  // in-mask but not covered
};

inline DataEnergy data_energy_frame(const Image& frame, const RenderedFrame& rendered,
                                    const Image* mask, const LightingField* light, int t) {
  DataEnergy e;
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x) {
      if (mask && mask->at(x, y) <= 0.5f) continue;
      if (!rendered.covered(x, y)) {  // uncovered pixels are excluded from the sum
        ++e.uncovered;
        continue;
      }
      for (int c = 0; c < frame.channels; ++c)
        e.total += std::abs(corrected_value(rendered, light, t, x, y, c) - frame.at(x, y, c));
      ++e.pixels;
    }
  e.per_pixel_mean = e.pixels ? e.total / e.pixels : 0.0;
  return e;
}

// Tikhonov energy of one field: squared forward differences over the grid.
inline double tikhonov_energy(const Image& b) {
  double acc = 0.0;
  for (int y = 0; y < b.height; ++y)
    for (int x = 0; x < b.width; ++x) {
      double v = b.at(x, y);
      if (x + 1 < b.width) {
        double d = b.at(x + 1, y) - v;
        acc += d * d;
      }
      if (y + 1 < b.height) {
        double d = b.at(x, y + 1) - v;
        acc += d * d;
      }
    }
  return acc;
}

// Its gradient, accumulated into grad (scaled by `scale`).
inline void add_tikhonov_gradient(const Image& b, double scale, Image& grad) {
  for (int y = 0; y < b.height; ++y)
    for (int x = 0; x < b.width; ++x) {
      double v = b.at(x, y);
      double g = 0.0;
      if (x + 1 < b.width) g += 2.0 * (v - b.at(x + 1, y));
      if (x > 0) g += 2.0 * (v - b.at(x - 1, y));
      if (y + 1 < b.height) g += 2.0 * (v - b.at(x, y + 1));
      if (y > 0) g += 2.0 * (v - b.at(x, y - 1));
      grad.at(x, y) += static_cast<float>(scale * g);
    }
}

inline double l2_energy(const Image& img) {
  double acc = 0.0;
  for (float v : img.data) acc += static_cast<double>(v) * v;
  return acc;
}

// Double-precision render-and-sum of the frame data term, with no float
// round-trip of the reconstruction; the finite-difference gradient checks
// difference this.
inline double data_energy_exact(const Image& payload, const Image& warp, const Image& jac,
                                const Image& vis, const Image& frame, const Image* mask,
                                const LightingField* light, int t) {
  const int W = frame.width, H = frame.height, C = payload.channels;
  std::vector<double> num(static_cast<std::size_t>(W) * H * C, 0.0);
  std::vector<double> den(static_cast<std::size_t>(W) * H, 0.0);
  std::vector<double> geo(static_cast<std::size_t>(W) * H, 0.0);
  for (int j = 0; j < warp.height; ++j)
    for (int i = 0; i < warp.width; ++i) {
      double b = vis.at(i, j);
      double J = std::max(0.0, static_cast<double>(jac.at(i, j)));
      if (J <= 0.0) continue;
      double px = warp.at(i, j, 0), py = warp.at(i, j, 1);
      if (!std::isfinite(px) || !std::isfinite(py)) continue;
      int x0 = static_cast<int>(std::floor(px));
      int y0 = static_cast<int>(std::floor(py));
      for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) {
          int x = x0 + dx, y = y0 + dy;
          if (x < 0 || x >= W || y < 0 || y >= H) continue;
          double tent = (1.0 - std::abs(px - x)) * (1.0 - std::abs(py - y));
          if (tent <= 0.0) continue;
          std::size_t pix = static_cast<std::size_t>(y) * W + x;
          geo[pix] += tent * J;
          if (b <= 0.0) continue;
          double a = tent * J * b;
          for (int c = 0; c < C; ++c) num[pix * C + c] += a * payload.at(i, j, c);
          den[pix] += a;
        }
    }
  double e = 0.0;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      std::size_t pix = static_cast<std::size_t>(y) * W + x;
      if (den[pix] <= kCoverEps) continue;
      if (geo[pix] > kCoverEps && den[pix] <= kCoverFrac * geo[pix]) continue;
      if (mask && mask->at(x, y) <= 0.5f) continue;
      for (int c = 0; c < C; ++c) {
        double v = num[pix * C + c] / den[pix];
        if (light && light->active())
          v = light->gain_at(t, x, y, c) * v + light->offset_at(t, x, y, c);
        e += std::abs(v - frame.at(x, y, c));
      }
    }
  return e;
}

// ---------------------------------------------------------------------------
// Analytic gradients of the data term through the normalized splat model.
// sign convention: sign(0) = 0.

namespace detail {

inline double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Per-pixel factor sign(corrected - I) * gain / D for covered, in-mask pixels.
inline Image pixel_sign_field(const Image& frame, const RenderedFrame& rendered,
                              const Image* mask, const LightingField* light, int t) {
  Image s(frame.width, frame.height, frame.channels + 1);  // channels + 1/D plane
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x) {
      if (!rendered.covered(x, y)) continue;
      if (mask && mask->at(x, y) <= 0.5f) continue;
      for (int c = 0; c < frame.channels; ++c) {
        double gain = (light && light->active()) ? light->gain_at(t, x, y, c) : 1.0;
        double corr = corrected_value(rendered, light, t, x, y, c);
        s.at(x, y, c) = static_cast<float>(sgn(corr - frame.at(x, y, c)) * gain);
      }
      s.at(x, y, frame.channels) = static_cast<float>(1.0 / rendered.weight.at(x, y));
    }
  return s;
}

} // namespace detail

// dE_data/dC for frame t, accumulated into grad (3-channel grid image).
inline void accumulate_mosaic_gradient(const Image& frame, const Image& warp, const Image& jac,
                                       const Image& vis, const RenderedFrame& rendered,
                                       const Image* mask, const LightingField* light, int t,
                                       Image& grad) {
  const int W = frame.width, H = frame.height;
  Image s = detail::pixel_sign_field(frame, rendered, mask, light, t);
  const int C = frame.channels;
  for (int j = 0; j < warp.height; ++j)
    for (int i = 0; i < warp.width; ++i) {
      double b = vis.at(i, j);
      if (b <= 0.0) continue;
      double J = std::max(0.0, static_cast<double>(jac.at(i, j)));
      if (J <= 0.0) continue;
      double px = warp.at(i, j, 0), py = warp.at(i, j, 1);
      if (!std::isfinite(px) || !std::isfinite(py)) continue;
      int x0 = static_cast<int>(std::floor(px));
      int y0 = static_cast<int>(std::floor(py));
      for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) {
          int x = x0 + dx, y = y0 + dy;
          if (x < 0 || x >= W || y < 0 || y >= H) continue;
          double inv_d = s.at(x, y, C);
          if (inv_d == 0.0) continue;
          double tent = (1.0 - std::abs(px - x)) * (1.0 - std::abs(py - y));
          if (tent <= 0.0) continue;
          double ab = tent * J * b * inv_d;
          for (int c = 0; c < C; ++c)
            grad.at(i, j, c) += static_cast<float>(s.at(x, y, c) * ab);
        }
    }
}

// dE_data/db for frame t through the normalized splat model, with its own
// double-precision forward pass (this route exists for gradient checks; note
// it integrates to zero over each pixel's footprint, so it carries no uniform
// visibility signal).
inline Image visibility_render_gradient(const Image& frame, const Image& mosaic_color,
                                        const Image& warp, const Image& jac, const Image& vis,
                                        const Image* mask, const LightingField* light, int t) {
  const int W = frame.width, H = frame.height;
  const int C = frame.channels;
  std::vector<double> num(static_cast<std::size_t>(W) * H * C, 0.0);
  std::vector<double> den(static_cast<std::size_t>(W) * H, 0.0);
  std::vector<double> geo(static_cast<std::size_t>(W) * H, 0.0);

  auto splat = [&](int i, int j, auto&& fn) {
    double J = std::max(0.0, static_cast<double>(jac.at(i, j)));
    if (J <= 0.0) return;
    double px = warp.at(i, j, 0), py = warp.at(i, j, 1);
    if (!std::isfinite(px) || !std::isfinite(py)) return;
    int x0 = static_cast<int>(std::floor(px));
    int y0 = static_cast<int>(std::floor(py));
    for (int dy = 0; dy <= 1; ++dy)
      for (int dx = 0; dx <= 1; ++dx) {
        int x = x0 + dx, y = y0 + dy;
        if (x < 0 || x >= W || y < 0 || y >= H) continue;
        double tent = (1.0 - std::abs(px - x)) * (1.0 - std::abs(py - y));
        if (tent > 0.0) fn(x, y, tent * J);
      }
  };

  for (int j = 0; j < warp.height; ++j)
    for (int i = 0; i < warp.width; ++i) {
      double b = vis.at(i, j);
      splat(i, j, [&](int x, int y, double a) {
        std::size_t pix = static_cast<std::size_t>(y) * W + x;
        geo[pix] += a;
        if (b <= 0.0) return;
        for (int c = 0; c < C; ++c) num[pix * C + c] += a * b * mosaic_color.at(i, j, c);
        den[pix] += a * b;
      });
    }

  Image grad(warp.width, warp.height, 1);
  for (int j = 0; j < warp.height; ++j)
    for (int i = 0; i < warp.width; ++i) {
      double acc = 0.0;
      splat(i, j, [&](int x, int y, double a) {
        std::size_t pix = static_cast<std::size_t>(y) * W + x;
        if (den[pix] <= kCoverEps) return;
        if (geo[pix] > kCoverEps && den[pix] <= kCoverFrac * geo[pix]) return;
        if (mask && mask->at(x, y) <= 0.5f) return;
        for (int c = 0; c < C; ++c) {
          double ihat = num[pix * C + c] / den[pix];
          double gain = (light && light->active()) ? light->gain_at(t, x, y, c) : 1.0;
          double corr = (light && light->active())
                            ? gain * ihat + light->offset_at(t, x, y, c)
                            : ihat;
          acc += detail::sgn(corr - frame.at(x, y, c)) * gain * a *
                 (mosaic_color.at(i, j, c) - ihat) / den[pix];
        }
      });
      grad.at(i, j) = static_cast<float>(acc);
    }
  return grad;
}

} // namespace mosaic
