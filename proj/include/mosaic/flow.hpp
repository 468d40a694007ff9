#pragma once

#include <cmath>
#include <vector>

#include "mosaic/image.hpp"

namespace mosaic {

// Coarse-to-fine diffusion-regularized optical flow (Horn-Schunck style).
// Returns f such that dst(x + f(x)) ~= src(x). Flow magnitude is clamped to
// max_disp at full resolution (scaled per level).

namespace detail {

inline Image luminance(const Image& img) {
  if (img.channels == 1) return img;
  Image y(img.width, img.height, 1);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      y.at(c, r) = (img.at(c, r, 0) + img.at(c, r, 1) + img.at(c, r, 2)) / 3.f;
  return y;
}

inline void hs_level(const Image& src, const Image& dst, Image& flow, int iters,
                     double alpha, double max_disp) {
  const int W = src.width, H = src.height;
  const double alpha2 = alpha * alpha;

  // Linearize around the current flow: warped dst, its gradients, residual.
  Image It(W, H, 1), Ix(W, H, 1), Iy(W, H, 1);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double fx = x + flow.at(x, y, 0), fy = y + flow.at(x, y, 1);
      It.at(x, y) = dst.sample(fx, fy) - src.at(x, y);
      Ix.at(x, y) = static_cast<float>(
          0.5 * (dst.sample(fx + 1.0, fy) - dst.sample(fx - 1.0, fy)));
      Iy.at(x, y) = static_cast<float>(
          0.5 * (dst.sample(fx, fy + 1.0) - dst.sample(fx, fy - 1.0)));
    }

  Image base = flow;  // linearization point
  Image next(W, H, 2);
  for (int it = 0; it < iters; ++it) {
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        // 4-neighbor average with border clamp.
        double ax = 0.0, ay = 0.0;
        int n = 0;
        const int nx[4] = {x - 1, x + 1, x, x};
        const int ny[4] = {y, y, y - 1, y + 1};
        for (int k = 0; k < 4; ++k) {
          if (nx[k] < 0 || nx[k] >= W || ny[k] < 0 || ny[k] >= H) continue;
          ax += flow.at(nx[k], ny[k], 0);
          ay += flow.at(nx[k], ny[k], 1);
          ++n;
        }
        ax /= n;
        ay /= n;
        double gx = Ix.at(x, y), gy = Iy.at(x, y);
        double resid = gx * (ax - base.at(x, y, 0)) + gy * (ay - base.at(x, y, 1)) + It.at(x, y);
        double denom = alpha2 + gx * gx + gy * gy;
        double ux = ax - gx * resid / denom;
        double uy = ay - gy * resid / denom;
        double mag = std::sqrt(ux * ux + uy * uy);
        if (mag > max_disp) {
          ux *= max_disp / mag;
          uy *= max_disp / mag;
        }
        next.at(x, y, 0) = static_cast<float>(ux);
        next.at(x, y, 1) = static_cast<float>(uy);
      }
    std::swap(flow.data, next.data);
  }
}

} // namespace detail

inline Image diffusion_flow(const Image& src_rgb, const Image& dst_rgb, int levels, int iters,
                            double alpha, double max_disp) {
  require(src_rgb.width == dst_rgb.width && src_rgb.height == dst_rgb.height,
          "diffusion_flow: dimension mismatch");
  Image src = detail::luminance(src_rgb);
  Image dst = detail::luminance(dst_rgb);

  std::vector<Image> src_pyr{src}, dst_pyr{dst};
  for (int l = 1; l < levels; ++l) {
    if (src_pyr.back().width < 8 || src_pyr.back().height < 8) break;
    src_pyr.push_back(box_downsample(src_pyr.back()));
    dst_pyr.push_back(box_downsample(dst_pyr.back()));
  }

  Image flow(src_pyr.back().width, src_pyr.back().height, 2);
  for (int l = static_cast<int>(src_pyr.size()) - 1; l >= 0; --l) {
    if (flow.width != src_pyr[l].width || flow.height != src_pyr[l].height) {
      Image up = resize_bilinear(flow, src_pyr[l].width, src_pyr[l].height);
      for (auto& v : up.data) v *= 2.f;
      flow = std::move(up);
    }
    detail::hs_level(src_pyr[l], dst_pyr[l], flow, iters, alpha,
                     max_disp / static_cast<double>(1 << l));
  }
  return flow;
}

} // namespace mosaic
