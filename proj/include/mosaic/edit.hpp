#pragma once

#include <cmath>

#include "mosaic/core.hpp"
#include "mosaic/render.hpp"

namespace mosaic {

// ---------------------------------------------------------------------------
// Edit diffs: the signed difference between an edited and original mosaic,
// the only payload that is ever projected into frames.

struct EditDiff {
  MosaicGrid grid;
  Image delta;  // 3-channel signed RGB
  Image alpha;  // 1-channel coverage in [0,1]

  bool empty() const {
    for (float v : alpha.data)
      if (v > 0.f) return false;
    return true;
  }
};

// delta = edited - original; alpha = 1 on texels with any |delta| >= 1e-4,
// feathered inward by a 1-texel blur so it never leaks outside the support.
inline EditDiff diff_mosaic(const Mosaic& original, const Image& edited) {
  require(edited.width == original.color.width && edited.height == original.color.height &&
              edited.channels == 3,
          "diff_mosaic: dimension mismatch");
  EditDiff d;
  d.grid = original.grid;
  d.delta = Image(edited.width, edited.height, 3);
  d.alpha = Image(edited.width, edited.height, 1);

  Image support(edited.width, edited.height, 1);
  for (int y = 0; y < edited.height; ++y)
    for (int x = 0; x < edited.width; ++x) {
      float mx = 0.f;
      for (int c = 0; c < 3; ++c) {
        float v = edited.at(x, y, c) - original.color.at(x, y, c);
        d.delta.at(x, y, c) = v;
        mx = std::max(mx, std::abs(v));
      }
      support.at(x, y) = mx >= 1e-4f ? 1.f : 0.f;
    }

  for (int y = 0; y < edited.height; ++y)
    for (int x = 0; x < edited.width; ++x) {
      if (support.at(x, y) <= 0.f) continue;  // alpha stays 0 off-support
      double acc = 0.0, wsum = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          int nx = x + dx, ny = y + dy;
          double w = (dx == 0 ? 2.0 : 1.0) * (dy == 0 ? 2.0 : 1.0);
          wsum += w;
          if (support.in_bounds(nx, ny)) acc += w * support.at(nx, ny);
        }
      d.alpha.at(x, y) = static_cast<float>(acc / wsum);
    }
  return d;
}

// Projects an edit diff into frame t and composites it over the original:
//   out = I + gain * projected_delta * projected_alpha.
// The delta and alpha render through the shot's warp with the thresholded
// visibility, so frames where a texel is hidden are untouched (bitwise).
// Lighting gain scales the delta; the offset is already part of the scene.
inline Image project_edit(const EditDiff& diff, const ShotModel& model, int t,
                          const Image& original_frame) {
  require(diff.grid.width == model.grid.width && diff.grid.height == model.grid.height,
          "project_edit: diff grid does not match the model");
  Image out = original_frame;
  if (diff.empty()) return out;

  Image binary_vis(model.grid.width, model.grid.height, 1);
  for (std::size_t k = 0; k < binary_vis.data.size(); ++k)
    binary_vis.data[k] = model.visibility.frames[t].data[k] >= 0.5f ? 1.f : 0.f;

  // Payload: [delta_rgb | alpha], one pass so both share the normalization.
  Image payload(diff.grid.width, diff.grid.height, 4);
  for (int j = 0; j < diff.grid.height; ++j)
    for (int i = 0; i < diff.grid.width; ++i) {
      for (int c = 0; c < 3; ++c) payload.at(i, j, c) = diff.delta.at(i, j, c);
      payload.at(i, j, 3) = diff.alpha.at(i, j);
    }

  Image jac = jacobian_determinant(model.warps.frames[t]);
  RenderedFrame r = render_field(payload, model.warps.frames[t], jac, &binary_vis,
                                 model.width, model.height);

  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      if (!r.covered(x, y)) continue;
      float a = r.color.at(x, y, 3);
      if (a <= 0.f) continue;
      for (int c = 0; c < 3; ++c) {
        float gain = model.lighting.active() ? model.lighting.gain_at(t, x, y, c) : 1.f;
        out.at(x, y, c) += gain * r.color.at(x, y, c) * a;
      }
    }
  return out;
}

} // namespace mosaic
