#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mosaic/errors.hpp"

namespace mosaic {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}
  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm2() const { return x * x + y * y; }
  double norm() const { return std::sqrt(norm2()); }
};

// Planar-interleaved float image. Pixel centers sit at integer coordinates,
// origin top-left, x rightward, y downward.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.f)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, fill) {}

  bool empty() const { return data.empty(); }
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  float& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  float at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }
  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height;
  }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }

  // Bilinear sample with border clamp; (fx, fy) in pixel units.
  float sample(double fx, double fy, int c = 0) const {
    fx = std::clamp(fx, 0.0, static_cast<double>(width - 1));
    fy = std::clamp(fy, 0.0, static_cast<double>(height - 1));
    int x0 = static_cast<int>(fx);
    int y0 = static_cast<int>(fy);
    int x1 = std::min(x0 + 1, width - 1);
    int y1 = std::min(y0 + 1, height - 1);
    double ax = fx - x0, ay = fy - y0;
    double v00 = at(x0, y0, c), v10 = at(x1, y0, c);
    double v01 = at(x0, y1, c), v11 = at(x1, y1, c);
    return static_cast<float>((v00 * (1 - ax) + v10 * ax) * (1 - ay) +
                              (v01 * (1 - ax) + v11 * ax) * ay);
  }

  void fill(float v) { std::fill(data.begin(), data.end(), v); }

  void clamp(float lo, float hi) {
    for (auto& v : data) v = std::clamp(v, lo, hi);
  }
};

// A sample position is usable when its bilinear footprint lies in the frame.
inline bool in_frame(const Image& img, double fx, double fy) {
  return fx >= 0.0 && fx <= img.width - 1.0 && fy >= 0.0 && fy <= img.height - 1.0;
}

inline bool in_frame(int w, int h, double fx, double fy) {
  return fx >= 0.0 && fx <= w - 1.0 && fy >= 0.0 && fy <= h - 1.0;
}

// 2x2 box filter decimation; odd trailing rows/columns average what exists.
inline Image box_downsample(const Image& img) {
  int w2 = std::max(1, img.width / 2);
  int h2 = std::max(1, img.height / 2);
  Image out(w2, h2, img.channels);
  for (int y = 0; y < h2; ++y) {
    for (int x = 0; x < w2; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        int n = 0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            int sx = 2 * x + dx, sy = 2 * y + dy;
            if (sx < img.width && sy < img.height) {
              acc += img.at(sx, sy, c);
              ++n;
            }
          }
        }
        out.at(x, y, c) = static_cast<float>(acc / n);
      }
    }
  }
  return out;
}

// Bilinear upsample to exactly (w, h).
inline Image resize_bilinear(const Image& img, int w, int h) {
  Image out(w, h, img.channels);
  double sx = static_cast<double>(img.width) / w;
  double sy = static_cast<double>(img.height) / h;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      double fy = (y + 0.5) * sy - 0.5;
      for (int c = 0; c < img.channels; ++c)
        out.at(x, y, c) = img.sample(fx, fy, c);
    }
  }
  return out;
}

inline Image upsample_x2(const Image& img) {
  return resize_bilinear(img, img.width * 2, img.height * 2);
}

inline double mean_abs_diff(const Image& a, const Image& b) {
  require(a.same_shape(b), "mean_abs_diff: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    acc += std::abs(static_cast<double>(a.data[i]) - b.data[i]);
  return a.data.empty() ? 0.0 : acc / a.data.size();
}

inline double max_abs_diff(const Image& a, const Image& b) {
  require(a.same_shape(b), "max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.data[i]) - b.data[i]));
  return m;
}

// PSNR over an optional mask (mask > 0.5 selects pixels); images in [0,1].
inline double psnr(const Image& a, const Image& b, const Image* mask = nullptr) {
  require(a.same_shape(b), "psnr: shape mismatch");
  double se = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      if (mask && mask->at(x, y) <= 0.5f) continue;
      for (int c = 0; c < a.channels; ++c) {
        double d = static_cast<double>(a.at(x, y, c)) - b.at(x, y, c);
        se += d * d;
        ++n;
      }
    }
  }
  if (n == 0) return 0.0;
  double mse = se / n;
  if (mse <= 0.0) return 200.0;  // exact match sentinel
  return 10.0 * std::log10(1.0 / mse);
}

} // namespace mosaic
