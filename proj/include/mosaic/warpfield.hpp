#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mosaic/core.hpp"
#include "mosaic/errors.hpp"
#include "mosaic/parallel.hpp"

namespace mosaic {

// ---------------------------------------------------------------------------
// K-NN graph over mosaic-space nodes (grid texels plus embedded tracks),
// symmetrized by union, with Gaussian weights at the mean squared K-NN
// distance scale.

struct MappingGraph {
  int n_nodes = 0;
  int n_grid = 0;  // nodes [0, n_grid) are grid texels, the rest are tracks
  std::vector<Vec2> positions;
  // CSR over undirected edges, stored in both directions.
  std::vector<int> adj_offset;
  std::vector<int> adj_node;
  std::vector<double> adj_weight;
  double tau_map = 0.0;
  double max_degree = 0.0;  // max weighted degree, for the step size
};

namespace detail {

// Bucket-grid K-NN for points in the unit square.
class UnitSquareKnn {
public:
  explicit UnitSquareKnn(const std::vector<Vec2>& pts, int expected_per_cell = 2)
      : pts_(pts) {
    int n = static_cast<int>(pts.size());
    cells_ = std::max(1, static_cast<int>(std::sqrt(n / std::max(1, expected_per_cell))));
    buckets_.resize(static_cast<std::size_t>(cells_) * cells_);
    for (int i = 0; i < n; ++i) buckets_[cell_of(pts[i])].push_back(i);
  }

  void query(const Vec2& p, int self, int k, std::vector<std::pair<double, int>>& out) const {
    out.clear();
    int cx = std::clamp(static_cast<int>(p.x * cells_), 0, cells_ - 1);
    int cy = std::clamp(static_cast<int>(p.y * cells_), 0, cells_ - 1);
    for (int ring = 0; ring < cells_; ++ring) {
      bool added = false;
      for (int by = cy - ring; by <= cy + ring; ++by) {
        if (by < 0 || by >= cells_) continue;
        for (int bx = cx - ring; bx <= cx + ring; ++bx) {
          if (bx < 0 || bx >= cells_) continue;
          if (std::max(std::abs(bx - cx), std::abs(by - cy)) != ring) continue;
          for (int idx : buckets_[static_cast<std::size_t>(by) * cells_ + bx]) {
            if (idx == self) continue;
            out.push_back({(pts_[idx] - p).norm2(), idx});
            added = true;
          }
        }
      }
      // Enough candidates and the next ring cannot beat the current kth.
      if (static_cast<int>(out.size()) >= k) {
        std::nth_element(out.begin(), out.begin() + (k - 1), out.end());
        double kth = out[k - 1].first;
        double ring_dist = static_cast<double>(ring) / cells_;
        if (ring_dist * ring_dist >= kth) break;
      }
      if (!added && static_cast<int>(out.size()) >= k) break;
    }
    int keep = std::min<int>(k, static_cast<int>(out.size()));
    std::partial_sort(out.begin(), out.begin() + keep, out.end());
    out.resize(keep);
  }

private:
  std::size_t cell_of(const Vec2& p) const {
    int cx = std::clamp(static_cast<int>(p.x * cells_), 0, cells_ - 1);
    int cy = std::clamp(static_cast<int>(p.y * cells_), 0, cells_ - 1);
    return static_cast<std::size_t>(cy) * cells_ + cx;
  }
  const std::vector<Vec2>& pts_;
  int cells_ = 1;
  std::vector<std::vector<int>> buckets_;
};

} // namespace detail

inline MappingGraph build_mapping_graph(const MosaicGrid& grid,
                                        const std::vector<Vec2>& track_points, int k) {
  MappingGraph g;
  g.n_grid = grid.width * grid.height;
  g.n_nodes = g.n_grid + static_cast<int>(track_points.size());
  g.positions.reserve(g.n_nodes);
  for (int j = 0; j < grid.height; ++j)
    for (int i = 0; i < grid.width; ++i) g.positions.push_back(grid_to_unit(i, j, grid));
  for (const auto& p : track_points) g.positions.push_back(p);

  detail::UnitSquareKnn knn(g.positions);
  std::vector<std::vector<std::pair<int, double>>> nbrs(g.n_nodes);
  std::vector<std::vector<std::pair<double, int>>> found(g.n_nodes);
  parallel_for(g.n_nodes, [&](std::size_t i) {
    knn.query(g.positions[i], static_cast<int>(i), k, found[i]);
  });

  // Mean squared K-NN distance sets the weight scale.
  double sum_d2 = 0.0;
  std::size_t n_d2 = 0;
  for (const auto& f : found) {
    for (const auto& [d2, j] : f) {
      sum_d2 += d2;
      ++n_d2;
    }
  }
  g.tau_map = n_d2 ? std::max(1e-12, sum_d2 / n_d2) : 1.0;

  // Symmetrize by union; weight from the squared distance.
  for (int i = 0; i < g.n_nodes; ++i) {
    for (const auto& [d2, j] : found[i]) {
      double w = std::exp(-d2 / g.tau_map);
      auto& li = nbrs[i];
      if (std::none_of(li.begin(), li.end(), [&](auto& e) { return e.first == j; }))
        li.push_back({j, w});
      auto& lj = nbrs[j];
      if (std::none_of(lj.begin(), lj.end(), [&](auto& e) { return e.first == i; }))
        lj.push_back({static_cast<int>(i), w});
    }
  }

  g.adj_offset.resize(g.n_nodes + 1, 0);
  for (int i = 0; i < g.n_nodes; ++i)
    g.adj_offset[i + 1] = g.adj_offset[i] + static_cast<int>(nbrs[i].size());
  g.adj_node.resize(g.adj_offset.back());
  g.adj_weight.resize(g.adj_offset.back());
  for (int i = 0; i < g.n_nodes; ++i) {
    std::sort(nbrs[i].begin(), nbrs[i].end());
    int o = g.adj_offset[i];
    double deg = 0.0;
    for (const auto& [j, w] : nbrs[i]) {
      g.adj_node[o] = j;
      g.adj_weight[o] = w;
      deg += w;
      ++o;
    }
    g.max_degree = std::max(g.max_degree, deg);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Constrained quadratic solver: minimizes sum_edges w |y_a - y_b|^2 with some
// nodes held fixed, by accelerated (FISTA-style momentum) projected gradient
// descent. Constraints are enforced exactly: constrained nodes never move.

struct ConstrainedSolveResult {
  std::vector<Vec2> y;
  int iterations = 0;
  double grad_norm = 0.0;
};

inline ConstrainedSolveResult solve_constrained_laplacian(
    const MappingGraph& g, const std::vector<char>& is_constrained,
    const std::vector<Vec2>& values, int max_iters, double tol,
    double stall_step = 2e-4) {
  const int n = g.n_nodes;
  ConstrainedSolveResult res;
  res.y = values;

  // Unconstrained components must contain at least one constraint.
  {
    std::vector<int> comp(n, -1);
    std::vector<int> stack;
    int n_comp = 0;
    for (int s = 0; s < n; ++s) {
      if (comp[s] >= 0) continue;
      comp[s] = n_comp;
      stack.push_back(s);
      bool anchored = false;
      while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        anchored |= static_cast<bool>(is_constrained[v]);
        for (int e = g.adj_offset[v]; e < g.adj_offset[v + 1]; ++e) {
          int u = g.adj_node[e];
          if (comp[u] < 0) {
            comp[u] = n_comp;
            stack.push_back(u);
          }
        }
      }
      require(anchored, "interpolate_mapping: graph component without any constraint "
                        "(component containing node " + std::to_string(s) + ")");
      ++n_comp;
    }
  }

  // grad f = 2 L y; Lipschitz constant bounded by 4 * max weighted degree.
  // Accelerated iteration with gradient-based adaptive restart.
  const double step = 1.0 / std::max(1e-12, 4.0 * g.max_degree);
  std::vector<Vec2> y = res.y;
  std::vector<Vec2> v = res.y;  // extrapolated point
  std::vector<Vec2> grad(n);
  std::vector<double> restart_part(n), step_part(n);
  double t_momentum = 1.0;
  double initial_grad = -1.0;

  for (int iter = 0; iter < max_iters; ++iter) {
    double gn2 = 0.0;
    parallel_blocks(n, 8192, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        if (is_constrained[i]) {
          grad[i] = {0.0, 0.0};
          continue;
        }
        Vec2 acc{0.0, 0.0};
        const Vec2 yi = v[i];
        for (int e = g.adj_offset[i]; e < g.adj_offset[i + 1]; ++e) {
          const Vec2& yj = v[g.adj_node[e]];
          double w = g.adj_weight[e];
          acc.x += w * (yi.x - yj.x);
          acc.y += w * (yi.y - yj.y);
        }
        grad[i] = acc * 2.0;
      }
    });
    for (int i = 0; i < n; ++i) gn2 += grad[i].norm2();
    res.grad_norm = std::sqrt(gn2);
    res.iterations = iter;
    if (initial_grad < 0.0) initial_grad = res.grad_norm;
    if (res.grad_norm <= tol || res.grad_norm <= 1e-12 * initial_grad) break;

    double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_momentum * t_momentum));
    double beta = (t_momentum - 1.0) / t_next;
    parallel_blocks(n, 8192, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        if (is_constrained[i]) {
          restart_part[i] = 0.0;
          step_part[i] = 0.0;
          continue;
        }
        Vec2 y_new = v[i] - grad[i] * step;
        restart_part[i] = grad[i].dot(y_new - y[i]);
        step_part[i] = std::max(std::abs(y_new.x - y[i].x), std::abs(y_new.y - y[i].y));
        v[i] = y_new + (y_new - y[i]) * beta;
        y[i] = y_new;
      }
    });
    double restart_dot = 0.0, step_inf = 0.0;
    for (int i = 0; i < n; ++i) {
      restart_dot += restart_part[i];
      step_inf = std::max(step_inf, step_part[i]);
    }
    if (restart_dot > 0.0) {
      // Momentum points uphill: restart it.
      t_momentum = 1.0;
      for (int i = 0; i < n; ++i)
        if (!is_constrained[i]) v[i] = y[i];
    } else {
      t_momentum = t_next;
    }
    if (stall_step > 0.0 && step_inf < stall_step) break;  // stalled below field precision
  }
  for (int i = 0; i < n; ++i)
    if (!is_constrained[i]) res.y[i] = y[i];
  return res;
}

// Least-squares affine fit of the pinned nodes, evaluated at every free node;
// a far better starting point than a constant field whenever the underlying
// mapping is near-affine, and the converged minimizer is unchanged either way.
inline void affine_initialize(const MappingGraph& g, const std::vector<char>& is_constrained,
                              std::vector<Vec2>& values) {
  // Normal equations of [px py 1] -> (vx, vy).
  double M[3][3] = {};
  double rx[3] = {}, ry[3] = {};
  int n_pins = 0;
  for (int i = 0; i < g.n_nodes; ++i) {
    if (!is_constrained[i]) continue;
    ++n_pins;
    double row[3] = {g.positions[i].x, g.positions[i].y, 1.0};
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) M[a][b] += row[a] * row[b];
      rx[a] += row[a] * values[i].x;
      ry[a] += row[a] * values[i].y;
    }
  }
  if (n_pins < 3) return;
  double aug[3][5];
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) aug[a][b] = M[a][b];
    aug[a][3] = rx[a];
    aug[a][4] = ry[a];
  }
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(aug[r][col]) > std::abs(aug[piv][col])) piv = r;
    if (std::abs(aug[piv][col]) < 1e-12) return;  // degenerate pins: keep given init
    if (piv != col)
      for (int b = 0; b < 5; ++b) std::swap(aug[piv][b], aug[col][b]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      double f = aug[r][col] / aug[col][col];
      for (int b = 0; b < 5; ++b) aug[r][b] -= f * aug[col][b];
    }
  }
  double cx[3] = {aug[0][3] / aug[0][0], aug[1][3] / aug[1][1], aug[2][3] / aug[2][2]};
  double cy[3] = {aug[0][4] / aug[0][0], aug[1][4] / aug[1][1], aug[2][4] / aug[2][2]};
  for (int i = 0; i < g.n_nodes; ++i) {
    if (is_constrained[i]) continue;
    const Vec2& p = g.positions[i];
    values[i] = {cx[0] * p.x + cx[1] * p.y + cx[2], cy[0] * p.x + cy[1] * p.y + cy[2]};
  }
}

// Objective value of the graph quadratic (used by tests and the verify gate).
inline double laplacian_objective(const MappingGraph& g, const std::vector<Vec2>& y) {
  double acc = 0.0;
  for (int i = 0; i < g.n_nodes; ++i)
    for (int e = g.adj_offset[i]; e < g.adj_offset[i + 1]; ++e) {
      int j = g.adj_node[e];
      if (j < i) continue;  // each undirected edge once
      acc += g.adj_weight[e] * (y[i] - y[j]).norm2();
    }
  return acc;
}

// ---------------------------------------------------------------------------
// Dense per-frame warps from the sparse embedded flow correspondences.
// Tracks visible at frame t pin their node to the observed image position;
// unconstrained frames (< 3 visible tracks) copy the nearest solved frame.
//
// Each frame solves coarse-to-fine over a halved-grid chain: the coarsest
// level warm-starts from the previous frame, every finer level starts from
// the upsampled coarser solution, so the accelerated iterations only carry
// high-frequency residual. Initialization does not change the minimizer.

inline WarpField interpolate_mapping(const Embedding& embedding, const TrackSet& tracks,
                                     const MosaicGrid& grid, int frame_count,
                                     const SolverConfig& cfg) {
  std::vector<Vec2> pts;
  std::vector<const Track*> pt_tracks;
  for (const auto& t : tracks) {
    if (t.kind != TrackKind::Flow) continue;  // flow partition only
    const Embedding::Entry* e = embedding.find(t.id);
    if (!e) continue;
    pts.push_back(e->u);
    pt_tracks.push_back(&t);
  }
  require(pts.size() >= 3, "interpolate_mapping: need at least 3 embedded flow tracks");

  // Level chain, finest first; graphs built once.
  std::vector<MosaicGrid> level_grid{grid};
  while (static_cast<long>(level_grid.back().width) * level_grid.back().height > 20000 &&
         level_grid.back().width / 2 >= 8 && level_grid.back().height / 2 >= 8)
    level_grid.push_back({level_grid.back().width / 2, level_grid.back().height / 2});
  const int n_levels = static_cast<int>(level_grid.size());
  std::vector<MappingGraph> level_graph(n_levels);
  for (int l = 0; l < n_levels; ++l)
    level_graph[l] = build_mapping_graph(level_grid[l], pts, cfg.knn);
  const MappingGraph& g = level_graph[0];
  const int n = g.n_nodes;

  WarpField field;
  field.grid = grid;
  field.frames.resize(frame_count);
  field.constrained.assign(frame_count, 0);

  // Coarsest-level warm start across frames, with an affine transport of the
  // inter-frame constraint motion.
  std::vector<Vec2> warm_coarse;
  std::vector<Vec2> warm_tvals(pts.size());
  std::vector<char> warm_tvalid(pts.size(), 0);
  int last_solved = -1;

  for (int t = 0; t < frame_count; ++t) {
    std::vector<char> track_pinned(pts.size(), 0);
    std::vector<Vec2> track_values(pts.size(), Vec2{0.0, 0.0});
    int n_visible = 0;
    for (std::size_t i = 0; i < pt_tracks.size(); ++i) {
      const TrackSample* s = pt_tracks[i]->sample_at(t);
      if (!s || !s->visible) continue;
      track_pinned[i] = 1;
      track_values[i] = {s->x, s->y};
      ++n_visible;
    }
    if (n_visible < 3) continue;  // flagged unconstrained; filled below
    field.constrained[t] = 1;

    Image level_solution;  // grid part of the last solved level
    for (int l = n_levels - 1; l >= 0; --l) {
      const MappingGraph& gl = level_graph[l];
      const MosaicGrid& lg = level_grid[l];
      std::vector<char> pinned(gl.n_nodes, 0);
      std::vector<Vec2> values(gl.n_nodes, Vec2{0.0, 0.0});
      for (std::size_t i = 0; i < pts.size(); ++i) {
        pinned[gl.n_grid + i] = track_pinned[i];
        values[gl.n_grid + i] = track_values[i];
      }

      if (l == n_levels - 1) {
        bool transported = false;
        if (cfg.map_warm_start && !warm_coarse.empty()) {
          std::vector<std::pair<Vec2, Vec2>> prev_pairs, now_pairs;
          for (std::size_t i = 0; i < pts.size(); ++i) {
            if (!track_pinned[i] || !warm_tvalid[i]) continue;
            prev_pairs.push_back({pts[i], warm_tvals[i]});
            now_pairs.push_back({pts[i], track_values[i]});
          }
          if (prev_pairs.size() >= 3) {
            Affine2 a_prev = fit_affine(prev_pairs);
            Affine2 a_now = fit_affine(now_pairs);
            for (int i = 0; i < gl.n_nodes; ++i)
              if (!pinned[i])
                values[i] = warm_coarse[i] + (a_now(gl.positions[i]) - a_prev(gl.positions[i]));
            transported = true;
          }
        }
        if (!transported) affine_initialize(gl, pinned, values);
      } else {
        Image up = resize_bilinear(level_solution, lg.width, lg.height);
        for (int j = 0; j < lg.height; ++j)
          for (int i = 0; i < lg.width; ++i)
            if (!pinned[static_cast<std::size_t>(j) * lg.width + i])
              values[static_cast<std::size_t>(j) * lg.width + i] = {up.at(i, j, 0),
                                                                    up.at(i, j, 1)};
      }

      auto sol = solve_constrained_laplacian(gl, pinned, values, cfg.map_max_iters, cfg.map_tol);
      if (l == n_levels - 1) warm_coarse = sol.y;
      level_solution = Image(lg.width, lg.height, 2);
      for (int j = 0; j < lg.height; ++j)
        for (int i = 0; i < lg.width; ++i) {
          const Vec2& p = sol.y[static_cast<std::size_t>(j) * lg.width + i];
          level_solution.at(i, j, 0) = static_cast<float>(p.x);
          level_solution.at(i, j, 1) = static_cast<float>(p.y);
        }
    }

    warm_tvals = track_values;
    warm_tvalid = track_pinned;
    last_solved = t;
    field.frames[t] = std::move(level_solution);
  }
  require(last_solved >= 0, "interpolate_mapping: no frame has 3 visible flow tracks");

  // Unconstrained frames copy the nearest constrained frame's warp.
  for (int t = 0; t < frame_count; ++t) {
    if (field.constrained[t]) continue;
    int best = -1, best_dist = 1 << 30;
    for (int s = 0; s < frame_count; ++s)
      if (field.constrained[s] && std::abs(s - t) < best_dist) {
        best = s;
        best_dist = std::abs(s - t);
      }
    field.frames[t] = field.frames[best];
  }
  return field;
}

// ---------------------------------------------------------------------------
// Jacobian determinant of a warp frame by central differences in texel units
// (one-sided at borders).

inline Image jacobian_determinant(const Image& warp) {
  require(warp.channels == 2, "jacobian_determinant: warp must be 2-channel");
  Image J(warp.width, warp.height, 1);
  auto diff = [&](int x, int y, int c, bool horizontal) -> double {
    if (horizontal) {
      int x0 = std::max(0, x - 1), x1 = std::min(warp.width - 1, x + 1);
      return (warp.at(x1, y, c) - warp.at(x0, y, c)) / (x1 - x0);
    }
    int y0 = std::max(0, y - 1), y1 = std::min(warp.height - 1, y + 1);
    return (warp.at(x, y1, c) - warp.at(x, y0, c)) / (y1 - y0);
  };
  for (int y = 0; y < warp.height; ++y)
    for (int x = 0; x < warp.width; ++x) {
      double dxdu = diff(x, y, 0, true), dydu = diff(x, y, 1, true);
      double dxdv = diff(x, y, 0, false), dydv = diff(x, y, 1, false);
      J.at(x, y) = static_cast<float>(dxdu * dydv - dydu * dxdv);
    }
  return J;
}

// ---------------------------------------------------------------------------
// Inverse mapping: forward-splat texel unit coordinates into image space with
// the tent kernel, normalize, then diffuse into holes. The returned validity
// plane is 1 where actual splat mass landed and 0 on diffusion-filled pixels.

struct InverseField {
  Image coords;  // 2-channel WxH, unit-square coordinates
  Image valid;   // 1-channel WxH
};

inline InverseField invert_mapping(const Image& warp, const MosaicGrid& grid, int W, int H,
                                   int fill_iters = 200) {
  Image num(W, H, 2);
  Image den(W, H, 1);
  for (int j = 0; j < grid.height; ++j)
    for (int i = 0; i < grid.width; ++i) {
      double px = warp.at(i, j, 0), py = warp.at(i, j, 1);
      if (!std::isfinite(px) || !std::isfinite(py)) continue;
      Vec2 u = grid_to_unit(i, j, grid);
      int x0 = static_cast<int>(std::floor(px)), y0 = static_cast<int>(std::floor(py));
      for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx) {
          int x = x0 + dx, y = y0 + dy;
          if (x < 0 || x >= W || y < 0 || y >= H) continue;
          double wgt = (1.0 - std::abs(px - x)) * (1.0 - std::abs(py - y));
          if (wgt <= 0.0) continue;
          num.at(x, y, 0) += static_cast<float>(wgt * u.x);
          num.at(x, y, 1) += static_cast<float>(wgt * u.y);
          den.at(x, y) += static_cast<float>(wgt);
        }
    }

  InverseField inv;
  inv.coords = Image(W, H, 2);
  inv.valid = Image(W, H, 1);
  std::vector<char> filled(static_cast<std::size_t>(W) * H, 0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      if (den.at(x, y) > 1e-8f) {
        inv.coords.at(x, y, 0) = num.at(x, y, 0) / den.at(x, y);
        inv.coords.at(x, y, 1) = num.at(x, y, 1) / den.at(x, y);
        inv.valid.at(x, y) = 1.f;
        filled[static_cast<std::size_t>(y) * W + x] = 1;
      }

  // Neighbor diffusion into uncovered pixels.
  for (int it = 0; it < fill_iters; ++it) {
    bool changed = false;
    std::vector<char> next = filled;
    Image coords_next = inv.coords;
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        if (filled[static_cast<std::size_t>(y) * W + x]) continue;
        double sx = 0.0, sy = 0.0;
        int cnt = 0;
        const int nx[4] = {x - 1, x + 1, x, x};
        const int ny[4] = {y, y, y - 1, y + 1};
        for (int k = 0; k < 4; ++k) {
          if (nx[k] < 0 || nx[k] >= W || ny[k] < 0 || ny[k] >= H) continue;
          if (!filled[static_cast<std::size_t>(ny[k]) * W + nx[k]]) continue;
          sx += inv.coords.at(nx[k], ny[k], 0);
          sy += inv.coords.at(nx[k], ny[k], 1);
          ++cnt;
        }
        if (cnt > 0) {
          coords_next.at(x, y, 0) = static_cast<float>(sx / cnt);
          coords_next.at(x, y, 1) = static_cast<float>(sy / cnt);
          next[static_cast<std::size_t>(y) * W + x] = 1;
          changed = true;
        }
      }
    filled.swap(next);
    inv.coords = std::move(coords_next);
    if (!changed) break;
  }
  return inv;
}

// Builds (or rebuilds) inverse fields for every frame of a warp field.
inline void build_inverse_fields(WarpField& field, int W, int H) {
  field.inverse.resize(field.count());
  field.inverse_ok.resize(field.count());
  parallel_for(field.count(), [&](std::size_t t) {
    InverseField inv = invert_mapping(field.frames[t], field.grid, W, H);
    field.inverse[t] = std::move(inv.coords);
    field.inverse_ok[t] = std::move(inv.valid);
  });
}

// ---------------------------------------------------------------------------
// Mosaic initialization: per-texel mean of the bilinearly sampled frames,
// skipping samples outside the frame or the object mask.

inline Mosaic init_mosaic(const ImageSequence& seq, const WarpField& warps) {
  const MosaicGrid grid = warps.grid;
  Mosaic m;
  m.grid = grid;
  m.color = Image(grid.width, grid.height, 3);
  m.coverage = Image(grid.width, grid.height, 1);
  const int T = warps.count();
  for (int j = 0; j < grid.height; ++j)
    for (int i = 0; i < grid.width; ++i) {
      double acc[3] = {0.0, 0.0, 0.0};
      int cnt = 0;
      for (int t = 0; t < T; ++t) {
        double px = warps.frames[t].at(i, j, 0);
        double py = warps.frames[t].at(i, j, 1);
        if (!in_frame(seq.width, seq.height, px, py)) continue;
        int ix = static_cast<int>(std::lround(px)), iy = static_cast<int>(std::lround(py));
        if (!seq.in_mask(std::clamp(ix, 0, seq.width - 1), std::clamp(iy, 0, seq.height - 1), t))
          continue;
        for (int c = 0; c < 3; ++c) acc[c] += seq.frames[t].sample(px, py, c);
        ++cnt;
      }
      if (cnt > 0) {
        for (int c = 0; c < 3; ++c)
          m.color.at(i, j, c) = static_cast<float>(acc[c] / cnt);
      }
      m.coverage.at(i, j) = static_cast<float>(cnt);
    }
  return m;
}

} // namespace mosaic
