#include <gtest/gtest.h>

#include <Eigen/Dense>

#include "mosaic/embed.hpp"
#include "mosaic/synth.hpp"
#include "mosaic/warpfield.hpp"

using namespace mosaic;

namespace {

// Dense reference solve of the constrained graph quadratic.
std::vector<Vec2> dense_constrained_solve(const MappingGraph& g,
                                          const std::vector<char>& pinned,
                                          const std::vector<Vec2>& values) {
  const int n = g.n_nodes;
  std::vector<int> free_idx(n, -1);
  int nf = 0;
  for (int i = 0; i < n; ++i)
    if (!pinned[i]) free_idx[i] = nf++;
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(nf, nf);
  Eigen::VectorXd rx = Eigen::VectorXd::Zero(nf), ry = Eigen::VectorXd::Zero(nf);
  for (int i = 0; i < n; ++i)
    for (int e = g.adj_offset[i]; e < g.adj_offset[i + 1]; ++e) {
      int j = g.adj_node[e];
      if (j < i) continue;
      double w = g.adj_weight[e];
      int fi = free_idx[i], fj = free_idx[j];
      if (fi >= 0) L(fi, fi) += w;
      if (fj >= 0) L(fj, fj) += w;
      if (fi >= 0 && fj >= 0) {
        L(fi, fj) -= w;
        L(fj, fi) -= w;
      } else if (fi >= 0) {
        rx(fi) += w * values[j].x;
        ry(fi) += w * values[j].y;
      } else if (fj >= 0) {
        rx(fj) += w * values[i].x;
        ry(fj) += w * values[i].y;
      }
    }
  Eigen::VectorXd x = L.ldlt().solve(rx), y = L.ldlt().solve(ry);
  std::vector<Vec2> out = values;
  for (int i = 0; i < n; ++i)
    if (free_idx[i] >= 0) out[i] = {x(free_idx[i]), y(free_idx[i])};
  return out;
}

MappingGraph path_graph(int n) {
  MappingGraph g;
  g.n_nodes = n;
  g.n_grid = n;
  for (int i = 0; i < n; ++i) g.positions.push_back({(i + 0.5) / n, 0.5});
  g.adj_offset.assign(n + 1, 0);
  for (int i = 0; i < n; ++i)
    g.adj_offset[i + 1] = g.adj_offset[i] + (i == 0 || i == n - 1 ? 1 : 2);
  g.adj_node.resize(g.adj_offset.back());
  g.adj_weight.assign(g.adj_offset.back(), 1.0);
  for (int i = 0; i < n; ++i) {
    int o = g.adj_offset[i];
    if (i > 0) g.adj_node[o++] = i - 1;
    if (i < n - 1) g.adj_node[o++] = i + 1;
  }
  g.max_degree = 2.0;
  return g;
}

TrackSet static_lattice_tracks(const GroundTruth& gt, int side, int frames) {
  TrackSet ts;
  std::int64_t id = 0;
  for (int j = 0; j < side; ++j)
    for (int i = 0; i < side; ++i) {
      Vec2 q{0.05 + 0.9 * i / (side - 1.0), 0.05 + 0.9 * j / (side - 1.0)};
      Track t;
      t.id = id++;
      t.kind = TrackKind::Flow;
      for (int f = 0; f < frames; ++f) {
        Vec2 p = gt.map_site(q, f);
        t.samples.push_back({f, p.x, p.y, true});
      }
      ts.push_back(std::move(t));
    }
  return ts;
}

} // namespace

TEST(ConstrainedSolve, PathGraphMatchesDenseSolve) {
  MappingGraph g = path_graph(8);
  std::vector<char> pinned(8, 0);
  std::vector<Vec2> values(8, Vec2{0.0, 0.0});
  pinned[2] = 1;
  values[2] = {0.0, 0.0};
  pinned[5] = 1;
  values[5] = {10.0, 0.0};

  auto fista = solve_constrained_laplacian(g, pinned, values, 20000, 1e-10, 0.0);
  auto dense = dense_constrained_solve(g, pinned, values);
  for (int i = 0; i < 8; ++i) {
    EXPECT_NEAR(fista.y[i].x, dense[i].x, 1e-5) << "node " << i;
    EXPECT_NEAR(fista.y[i].y, dense[i].y, 1e-5) << "node " << i;
  }
  // Hard constraints hold bitwise.
  EXPECT_EQ(fista.y[2].x, 0.0);
  EXPECT_EQ(fista.y[5].x, 10.0);
}

TEST(ConstrainedSolve, KnnGridMatchesDenseSolve) {
  MosaicGrid grid{8, 8};
  std::vector<Vec2> track_pts = {{0.25, 0.5}, {0.75, 0.5}, {0.5, 0.2}};
  MappingGraph g = build_mapping_graph(grid, track_pts, 4);
  std::vector<char> pinned(g.n_nodes, 0);
  std::vector<Vec2> values(g.n_nodes, Vec2{5.0, 5.0});
  pinned[g.n_grid + 0] = 1;
  values[g.n_grid + 0] = {0.0, 0.0};
  pinned[g.n_grid + 1] = 1;
  values[g.n_grid + 1] = {10.0, 0.0};
  pinned[g.n_grid + 2] = 1;
  values[g.n_grid + 2] = {5.0, -4.0};

  auto fista = solve_constrained_laplacian(g, pinned, values, 50000, 1e-9, 0.0);
  auto dense = dense_constrained_solve(g, pinned, values);
  for (int i = 0; i < g.n_nodes; ++i) {
    EXPECT_NEAR(fista.y[i].x, dense[i].x, 1e-5);
    EXPECT_NEAR(fista.y[i].y, dense[i].y, 1e-5);
  }
}

TEST(ConstrainedSolve, UnanchoredComponentErrors) {
  MappingGraph g = path_graph(6);
  // cut the path into two components: drop edges between 2 and 3
  g.adj_offset = {0, 1, 3, 4, 5, 7, 8};
  g.adj_node = {1, 0, 2, 1, 4, 3, 5, 4};
  g.adj_weight.assign(8, 1.0);
  std::vector<char> pinned(6, 0);
  pinned[0] = 1;  // only the first component is anchored
  std::vector<Vec2> values(6, Vec2{0.0, 0.0});
  EXPECT_THROW(solve_constrained_laplacian(g, pinned, values, 100, 1e-6), validation_error);
}

TEST(InterpolateMapping, ConstantConstraintsGiveConstantField) {
  MosaicGrid grid{10, 10};
  Embedding emb;
  TrackSet tracks;
  std::vector<Vec2> us = {{0.2, 0.2}, {0.8, 0.3}, {0.5, 0.8}, {0.3, 0.6}};
  for (int i = 0; i < 4; ++i) {
    Track t;
    t.id = i;
    t.kind = TrackKind::Flow;
    t.samples = {{0, 7.0, 9.0, true}, {1, 7.0, 9.0, true}};
    tracks.push_back(t);
    emb.entries.push_back({i, us[i], 1});
  }
  SolverConfig cfg;
  cfg.knn = 4;
  WarpField wf = interpolate_mapping(emb, tracks, grid, 2, cfg);
  for (int t = 0; t < 2; ++t)
    for (int j = 0; j < grid.height; ++j)
      for (int i = 0; i < grid.width; ++i) {
        EXPECT_NEAR(wf.frames[t].at(i, j, 0), 7.0, 1e-5);
        EXPECT_NEAR(wf.frames[t].at(i, j, 1), 9.0, 1e-5);
      }
}

TEST(InterpolateMapping, StaticSceneReproducesAffinePlacement) {
  SceneSpec spec;
  spec.width = 64;
  spec.height = 64;
  spec.frames = 2;
  GroundTruth gt(spec);
  TrackSet tracks = static_lattice_tracks(gt, 8, spec.frames);

  // Embedding = frame-0 geometry (normalized into Q like the real solver).
  DisplacementTable table = pairwise_max_displacement(tracks, 4e4);
  Embedding emb = embed_closed_form_oracle(table);

  MosaicGrid grid{48, 48};
  SolverConfig cfg;
  cfg.map_max_iters = 20000;
  cfg.map_tol = 1e-8;
  WarpField wf = interpolate_mapping(emb, tracks, grid, spec.frames, cfg);

  // Fitted affine embedding->image from the tracks themselves.
  std::vector<std::pair<Vec2, Vec2>> pairs;
  for (const auto& t : tracks)
    pairs.push_back({emb.find(t.id)->u, {t.samples[0].x, t.samples[0].y}});
  Affine2 aff = fit_affine(pairs);

  // Interior texels (inside the track hull) match the affine placement.
  Vec2 hull_min{1e9, 1e9}, hull_max{-1e9, -1e9};
  for (const auto& [u, p] : pairs) {
    hull_min.x = std::min(hull_min.x, u.x);
    hull_min.y = std::min(hull_min.y, u.y);
    hull_max.x = std::max(hull_max.x, u.x);
    hull_max.y = std::max(hull_max.y, u.y);
  }
  const double inset = 0.13;  // one lattice spacing
  double max_err = 0.0;
  for (int j = 0; j < grid.height; ++j)
    for (int i = 0; i < grid.width; ++i) {
      Vec2 u = grid_to_unit(i, j, grid);
      if (u.x < hull_min.x + inset || u.x > hull_max.x - inset) continue;
      if (u.y < hull_min.y + inset || u.y > hull_max.y - inset) continue;
      Vec2 expect = aff(u);
      Vec2 got{wf.frames[0].at(i, j, 0), wf.frames[0].at(i, j, 1)};
      max_err = std::max(max_err, (got - expect).norm());
    }
  EXPECT_LE(max_err, 0.5);
}

TEST(InterpolateMapping, ObjectiveNotWorseThanConstantInit) {
  SceneSpec spec;
  spec.width = 64;
  spec.height = 64;
  spec.frames = 2;
  spec.motion.rot = 0.1;
  GroundTruth gt(spec);
  TrackSet tracks = static_lattice_tracks(gt, 5, spec.frames);
  DisplacementTable table = pairwise_max_displacement(tracks, 4e4);
  Embedding emb = embed_closed_form_oracle(table);

  MosaicGrid grid{16, 16};
  SolverConfig cfg;
  WarpField wf = interpolate_mapping(emb, tracks, grid, spec.frames, cfg);

  std::vector<Vec2> pts;
  std::vector<const Track*> pt;
  for (const auto& t : tracks) pts.push_back(emb.find(t.id)->u);
  MappingGraph g = build_mapping_graph(grid, pts, cfg.knn);

  for (int t = 0; t < spec.frames; ++t) {
    std::vector<Vec2> solution(g.n_nodes), constant(g.n_nodes);
    Vec2 centroid{0.0, 0.0};
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      Vec2 p{tracks[i].samples[t].x, tracks[i].samples[t].y};
      solution[g.n_grid + i] = p;
      constant[g.n_grid + i] = p;
      centroid = centroid + p;
    }
    centroid = centroid * (1.0 / tracks.size());
    for (int j = 0; j < grid.height; ++j)
      for (int i = 0; i < grid.width; ++i) {
        int k = j * grid.width + i;
        solution[k] = {wf.frames[t].at(i, j, 0), wf.frames[t].at(i, j, 1)};
        constant[k] = centroid;
      }
    EXPECT_LE(laplacian_objective(g, solution), laplacian_objective(g, constant) * (1.0 + 1e-9));
  }
}

TEST(InterpolateMapping, UnconstrainedFrameCopiesNearest) {
  MosaicGrid grid{8, 8};
  Embedding emb;
  TrackSet tracks;
  std::vector<Vec2> us = {{0.2, 0.2}, {0.8, 0.3}, {0.5, 0.8}};
  for (int i = 0; i < 3; ++i) {
    Track t;
    t.id = i;
    t.kind = TrackKind::Flow;
    // visible at frame 0 only; frame 1 has no visible tracks
    t.samples = {{0, 2.0 * i + 1.0, 3.0, true}, {1, 0.0, 0.0, false}};
    tracks.push_back(t);
    emb.entries.push_back({i, us[i], 1});
  }
  SolverConfig cfg;
  cfg.knn = 4;
  WarpField wf = interpolate_mapping(emb, tracks, grid, 2, cfg);
  EXPECT_EQ(wf.constrained[0], 1);
  EXPECT_EQ(wf.constrained[1], 0);
  EXPECT_LE(max_abs_diff(wf.frames[0], wf.frames[1]), 0.f);
}
