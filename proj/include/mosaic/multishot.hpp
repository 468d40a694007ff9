#pragma once

#include <limits>
#include <map>
#include <random>
#include <tuple>
#include <vector>

#include "mosaic/adam.hpp"
#include "mosaic/core.hpp"
#include "mosaic/embed.hpp"
#include "mosaic/warpfield.hpp"

namespace mosaic {

// ---------------------------------------------------------------------------
// Cross-shot linking: semantic tracks sharing a key are the same surface
// point, so their mosaic positions are in correspondence. Structure points
// sampled over each mosaic's covered texels preserve intra-mosaic geometry.

struct CorrespondenceSet {
  struct SamplePoint {
    Vec2 y;                        // mosaic pixel coordinates in its shot
    std::int64_t semantic_key = -1;  // -1 for structure samples
  };
  std::vector<std::vector<SamplePoint>> points;  // per shot
  struct Link {
    int shot_a = 0, idx_a = 0;
    int shot_b = 0, idx_b = 0;
  };
  std::vector<Link> links;
};

inline CorrespondenceSet mosaic_correspondences(const std::vector<const ShotModel*>& shots,
                                                const SolverConfig& cfg) {
  require(shots.size() >= 2, "mosaic_correspondences: need at least 2 shots");
  CorrespondenceSet cs;
  cs.points.resize(shots.size());

  // Semantic points first, indexed by key per shot.
  std::vector<std::map<std::int64_t, int>> key_index(shots.size());
  for (std::size_t k = 0; k < shots.size(); ++k) {
    for (const auto& e : shots[k]->embedding.entries) {
      if (e.partition != 2 || !e.semantic_key) continue;
      key_index[k][*e.semantic_key] = static_cast<int>(cs.points[k].size());
      cs.points[k].push_back({unit_to_texel(e.u, shots[k]->grid), *e.semantic_key});
    }
  }

  // Pairwise links over shared keys; every consecutive pair must share >= 8.
  for (std::size_t a = 0; a < shots.size(); ++a)
    for (std::size_t b = a + 1; b < shots.size(); ++b) {
      int shared = 0;
      for (const auto& [key, ia] : key_index[a]) {
        auto it = key_index[b].find(key);
        if (it == key_index[b].end()) continue;
        cs.links.push_back({static_cast<int>(a), ia, static_cast<int>(b), it->second});
        ++shared;
      }
      require(shared >= 8, "mosaic_correspondences: shots " + std::to_string(a) + " and " +
                               std::to_string(b) + " share only " + std::to_string(shared) +
                               " semantic keys (need 8)");
    }

  // Structure samples: one per covered block, plus points strung along the
  // coverage boundary so the interpolated field stays pinned to its rim.
  for (std::size_t k = 0; k < shots.size(); ++k) {
    const ShotModel& m = *shots[k];
    const int B = std::max(1, cfg.structure_block);
    std::vector<Vec2> taken;
    auto add_point = [&](int x, int y, int min_spacing) {
      for (const auto& p : taken)
        if (std::max(std::abs(p.x - x), std::abs(p.y - y)) < min_spacing) return;
      taken.push_back({static_cast<double>(x), static_cast<double>(y)});
      cs.points[k].push_back({{static_cast<double>(x), static_cast<double>(y)}, -1});
    };
    for (int by = 0; by < m.grid.height; by += B)
      for (int bx = 0; bx < m.grid.width; bx += B) {
        int cx = std::min(bx + B / 2, m.grid.width - 1);
        int cy = std::min(by + B / 2, m.grid.height - 1);
        if (m.mosaic.coverage.at(cx, cy) <= 0.f) continue;
        add_point(cx, cy, 1);
      }
    auto covered = [&](int x, int y) {
      return x >= 0 && x < m.grid.width && y >= 0 && y < m.grid.height &&
             m.mosaic.coverage.at(x, y) > 0.f;
    };
    for (int y = 0; y < m.grid.height; ++y)
      for (int x = 0; x < m.grid.width; ++x) {
        if (!covered(x, y)) continue;
        bool rim = !covered(x - 1, y) || !covered(x + 1, y) || !covered(x, y - 1) ||
                   !covered(x, y + 1);
        if (rim) add_point(x, y, std::max(2, B / 2));
      }
  }
  return cs;
}

// ---------------------------------------------------------------------------
// Universal embedding: joint placement of all shots' sample points so that
// intra-mosaic displacements are preserved and corresponding points coincide.

struct UniversalEmbedding {
  std::vector<std::vector<Vec2>> u;  // per shot, normalized into Q
  double stress = 0.0;               // final intra-mosaic term
  double correspondence = 0.0;       // final correspondence term
};

inline UniversalEmbedding embed_universal(const CorrespondenceSet& cs, const SolverConfig& cfg,
                                          double tau) {
  const int K = static_cast<int>(cs.points.size());
  require(K >= 1, "embed_universal: no shots");
  require(tau > 0.0, "embed_universal: tau must be positive");

  // Canonical shot order for the stochastic sampler, so that permuting the
  // input shot list permutes the outputs without changing them.
  std::vector<int> canon(K);
  std::iota(canon.begin(), canon.end(), 0);
  auto fingerprint = [&](int k) {
    double sx = 0.0, sy = 0.0;
    for (const auto& p : cs.points[k]) {
      sx += p.y.x;
      sy += p.y.y;
    }
    return std::tuple<std::size_t, double, double>(cs.points[k].size(), sx, sy);
  };
  std::sort(canon.begin(), canon.end(),
            [&](int a, int b) { return fingerprint(a) < fingerprint(b); });

  // Flatten for the optimizer, in canonical order.
  std::vector<std::pair<int, int>> flat;  // (shot, index)
  std::vector<int> base_canon(K + 1, 0);
  std::vector<int> canon_pos(K);  // shot -> canonical slot
  for (int c = 0; c < K; ++c) {
    int k = canon[c];
    canon_pos[k] = c;
    base_canon[c + 1] = base_canon[c] + static_cast<int>(cs.points[k].size());
    for (std::size_t i = 0; i < cs.points[k].size(); ++i)
      flat.push_back({k, static_cast<int>(i)});
  }
  // base[] indexed by the original shot id.
  std::vector<int> base(K, 0);
  for (int k = 0; k < K; ++k) base[k] = base_canon[canon_pos[k]];
  const int n = base_canon[K];
  std::vector<Vec2> u(n);
  for (int v = 0; v < n; ++v) u[v] = cs.points[flat[v].first][flat[v].second].y;

  std::mt19937_64 rng(cfg.seed ^ 0x2545f4914f6cdd1dull);

  auto pair_term = [&](int va, int vb, Vec2& ga, Vec2& gb, double* value) {
    const auto& pa = cs.points[flat[va].first][flat[va].second];
    const auto& pb = cs.points[flat[vb].first][flat[vb].second];
    Vec2 e = pa.y - pb.y;
    double w = std::exp(-e.norm2() / tau);
    Vec2 r = e - (u[va] - u[vb]);
    if (value) *value += w * r.norm2();
    ga = r * (-2.0 * w);
    gb = r * (2.0 * w);
  };

  // Unbiased total gradient: sampled intra-shot pairs scaled up, plus the
  // full correspondence term each step. Adam keeps the step scale-free.
  long total_pairs = 0;
  for (int k = 0; k < K; ++k) {
    long nk = static_cast<long>(cs.points[k].size());
    total_pairs += nk * (nk - 1) / 2;
  }
  std::vector<double> grad(2 * n);
  std::vector<double> params(2 * n);
  for (int v = 0; v < n; ++v) {
    params[2 * v] = u[v].x;
    params[2 * v + 1] = u[v].y;
  }
  AdamState adam(2 * n);
  const int steps = std::max(1, cfg.universal_epochs);
  std::uniform_int_distribution<int> shot_pick(0, K - 1);

  for (int step = 0; step < steps; ++step) {
    for (int v = 0; v < n; ++v) u[v] = {params[2 * v], params[2 * v + 1]};
    std::fill(grad.begin(), grad.end(), 0.0);

    int sampled = 0;
    for (int s = 0; s < cfg.universal_batch; ++s) {
      int k = canon[shot_pick(rng)];  // canonical slot -> shot
      int nk = static_cast<int>(cs.points[k].size());
      if (nk < 2) continue;
      std::uniform_int_distribution<int> pick(0, nk - 1);
      int i = pick(rng), j = pick(rng);
      if (i == j) continue;
      int va = base[k] + i, vb = base[k] + j;
      Vec2 ga, gb;
      pair_term(va, vb, ga, gb, nullptr);
      grad[2 * va] += ga.x;
      grad[2 * va + 1] += ga.y;
      grad[2 * vb] += gb.x;
      grad[2 * vb + 1] += gb.y;
      ++sampled;
    }
    if (sampled > 0) {
      double scale = static_cast<double>(total_pairs) / sampled;
      for (auto& g : grad) g *= scale;
    }

    for (const auto& link : cs.links) {
      int va = base[link.shot_a] + link.idx_a;
      int vb = base[link.shot_b] + link.idx_b;
      Vec2 r = u[va] - u[vb];
      double w = 2.0 * cfg.correspondence_weight;
      grad[2 * va] += w * r.x;
      grad[2 * va + 1] += w * r.y;
      grad[2 * vb] -= w * r.x;
      grad[2 * vb + 1] -= w * r.y;
    }

    // Linear learning-rate decay to a tenth.
    double a = steps > 1 ? static_cast<double>(step) / (steps - 1) : 0.0;
    adam.step(params, grad, cfg.universal_lr * (1.0 - 0.9 * a));
  }
  for (int v = 0; v < n; ++v) u[v] = {params[2 * v], params[2 * v + 1]};

  // Final term values (exact).
  UniversalEmbedding out;
  for (int k = 0; k < K; ++k) {
    int nk = static_cast<int>(cs.points[k].size());
    for (int i = 0; i < nk; ++i)
      for (int j = i + 1; j < nk; ++j) {
        Vec2 ga, gb;
        pair_term(base[k] + i, base[k] + j, ga, gb, &out.stress);
      }
  }
  for (const auto& link : cs.links)
    out.correspondence += (u[base[link.shot_a] + link.idx_a] -
                           u[base[link.shot_b] + link.idx_b]).norm2();

  // Joint normalization into Q.
  auto norm = detail::normalize_into_unit(u);
  (void)norm;
  out.u.resize(K);
  for (int v = 0; v < n; ++v) out.u[flat[v].first].push_back(u[v]);
  return out;
}

// ---------------------------------------------------------------------------
// Dense mosaic-to-mosaic warp via the universal space, both directions.

struct MosaicWarp {
  MosaicGrid grid_a, grid_b;
  Image fwd;        // per A texel: B mosaic pixel coordinates (2-channel)
  Image fwd_valid;  // 1-channel
  Image rev;        // per B texel: A mosaic pixel coordinates
  Image rev_valid;
};

namespace detail {

// Densifies shot->universal over the shot's texel grid with the Laplacian
// interpolation machinery; returns universal pixel coordinates per texel.
inline Image densify_to_universal(const ShotModel& shot,
                                  const std::vector<CorrespondenceSet::SamplePoint>& pts,
                                  const std::vector<Vec2>& uni, const MosaicGrid& ugrid,
                                  const SolverConfig& cfg) {
  std::vector<Vec2> anchors;
  for (const auto& p : pts) anchors.push_back(texel_to_unit(p.y, shot.grid));
  MappingGraph g = build_mapping_graph(shot.grid, anchors, cfg.knn);
  std::vector<char> pinned(g.n_nodes, 0);
  std::vector<Vec2> values(g.n_nodes, Vec2{0.0, 0.0});
  Vec2 centroid{0.0, 0.0};
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    pinned[g.n_grid + i] = 1;
    values[g.n_grid + i] = unit_to_texel(uni[i], ugrid);
    centroid = centroid + values[g.n_grid + i];
  }
  centroid = centroid * (1.0 / anchors.size());
  for (int i = 0; i < g.n_grid; ++i) values[i] = centroid;
  affine_initialize(g, pinned, values);

  auto sol = solve_constrained_laplacian(g, pinned, values, cfg.map_max_iters, cfg.map_tol);

  // The field is interpolation only near its anchors; beyond them (and on
  // uncovered texels) it is extrapolation that would pollute the inverse
  // splat. Stamp the anchored region and mask everything else.
  std::vector<char> anchored(static_cast<std::size_t>(shot.grid.width) * shot.grid.height, 0);
  const double reach = 0.75 * std::max(1, cfg.structure_block);
  for (const auto& p : pts) {
    int x0 = std::max(0, static_cast<int>(std::floor(p.y.x - reach)));
    int x1 = std::min(shot.grid.width - 1, static_cast<int>(std::ceil(p.y.x + reach)));
    int y0 = std::max(0, static_cast<int>(std::floor(p.y.y - reach)));
    int y1 = std::min(shot.grid.height - 1, static_cast<int>(std::ceil(p.y.y + reach)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if (std::hypot(x - p.y.x, y - p.y.y) <= reach)
          anchored[static_cast<std::size_t>(y) * shot.grid.width + x] = 1;
  }

  Image field(shot.grid.width, shot.grid.height, 2);
  for (int j = 0; j < shot.grid.height; ++j)
    for (int i = 0; i < shot.grid.width; ++i) {
      const Vec2& p = sol.y[static_cast<std::size_t>(j) * shot.grid.width + i];
      field.at(i, j, 0) = static_cast<float>(p.x);
      field.at(i, j, 1) = static_cast<float>(p.y);
    }

  // The harmonic extension flattens (and folds) past the anchors, which
  // would make the splat inverse ill-defined: such texels collapse onto the
  // universal positions of interior ones. Mask texels whose local Jacobian
  // has collapsed relative to the anchored-region median.
  Image jac = jacobian_determinant(field);
  std::vector<float> anchored_j;
  for (int j = 0; j < shot.grid.height; ++j)
    for (int i = 0; i < shot.grid.width; ++i)
      if (shot.mosaic.coverage.at(i, j) > 0.f &&
          anchored[static_cast<std::size_t>(j) * shot.grid.width + i])
        anchored_j.push_back(jac.at(i, j));
  float med_j = 1.f;
  if (!anchored_j.empty()) {
    std::nth_element(anchored_j.begin(), anchored_j.begin() + anchored_j.size() / 2,
                     anchored_j.end());
    med_j = anchored_j[anchored_j.size() / 2];
  }
  const float j_floor = 0.3f * std::max(1e-6f, med_j);
  const float nan = std::numeric_limits<float>::quiet_NaN();
  for (int j = 0; j < shot.grid.height; ++j)
    for (int i = 0; i < shot.grid.width; ++i) {
      bool keep = shot.mosaic.coverage.at(i, j) > 0.f &&
                  anchored[static_cast<std::size_t>(j) * shot.grid.width + i] &&
                  jac.at(i, j) > j_floor;
      if (!keep) {
        field.at(i, j, 0) = nan;
        field.at(i, j, 1) = nan;
      }
    }
  return field;
}

// Composes one direction: src texel -> universal -> dst texel.
inline void compose_direction(const Image& src_to_uni, const InverseField& uni_to_dst,
                              const ShotModel& dst, const MosaicGrid& ugrid, Image& out,
                              Image& out_valid) {
  out = Image(src_to_uni.width, src_to_uni.height, 2);
  out_valid = Image(src_to_uni.width, src_to_uni.height, 1);
  for (int j = 0; j < src_to_uni.height; ++j)
    for (int i = 0; i < src_to_uni.width; ++i) {
      double ux = src_to_uni.at(i, j, 0), uy = src_to_uni.at(i, j, 1);
      if (!std::isfinite(ux) || !std::isfinite(uy)) continue;
      if (!in_frame(ugrid.width, ugrid.height, ux, uy)) continue;
      if (uni_to_dst.valid.sample(ux, uy) < 0.99f) continue;
      Vec2 unit{uni_to_dst.coords.sample(ux, uy, 0), uni_to_dst.coords.sample(ux, uy, 1)};
      Vec2 texel = unit_to_texel(unit, dst.grid);
      if (!in_frame(dst.grid.width, dst.grid.height, texel.x, texel.y)) continue;
      int tx = std::clamp(static_cast<int>(std::lround(texel.x)), 0, dst.grid.width - 1);
      int ty = std::clamp(static_cast<int>(std::lround(texel.y)), 0, dst.grid.height - 1);
      if (dst.mosaic.coverage.at(tx, ty) <= 0.f) continue;
      out.at(i, j, 0) = static_cast<float>(texel.x);
      out.at(i, j, 1) = static_cast<float>(texel.y);
      out_valid.at(i, j) = 1.f;
    }
}

} // namespace detail

inline MosaicWarp build_mosaic_warp(const CorrespondenceSet& cs, const UniversalEmbedding& uni,
                                    const ShotModel& A, const ShotModel& B,
                                    const SolverConfig& cfg) {
  require(cs.points.size() == 2 && uni.u.size() == 2,
          "build_mosaic_warp: expects a two-shot correspondence set");
  MosaicGrid ugrid{std::max(A.grid.width, B.grid.width), std::max(A.grid.height, B.grid.height)};

  Image a_uni = detail::densify_to_universal(A, cs.points[0], uni.u[0], ugrid, cfg);
  Image b_uni = detail::densify_to_universal(B, cs.points[1], uni.u[1], ugrid, cfg);
  InverseField uni_a = invert_mapping(a_uni, A.grid, ugrid.width, ugrid.height);
  InverseField uni_b = invert_mapping(b_uni, B.grid, ugrid.width, ugrid.height);

  MosaicWarp w;
  w.grid_a = A.grid;
  w.grid_b = B.grid;
  detail::compose_direction(a_uni, uni_b, B, ugrid, w.fwd, w.fwd_valid);
  detail::compose_direction(b_uni, uni_a, A, ugrid, w.rev, w.rev_valid);

  // Certify validity by mutual round-trip consistency: a texel stays valid
  // only when mapping across and back lands within 2 texels. This trims the
  // harmonic-extrapolation fringe beyond the anchored region.
  auto consistent = [](const Image& fwd, const Image& fwd_valid, const Image& rev,
                       const Image& rev_valid, Image& out_valid) {
    out_valid = fwd_valid;
    for (int j = 0; j < fwd.height; ++j)
      for (int i = 0; i < fwd.width; ++i) {
        if (fwd_valid.at(i, j) <= 0.5f) continue;
        double bx = fwd.at(i, j, 0), by = fwd.at(i, j, 1);
        if (!in_frame(rev.width, rev.height, bx, by) || rev_valid.sample(bx, by) < 0.99f) {
          out_valid.at(i, j) = 0.f;
          continue;
        }
        double ax = rev.sample(bx, by, 0), ay = rev.sample(bx, by, 1);
        if (std::hypot(ax - i, ay - j) > 2.0) out_valid.at(i, j) = 0.f;
      }
  };
  Image fwd_ok, rev_ok;
  consistent(w.fwd, w.fwd_valid, w.rev, w.rev_valid, fwd_ok);
  consistent(w.rev, w.rev_valid, w.fwd, w.fwd_valid, rev_ok);
  w.fwd_valid = std::move(fwd_ok);
  w.rev_valid = std::move(rev_ok);
  return w;
}

// ---------------------------------------------------------------------------
// Edit transfer A -> B by pulling the diff through the reverse warp.

struct TransferResult {
  // EditDiff payload on B's grid.
  Image delta;
  Image alpha;
  double support_lost = 0.0;  // fraction of A's edit support with no B counterpart
};

inline TransferResult transfer_edit(const Image& delta_a, const Image& alpha_a,
                                    const MosaicWarp& warp) {
  require(delta_a.width == warp.grid_a.width && delta_a.height == warp.grid_a.height,
          "transfer_edit: diff does not match shot A's grid");
  TransferResult out;
  out.delta = Image(warp.grid_b.width, warp.grid_b.height, 3);
  out.alpha = Image(warp.grid_b.width, warp.grid_b.height, 1);

  for (int j = 0; j < warp.grid_b.height; ++j)
    for (int i = 0; i < warp.grid_b.width; ++i) {
      if (warp.rev_valid.at(i, j) <= 0.5f) continue;
      double ax = warp.rev.at(i, j, 0), ay = warp.rev.at(i, j, 1);
      float a = alpha_a.sample(ax, ay);
      if (a <= 0.f) continue;
      out.alpha.at(i, j) = a;
      for (int c = 0; c < 3; ++c) out.delta.at(i, j, c) = delta_a.sample(ax, ay, c);
    }

  // Support loss: A texels carrying alpha whose forward map is invalid.
  std::size_t support = 0, lost = 0;
  for (int j = 0; j < warp.grid_a.height; ++j)
    for (int i = 0; i < warp.grid_a.width; ++i) {
      if (alpha_a.at(i, j) <= 0.f) continue;
      ++support;
      if (warp.fwd_valid.at(i, j) <= 0.5f) ++lost;
    }
  out.support_lost = support ? static_cast<double>(lost) / support : 0.0;
  return out;
}

} // namespace mosaic
