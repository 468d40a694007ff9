#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "mosaic/core.hpp"
#include "mosaic/errors.hpp"

namespace mosaic {

// ---------------------------------------------------------------------------
// Pairwise maximum displacements. For each pair of tracks with overlapping
// visibility, the displacement at the frame of maximal separation, weighted
// by exp(-|d|^2 / tau). Pairs with no common visible frame are omitted.

struct DisplacementTable {
  struct Pair {
    int a = 0;  // index into flow_ids / sem_ids depending on the table
    int b = 0;
    Vec2 d;     // pos[a](t*) - pos[b](t*)
    double weight = 0.0;
  };

  std::vector<std::int64_t> flow_ids;
  std::vector<std::int64_t> sem_ids;
  std::vector<std::int64_t> sem_keys;  // semantic_key per sem_ids entry
  std::vector<Pair> flow_flow;  // a, b index flow_ids
  std::vector<Pair> sem_sem;    // a, b index sem_ids
  std::vector<Pair> cross;      // a indexes flow_ids, b indexes sem_ids
  double tau = 1.0;

  std::size_t pair_count() const {
    return flow_flow.size() + sem_sem.size() + cross.size();
  }
};

namespace detail {

struct TrackPositions {
  std::vector<int> frames;
  std::vector<Vec2> pos;
};

inline TrackPositions visible_positions(const Track& t) {
  TrackPositions p;
  for (const auto& s : t.samples)
    if (s.visible) {
      p.frames.push_back(s.frame);
      p.pos.push_back({s.x, s.y});
    }
  return p;
}

// Displacement at the common visible frame of maximal separation.
inline bool max_displacement(const TrackPositions& a, const TrackPositions& b, Vec2& d_out) {
  std::size_t i = 0, j = 0;
  double best = -1.0;
  while (i < a.frames.size() && j < b.frames.size()) {
    if (a.frames[i] < b.frames[j]) ++i;
    else if (a.frames[i] > b.frames[j]) ++j;
    else {
      Vec2 d = a.pos[i] - b.pos[j];
      double n = d.norm2();
      if (n > best) {
        best = n;
        d_out = d;
      }
      ++i;
      ++j;
    }
  }
  return best >= 0.0;
}

// Keeps, per node, its `keep_top` largest-weight pairs plus `keep_random`
// seeded-random extras; applied only above the subsample threshold.
inline std::vector<DisplacementTable::Pair> subsample_pairs(
    std::vector<DisplacementTable::Pair> pairs, int n_nodes, int keep_top, int keep_random,
    std::mt19937_64& rng) {
  std::vector<std::vector<int>> by_node(n_nodes);
  for (int p = 0; p < static_cast<int>(pairs.size()); ++p) {
    by_node[pairs[p].a].push_back(p);
    by_node[pairs[p].b].push_back(p);
  }
  std::vector<char> keep(pairs.size(), 0);
  for (auto& list : by_node) {
    std::sort(list.begin(), list.end(), [&](int x, int y) {
      return pairs[x].weight > pairs[y].weight;
    });
    int top = std::min<int>(keep_top, static_cast<int>(list.size()));
    for (int k = 0; k < top; ++k) keep[list[k]] = 1;
    for (int k = 0; k < keep_random && top + k < static_cast<int>(list.size()); ++k) {
      std::uniform_int_distribution<int> pick(top, static_cast<int>(list.size()) - 1);
      keep[list[pick(rng)]] = 1;
    }
  }
  std::vector<DisplacementTable::Pair> out;
  for (std::size_t p = 0; p < pairs.size(); ++p)
    if (keep[p]) out.push_back(pairs[p]);
  return out;
}

} // namespace detail

inline DisplacementTable pairwise_max_displacement(const TrackSet& tracks, double tau,
                                                   const SolverConfig& cfg = {}) {
  require(tracks.size() >= 2, "pairwise_max_displacement: need at least 2 tracks");
  require(tau > 0.0, "pairwise_max_displacement: tau must be positive");

  DisplacementTable table;
  table.tau = tau;
  std::vector<detail::TrackPositions> flow_pos, sem_pos;
  for (const auto& t : tracks) {
    if (t.kind == TrackKind::Flow) {
      table.flow_ids.push_back(t.id);
      flow_pos.push_back(detail::visible_positions(t));
    } else {
      table.sem_ids.push_back(t.id);
      table.sem_keys.push_back(t.semantic_key.value_or(-1));
      sem_pos.push_back(detail::visible_positions(t));
    }
  }

  auto weight = [&](const Vec2& d) { return std::exp(-d.norm2() / tau); };
  auto fill = [&](const std::vector<detail::TrackPositions>& pa,
                  const std::vector<detail::TrackPositions>& pb, bool same,
                  std::vector<DisplacementTable::Pair>& out) {
    for (int i = 0; i < static_cast<int>(pa.size()); ++i) {
      int j0 = same ? i + 1 : 0;
      for (int j = j0; j < static_cast<int>(pb.size()); ++j) {
        Vec2 d;
        if (detail::max_displacement(pa[i], pb[j], d))
          out.push_back({i, j, d, weight(d)});
      }
    }
  };
  fill(flow_pos, flow_pos, true, table.flow_flow);
  fill(sem_pos, sem_pos, true, table.sem_sem);
  fill(flow_pos, sem_pos, false, table.cross);

  int n_total = static_cast<int>(tracks.size());
  if (n_total > cfg.pair_subsample_threshold) {
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    table.flow_flow = detail::subsample_pairs(std::move(table.flow_flow),
                                              static_cast<int>(table.flow_ids.size()),
                                              cfg.pair_keep_top, cfg.pair_keep_random, rng);
    table.sem_sem = detail::subsample_pairs(std::move(table.sem_sem),
                                            static_cast<int>(table.sem_ids.size()),
                                            cfg.pair_keep_top, cfg.pair_keep_random, rng);
  }
  return table;
}

// ---------------------------------------------------------------------------
// The stress objective. Within-partition sums run over ordered pairs as
// printed (twice each stored unordered pair); the cross term carries its
// explicit factor 2.

inline double embedding_stress(const DisplacementTable& t, const std::vector<Vec2>& uf,
                               const std::vector<Vec2>& us) {
  double acc = 0.0;
  for (const auto& p : t.flow_flow) {
    Vec2 r = p.d - (uf[p.a] - uf[p.b]);
    acc += 2.0 * p.weight * r.norm2();
  }
  for (const auto& p : t.sem_sem) {
    Vec2 r = p.d - (us[p.a] - us[p.b]);
    acc += 2.0 * p.weight * r.norm2();
  }
  for (const auto& p : t.cross) {
    Vec2 r = p.d - (uf[p.a] - us[p.b]);
    acc += 2.0 * p.weight * r.norm2();
  }
  return acc;
}

namespace detail {

inline void add_stress_gradient(const std::vector<DisplacementTable::Pair>& pairs,
                                const std::vector<Vec2>& ua, const std::vector<Vec2>& ub,
                                std::vector<Vec2>* ga, std::vector<Vec2>* gb) {
  for (const auto& p : pairs) {
    Vec2 r = p.d - (ua[p.a] - ub[p.b]);
    Vec2 g = r * (-4.0 * p.weight);
    if (ga) (*ga)[p.a] = (*ga)[p.a] + g;
    if (gb) (*gb)[p.b] = (*gb)[p.b] - g;
  }
}

// Exact minimizer of the weighted stress on one combined graph: a weighted
// graph-Laplacian system per coordinate, pinned at one node per component.
// Returns coordinates; components are each pinned at their lowest node.
inline std::vector<Vec2> solve_weighted_stress(
    const std::vector<DisplacementTable::Pair>& pairs, int n,
    std::vector<int>* component_out = nullptr) {
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& p : pairs) parent[find(p.a)] = find(p.b);
  std::vector<int> comp(n);
  for (int i = 0; i < n; ++i) comp[i] = find(i);
  if (component_out) *component_out = comp;

  // One pinned node per component: the smallest index.
  std::vector<char> pinned(n, 0);
  {
    std::vector<int> seen;
    for (int i = 0; i < n; ++i) {
      if (std::find(seen.begin(), seen.end(), comp[i]) == seen.end()) {
        seen.push_back(comp[i]);
        pinned[i] = 1;
      }
    }
  }
  std::vector<int> free_index(n, -1);
  int n_free = 0;
  for (int i = 0; i < n; ++i)
    if (!pinned[i]) free_index[i] = n_free++;

  std::vector<Vec2> coords(n, Vec2{0.0, 0.0});
  if (n_free == 0) return coords;

  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n_free, n_free);
  Eigen::VectorXd rx = Eigen::VectorXd::Zero(n_free);
  Eigen::VectorXd ry = Eigen::VectorXd::Zero(n_free);
  for (const auto& p : pairs) {
    int ia = free_index[p.a], ib = free_index[p.b];
    if (ia >= 0) {
      L(ia, ia) += p.weight;
      rx(ia) += p.weight * p.d.x;
      ry(ia) += p.weight * p.d.y;
    }
    if (ib >= 0) {
      L(ib, ib) += p.weight;
      rx(ib) -= p.weight * p.d.x;
      ry(ib) -= p.weight * p.d.y;
    }
    if (ia >= 0 && ib >= 0) {
      L(ia, ib) -= p.weight;
      L(ib, ia) -= p.weight;
    }
    // Pinned neighbors sit at the origin, so they add nothing to the rhs.
  }
  Eigen::LDLT<Eigen::MatrixXd> solver(L);
  Eigen::VectorXd x = solver.solve(rx);
  Eigen::VectorXd y = solver.solve(ry);
  for (int i = 0; i < n; ++i)
    if (free_index[i] >= 0) coords[i] = {x(free_index[i]), y(free_index[i])};
  return coords;
}

// Affine normalization into Q with a margin, per axis.
struct NormalizeResult {
  Vec2 offset;
  Vec2 scale{1.0, 1.0};
  Vec2 bbox_min, bbox_max;
};

inline NormalizeResult normalize_into_unit(std::vector<Vec2>& pts, double margin = 0.02) {
  NormalizeResult r;
  if (pts.empty()) return r;
  Vec2 lo = pts[0], hi = pts[0];
  for (const auto& p : pts) {
    lo.x = std::min(lo.x, p.x);
    lo.y = std::min(lo.y, p.y);
    hi.x = std::max(hi.x, p.x);
    hi.y = std::max(hi.y, p.y);
  }
  r.bbox_min = lo;
  r.bbox_max = hi;
  auto axis = [&](double mn, double mx, double& scale, double& offset) {
    double range = mx - mn;
    if (range < 1e-12) {
      scale = 1.0;
      offset = mn - 0.5;
    } else {
      scale = (1.0 - 2.0 * margin) / range;
      offset = mn - margin / scale;
    }
  };
  axis(lo.x, hi.x, r.scale.x, r.offset.x);
  axis(lo.y, hi.y, r.scale.y, r.offset.y);
  for (auto& p : pts) p = {(p.x - r.offset.x) * r.scale.x, (p.y - r.offset.y) * r.scale.y};
  return r;
}

inline Embedding package_embedding(const DisplacementTable& table, std::vector<Vec2> uf,
                                   std::vector<Vec2> us, double objective) {
  Embedding e;
  e.objective = objective;
  std::vector<Vec2> all;
  all.reserve(uf.size() + us.size());
  all.insert(all.end(), uf.begin(), uf.end());
  all.insert(all.end(), us.begin(), us.end());
  auto norm = normalize_into_unit(all);
  e.norm_offset = norm.offset;
  e.norm_scale = norm.scale;
  e.prenorm_min = norm.bbox_min;
  e.prenorm_max = norm.bbox_max;
  for (std::size_t i = 0; i < uf.size(); ++i)
    e.entries.push_back({table.flow_ids[i], all[i], 1, std::nullopt});
  for (std::size_t j = 0; j < us.size(); ++j) {
    std::optional<std::int64_t> key;
    if (j < table.sem_keys.size() && table.sem_keys[j] >= 0) key = table.sem_keys[j];
    e.entries.push_back({table.sem_ids[j], all[uf.size() + j], 2, key});
  }
  return e;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Exact minimizer of the full weighted stress (dense solve, small instances).
// Fails on a disconnected pair graph, naming the components.

inline Embedding embed_closed_form_oracle(const DisplacementTable& table) {
  int N = static_cast<int>(table.flow_ids.size());
  int M = static_cast<int>(table.sem_ids.size());
  int n = N + M;
  require(n >= 1 && table.pair_count() > 0, "oracle: empty displacement table");
  require(n <= 200, "oracle: dense solve limited to 200 tracks");

  std::vector<DisplacementTable::Pair> combined;
  combined.reserve(table.pair_count());
  for (const auto& p : table.flow_flow) combined.push_back(p);
  for (const auto& p : table.sem_sem) combined.push_back({p.a + N, p.b + N, p.d, p.weight});
  for (const auto& p : table.cross) combined.push_back({p.a, p.b + N, p.d, p.weight});

  std::vector<int> comp;
  std::vector<Vec2> coords = detail::solve_weighted_stress(combined, n, &comp);
  {
    std::vector<int> roots;
    for (int c : comp)
      if (std::find(roots.begin(), roots.end(), c) == roots.end()) roots.push_back(c);
    if (roots.size() > 1) {
      std::string msg = "oracle: disconnected track graph (" +
                        std::to_string(roots.size()) + " components; representatives:";
      for (int r : roots) {
        std::int64_t id = r < N ? table.flow_ids[r] : table.sem_ids[r - N];
        msg += " " + std::to_string(id);
      }
      throw validation_error(msg + ")");
    }
  }

  std::vector<Vec2> uf(coords.begin(), coords.begin() + N);
  std::vector<Vec2> us(coords.begin() + N, coords.end());
  double obj = embedding_stress(table, uf, us);
  return detail::package_embedding(table, std::move(uf), std::move(us), obj);
}

// ---------------------------------------------------------------------------
// Hybrid embedding: semantic tracks are first placed by an exact solve of
// the semantic-only stress, then flow coordinates descend the full objective
// from a (noise-broken) zero initialization; semantic coordinates join with
// the small step mu2 after l_min iterations.

struct EmbedDiagnostics {
  int iterations = 0;
  int backtracks = 0;
  double initial_objective = 0.0;
  double final_objective = 0.0;
};

inline Embedding embed_hybrid(const DisplacementTable& table, const SolverConfig& cfg,
                              EmbedDiagnostics* diag = nullptr) {
  require(table.pair_count() > 0, "embed_hybrid: empty displacement table");
  int N = static_cast<int>(table.flow_ids.size());
  int M = static_cast<int>(table.sem_ids.size());

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Line 1: semantic-only weighted stress, solved exactly.
  std::vector<Vec2> us(M, Vec2{0.0, 0.0});
  if (M > 0 && !table.sem_sem.empty())
    us = detail::solve_weighted_stress(table.sem_sem, M);

  // Zero-init of the flow coordinates collapses coincident gradients; break
  // ties with small seeded noise.
  std::vector<Vec2> uf(N, Vec2{0.0, 0.0});
  double noise = 1e-3 * std::sqrt(table.tau);
  for (auto& u : uf) u = {noise * gauss(rng), noise * gauss(rng)};

  auto pin_centroid = [&](std::vector<Vec2>& a, std::vector<Vec2>& b) {
    const std::vector<Vec2>& pinned = M > 0 ? b : a;
    if (pinned.empty()) return;
    Vec2 c{0.0, 0.0};
    for (const auto& p : pinned) c = c + p;
    c = c * (1.0 / pinned.size());
    for (auto& p : a) p = p - c;
    for (auto& p : b) p = p - c;
  };
  pin_centroid(uf, us);

  double L = embedding_stress(table, uf, us);
  EmbedDiagnostics d;
  d.initial_objective = L;

  if (N > 0) {  // semantic-only input stops after line 1
    int consecutive_increases = 0;
    std::vector<Vec2> gf(N), gs(M);
    for (int iter = 1; iter <= cfg.l_max; ++iter) {
      ++d.iterations;

      // Backtracking step on one coordinate block; at most 10 halvings, and
      // the step is taken regardless after that (counted as an increase).
      auto step_block = [&](std::vector<Vec2>& block, const std::vector<Vec2>& grad,
                            double mu) -> bool {
        if (mu <= 0.0) return false;
        std::vector<Vec2> trial(block.size());
        double step = mu;
        for (int half = 0; half <= 10; ++half) {
          for (std::size_t i = 0; i < block.size(); ++i)
            trial[i] = block[i] - grad[i] * step;
          std::vector<Vec2>& uf_ref = (&block == &uf) ? trial : uf;
          std::vector<Vec2>& us_ref = (&block == &us) ? trial : us;
          double L_new = embedding_stress(table, uf_ref, us_ref);
          if (L_new <= L * (1.0 + 1e-12) || half == 10) {
            block.swap(trial);
            // Sub-epsilon fluctuations at convergence are not divergence.
            bool increased = L_new > L * (1.0 + 1e-9);
            L = L_new;
            return increased;
          }
          step *= 0.5;
          ++d.backtracks;
        }
        return false;
      };

      std::fill(gf.begin(), gf.end(), Vec2{0.0, 0.0});
      detail::add_stress_gradient(table.flow_flow, uf, uf, &gf, &gf);
      detail::add_stress_gradient(table.cross, uf, us, &gf, nullptr);
      bool increased = step_block(uf, gf, cfg.mu1);

      if (iter > cfg.l_min && M > 0 && cfg.mu2 > 0.0) {
        std::fill(gs.begin(), gs.end(), Vec2{0.0, 0.0});
        detail::add_stress_gradient(table.sem_sem, us, us, &gs, &gs);
        detail::add_stress_gradient(table.cross, uf, us, nullptr, &gs);
        increased |= step_block(us, gs, cfg.mu2);
      }

      pin_centroid(uf, us);
      consecutive_increases = increased ? consecutive_increases + 1 : 0;
      if (consecutive_increases >= 5)
        throw divergence_error("embed_hybrid: objective increased for 5 consecutive steps "
                               "(L = " + std::to_string(L) + " after " +
                               std::to_string(iter) + " iterations)");
    }
  }

  d.final_objective = L;
  if (diag) *diag = d;
  return detail::package_embedding(table, std::move(uf), std::move(us), L);
}

} // namespace mosaic
