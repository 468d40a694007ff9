#pragma once

#include <Eigen/Sparse>

#include <chrono>
#include <random>
#include <string>
#include <vector>

#include "mosaic/adam.hpp"
#include "mosaic/core.hpp"
#include "mosaic/embed.hpp"
#include "mosaic/flow.hpp"
#include "mosaic/io.hpp"
#include "mosaic/parallel.hpp"
#include "mosaic/render.hpp"
#include "mosaic/warpfield.hpp"

namespace mosaic {

struct EnergyTerms {
  double e_data = 0.0;  // L1 over covered, in-mask pixels
  double e_b = 0.0;
  double e_c = 0.0;
  double uncovered_cost = 0.0;  // fixed cost per in-mask pixel with no coverage
  double total = 0.0;
};

// Per-pixel cost of leaving an in-mask pixel uncovered. Without it the
// covered-only data term rewards shrinking coverage (dropping a pixel always
// removes its residual); this is the pixel-level analogue of the constant
// invisible cost in the visibility step.
inline double uncovered_pixel_cost(const SolverConfig& cfg) {
  return 3.0 * cfg.vis_residual_cost;
}

// Full model energy: L1 data term over covered in-mask pixels (through the
// lighting correction when active), Tikhonov on visibility, L2 on the
// mosaic, plus the uncovered-pixel cost that guards coverage.
inline EnergyTerms evaluate_energy(const ImageSequence& seq, const ShotModel& model,
                                   const SolverConfig& cfg) {
  const int T = seq.count();
  std::vector<double> e_data(T, 0.0), e_b(T, 0.0);
  std::vector<std::size_t> uncov(T, 0);
  parallel_for(T, [&](std::size_t t) {
    RenderedFrame r = render_frame(model, static_cast<int>(t));
    const Image* mask = seq.has_masks() ? &seq.masks[t] : nullptr;
    DataEnergy de = data_energy_frame(seq.frames[t], r, mask,
                                      model.lighting.active() ? &model.lighting : nullptr,
                                      static_cast<int>(t));
    e_data[t] = de.total;
    uncov[t] = de.uncovered;
    e_b[t] = tikhonov_energy(model.visibility.frames[t]);
  });
  EnergyTerms e;
  std::size_t uncovered = 0;
  for (int t = 0; t < T; ++t) {
    e.e_data += e_data[t];
    e.e_b += e_b[t];
    uncovered += uncov[t];
  }
  e.e_c = l2_energy(model.mosaic.color);
  e.uncovered_cost = uncovered_pixel_cost(cfg) * static_cast<double>(uncovered);
  e.total = e.e_data + cfg.lambda_b * e.e_b + cfg.lambda_c * e.e_c + e.uncovered_cost;
  return e;
}

// ---------------------------------------------------------------------------
// Visibility estimation. Separable in t; each frame minimizes
//   sum_u [ b_u r_u + (1 - b_u) r0 ] + lambda_b |grad b|^2
// over b = sigmoid(beta) with Adam, where r_u is the pulled per-texel
// residual |C(u) - I(w(u,t))| and r0 the constant cost of marking a texel
// invisible. Texels warped outside the frame get b = 0 directly.

namespace detail {

// Pulled residual per texel; negative values flag "no data force".
inline Image visibility_residual(const ImageSequence& seq, const ShotModel& model, int t,
                                 double r0) {
  const MosaicGrid& g = model.grid;
  const Image& warp = model.warps.frames[t];
  Image r(g.width, g.height, 1, static_cast<float>(r0));
  for (int j = 0; j < g.height; ++j)
    for (int i = 0; i < g.width; ++i) {
      double px = warp.at(i, j, 0), py = warp.at(i, j, 1);
      if (!in_frame(seq.width, seq.height, px, py)) {
        r.at(i, j) = -1.f;  // out of frame: b forced to 0
        continue;
      }
      if (model.mosaic.coverage.at(i, j) <= 0.f) continue;  // neutral
      int ix = static_cast<int>(std::lround(px)), iy = static_cast<int>(std::lround(py));
      if (!seq.in_mask(std::clamp(ix, 0, seq.width - 1), std::clamp(iy, 0, seq.height - 1), t))
        continue;  // outside the object mask: neutral
      double acc = 0.0;
      for (int c = 0; c < 3; ++c) {
        double pred = model.mosaic.color.at(i, j, c);
        if (model.lighting.active())
          pred = model.lighting.gain_at(t, px, py, c) * pred +
                 model.lighting.offset_at(t, px, py, c);
        acc += std::abs(pred - seq.frames[t].sample(px, py, c));
      }
      r.at(i, j) = static_cast<float>(acc / 3.0);
    }
  return r;
}

} // namespace detail

inline void estimate_visibility(const ImageSequence& seq, ShotModel& model,
                                const SolverConfig& cfg) {
  const int T = seq.count();
  const MosaicGrid g = model.grid;
  const double r0 = cfg.vis_residual_cost;

  parallel_for(T, [&](std::size_t ti) {
    const int t = static_cast<int>(ti);
    Image resid = detail::visibility_residual(seq, model, t, r0);

    const std::size_t n = static_cast<std::size_t>(g.width) * g.height;
    std::vector<float> beta(n, 2.f);  // b ~ 0.88
    Image b(g.width, g.height, 1);
    auto refresh_b = [&] {
      for (std::size_t k = 0; k < n; ++k)
        b.data[k] = resid.data[k] < 0.f ? 0.f : 1.f / (1.f + std::exp(-beta[k]));
    };
    refresh_b();

    auto energy = [&]() {
      double e = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        if (resid.data[k] < 0.f) continue;
        e += b.data[k] * resid.data[k] + (1.0 - b.data[k]) * r0;
      }
      return e + cfg.lambda_b * tikhonov_energy(b);
    };

    AdamState adam(n);
    std::vector<double> grad(n);
    double prev_e = energy();
    for (int iter = 0; iter < cfg.vis_iters; ++iter) {
      Image gb(g.width, g.height, 1);
      for (std::size_t k = 0; k < n; ++k)
        gb.data[k] = resid.data[k] < 0.f ? 0.f : resid.data[k] - static_cast<float>(r0);
      add_tikhonov_gradient(b, cfg.lambda_b, gb);
      for (std::size_t k = 0; k < n; ++k) {
        if (resid.data[k] < 0.f) {
          grad[k] = 0.0;
          continue;
        }
        double s = b.data[k];
        grad[k] = gb.data[k] * s * (1.0 - s);  // chain through the logit
      }
      adam.step(beta, grad, cfg.vis_lr);
      refresh_b();

      double e = energy();
      if (std::abs(prev_e - e) <= cfg.vis_tol * std::max(1.0, std::abs(prev_e))) break;
      prev_e = e;
    }

    b.clamp(0.f, 1.f);
    model.visibility.frames[t] = std::move(b);
  });
}

// ---------------------------------------------------------------------------
// Mosaic estimation: Adam SGD on E_data + lambda_c |C|^2 with random frame
// batches; the learning rate decays linearly to mosaic_lr_final. The mosaic
// is clamped to [0,1] after the last epoch.

inline void estimate_mosaic(const ImageSequence& seq, ShotModel& model, const SolverConfig& cfg,
                            std::mt19937_64& rng) {
  const int T = seq.count();
  const MosaicGrid g = model.grid;
  const std::size_t n = static_cast<std::size_t>(g.width) * g.height * 3;

  std::vector<Image> jac(T);
  parallel_for(T, [&](std::size_t t) { jac[t] = jacobian_determinant(model.warps.frames[t]); });

  const int batch = std::max(1, std::min(cfg.mosaic_batch, T));
  const int steps_per_epoch = (T + batch - 1) / batch;
  const long total_steps = static_cast<long>(cfg.mosaic_epochs) * steps_per_epoch;

  AdamState adam(n);
  std::vector<double> grad(n);
  std::vector<int> order(T);
  std::iota(order.begin(), order.end(), 0);

  long step_idx = 0;
  for (int epoch = 0; epoch < cfg.mosaic_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int s = 0; s < steps_per_epoch; ++s) {
      std::vector<int> frames(order.begin() + s * batch,
                              order.begin() + std::min<std::size_t>(T, (s + 1) * batch));
      std::vector<Image> partial(frames.size());
      parallel_for(frames.size(), [&](std::size_t k) {
        int t = frames[k];
        RenderedFrame r =
            render_field(model.mosaic.color, model.warps.frames[t], jac[t],
                         &model.visibility.frames[t], seq.width, seq.height);
        Image gimg(g.width, g.height, 3);
        accumulate_mosaic_gradient(seq.frames[t], model.warps.frames[t], jac[t],
                                   model.visibility.frames[t], r,
                                   seq.has_masks() ? &seq.masks[t] : nullptr,
                                   model.lighting.active() ? &model.lighting : nullptr, t, gimg);
        partial[k] = std::move(gimg);
      });
      const double scale = static_cast<double>(T) / frames.size();
      for (std::size_t i = 0; i < n; ++i) grad[i] = 0.0;
      for (const auto& p : partial)
        for (std::size_t i = 0; i < n; ++i) grad[i] += scale * p.data[i];
      for (std::size_t i = 0; i < n; ++i)
        grad[i] += 2.0 * cfg.lambda_c * model.mosaic.color.data[i];

      double a = total_steps > 1 ? static_cast<double>(step_idx) / (total_steps - 1) : 0.0;
      double lr = cfg.mosaic_lr + a * (cfg.mosaic_lr_final - cfg.mosaic_lr);
      adam.step(model.mosaic.color.data, grad, lr);
      ++step_idx;
    }
  }
  model.mosaic.color.clamp(0.f, 1.f);
}

// ---------------------------------------------------------------------------
// Mapping refinement: dense flow between the reconstruction and the original
// frame, post-composed onto the warp in image space. A frame reverts when its
// data energy worsens by more than the guard fraction. External 2-channel PFM
// flow files (one per frame) substitute for the built-in flow when given.

inline void refine_mapping(const ImageSequence& seq, ShotModel& model, const SolverConfig& cfg,
                           const std::string& external_flow_dir = "") {
  const int T = seq.count();
  parallel_for(T, [&](std::size_t ti) {
    const int t = static_cast<int>(ti);
    Image jac = jacobian_determinant(model.warps.frames[t]);
    RenderedFrame r0 = render_field(model.mosaic.color, model.warps.frames[t], jac,
                                    &model.visibility.frames[t], seq.width, seq.height);
    const Image* mask = seq.has_masks() ? &seq.masks[t] : nullptr;
    const LightingField* light = model.lighting.active() ? &model.lighting : nullptr;
    const double kappa = uncovered_pixel_cost(cfg);
    DataEnergy de0 = data_energy_frame(seq.frames[t], r0, mask, light, t);
    double e_before = de0.total + kappa * de0.uncovered;

    Image flow;
    if (!external_flow_dir.empty()) {
      flow = read_pfm((fs::path(external_flow_dir) / frame_name(t)).string());
      require(flow.width == seq.width && flow.height == seq.height,
              "external flow dimension mismatch at frame " + std::to_string(t));
      if (flow.channels == 3) {  // tolerate 3-channel files; third plane ignored
        Image f2(flow.width, flow.height, 2);
        for (int y = 0; y < flow.height; ++y)
          for (int x = 0; x < flow.width; ++x) {
            f2.at(x, y, 0) = flow.at(x, y, 0);
            f2.at(x, y, 1) = flow.at(x, y, 1);
          }
        flow = std::move(f2);
      }
    } else {
      // Lighting-corrected reconstruction, so flow sees matched brightness.
      Image recon = r0.color;
      if (light)
        for (int y = 0; y < recon.height; ++y)
          for (int x = 0; x < recon.width; ++x)
            for (int c = 0; c < 3; ++c)
              recon.at(x, y, c) = static_cast<float>(corrected_value(r0, light, t, x, y, c));
      flow = diffusion_flow(recon, seq.frames[t], cfg.flow_levels, cfg.flow_iters,
                            cfg.flow_alpha, cfg.flow_max_disp);
    }

    Image warped = model.warps.frames[t];
    for (int j = 0; j < warped.height; ++j)
      for (int i = 0; i < warped.width; ++i) {
        double px = warped.at(i, j, 0), py = warped.at(i, j, 1);
        if (!in_frame(seq.width, seq.height, px, py)) continue;
        warped.at(i, j, 0) += flow.sample(px, py, 0);
        warped.at(i, j, 1) += flow.sample(px, py, 1);
      }

    Image jac2 = jacobian_determinant(warped);
    RenderedFrame r1 = render_field(model.mosaic.color, warped, jac2,
                                    &model.visibility.frames[t], seq.width, seq.height);
    DataEnergy de1 = data_energy_frame(seq.frames[t], r1, mask, light, t);
    double e_after = de1.total + kappa * de1.uncovered;
    if (e_after <= e_before * (1.0 + cfg.refine_guard))
      model.warps.frames[t] = std::move(warped);
    // otherwise: revert (keep the old warp)
  });
  model.warps.inverse.clear();
  model.warps.inverse_ok.clear();
}

// ---------------------------------------------------------------------------
// Lighting: per frame and channel, least-squares gain/offset on a coarse grid
// minimizing |a*R + c - I|^2 + lambda_s (|grad a|^2 + |grad c|^2), gains
// clamped to [0.2, 5] and offsets to [-1, 1].

inline void fit_lighting(const ImageSequence& seq, ShotModel& model, const SolverConfig& cfg) {
  const int T = seq.count();
  LightingField lf;
  lf.factor = cfg.light_factor;
  lf.frame_width = seq.width;
  lf.frame_height = seq.height;
  lf.gain.resize(T);
  lf.offset.resize(T);

  const int cw = std::max(1, (seq.width + cfg.light_factor - 1) / cfg.light_factor);
  const int ch = std::max(1, (seq.height + cfg.light_factor - 1) / cfg.light_factor);
  const int N = cw * ch;

  parallel_for(T, [&](std::size_t ti) {
    const int t = static_cast<int>(ti);
    Image jac = jacobian_determinant(model.warps.frames[t]);
    RenderedFrame r = render_field(model.mosaic.color, model.warps.frames[t], jac,
                                   &model.visibility.frames[t], seq.width, seq.height);
    Image gain(cw, ch, 3, 1.f), offset(cw, ch, 3, 0.f);

    for (int c = 0; c < 3; ++c) {
      // Unknowns [a_0..a_{N-1}, c_0..c_{N-1}].
      std::vector<Eigen::Triplet<double>> trip;
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * N);
      const double sx = static_cast<double>(seq.width) / cw;
      const double sy = static_cast<double>(seq.height) / ch;

      for (int y = 0; y < seq.height; ++y)
        for (int x = 0; x < seq.width; ++x) {
          if (!r.covered(x, y)) continue;
          if (seq.has_masks() && seq.masks[t].at(x, y) <= 0.5f) continue;
          double R = r.color.at(x, y, c);
          double I = seq.frames[t].at(x, y, c);
          double gx = std::clamp((x + 0.5) / sx - 0.5, 0.0, cw - 1.0);
          double gy = std::clamp((y + 0.5) / sy - 0.5, 0.0, ch - 1.0);
          int x0 = static_cast<int>(gx), y0 = static_cast<int>(gy);
          int x1 = std::min(x0 + 1, cw - 1), y1 = std::min(y0 + 1, ch - 1);
          double ax = gx - x0, ay = gy - y0;
          int nodes[4] = {y0 * cw + x0, y0 * cw + x1, y1 * cw + x0, y1 * cw + x1};
          double phi[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
          for (int p = 0; p < 4; ++p) {
            if (phi[p] == 0.0) continue;
            for (int q = 0; q < 4; ++q) {
              if (phi[q] == 0.0) continue;
              double pq = phi[p] * phi[q];
              trip.emplace_back(nodes[p], nodes[q], pq * R * R);          // a-a
              trip.emplace_back(nodes[p], N + nodes[q], pq * R);          // a-c
              trip.emplace_back(N + nodes[p], nodes[q], pq * R);          // c-a
              trip.emplace_back(N + nodes[p], N + nodes[q], pq);          // c-c
            }
            rhs(nodes[p]) += phi[p] * R * I;
            rhs(N + nodes[p]) += phi[p] * I;
          }
        }

      // Smoothness over coarse 4-neighborhoods, plus a weak anchor to
      // (a, c) = (1, 0) that fixes nodes with no data.
      auto add_edge = [&](int i, int j) {
        for (int off : {0, N}) {
          trip.emplace_back(off + i, off + i, cfg.light_lambda);
          trip.emplace_back(off + j, off + j, cfg.light_lambda);
          trip.emplace_back(off + i, off + j, -cfg.light_lambda);
          trip.emplace_back(off + j, off + i, -cfg.light_lambda);
        }
      };
      for (int gy = 0; gy < ch; ++gy)
        for (int gx = 0; gx < cw; ++gx) {
          if (gx + 1 < cw) add_edge(gy * cw + gx, gy * cw + gx + 1);
          if (gy + 1 < ch) add_edge(gy * cw + gx, (gy + 1) * cw + gx);
        }
      const double anchor = 1e-6;
      for (int i = 0; i < N; ++i) {
        trip.emplace_back(i, i, anchor);
        rhs(i) += anchor * 1.0;
        trip.emplace_back(N + i, N + i, anchor);
      }

      Eigen::SparseMatrix<double> A(2 * N, 2 * N);
      A.setFromTriplets(trip.begin(), trip.end());
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
      Eigen::VectorXd sol = solver.solve(rhs);

      for (int i = 0; i < N; ++i) {
        gain.data[static_cast<std::size_t>(i) * 3 + c] =
            static_cast<float>(std::clamp(sol(i), 0.2, 5.0));
        offset.data[static_cast<std::size_t>(i) * 3 + c] =
            static_cast<float>(std::clamp(sol(N + i), -1.0, 1.0));
      }
    }
    lf.gain[t] = std::move(gain);
    lf.offset[t] = std::move(offset);
  });
  model.lighting = std::move(lf);
}

// ---------------------------------------------------------------------------
// The alternating pipeline. Every stage is guarded: if it raises the total
// energy, its output is reverted and the previous energy re-recorded, so the
// checkpoint sequence is non-increasing by construction.

namespace detail {

class StageRunner {
public:
  StageRunner(const ImageSequence& seq, ShotModel& model, const SolverConfig& cfg)
      : seq_(seq), model_(model), cfg_(cfg) {
    current_ = evaluate_energy(seq_, model_, cfg_);
    log_row("init", 0, 0.0);
  }

  // Runs one stage; `snapshot`/`restore` bracket the fields it may change.
  template <typename Fn, typename Snap, typename Restore>
  bool run(const std::string& name, int sweep, Fn&& fn, Snap&& snapshot, Restore&& restore) {
    auto t0 = std::chrono::steady_clock::now();
    auto saved = snapshot();
    fn();
    EnergyTerms after = evaluate_energy(seq_, model_, cfg_);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (after.total <= current_.total * (1.0 + 1e-9)) {
      current_ = after;
      log_row(name, sweep, secs);
      return true;
    }
    restore(std::move(saved));
    reverted_.push_back(name);
    log_row(name + "(reverted)", sweep, secs);
    return false;
  }

  const EnergyTerms& current() const { return current_; }
  const std::vector<std::string>& reverted() const { return reverted_; }

private:
  void log_row(const std::string& stage, int sweep, double secs) {
    model_.energy_log.push_back({stage, sweep, current_.e_data, current_.e_b, current_.e_c,
                                 current_.total, secs});
  }
  const ImageSequence& seq_;
  ShotModel& model_;
  const SolverConfig& cfg_;
  EnergyTerms current_;
  std::vector<std::string> reverted_;
};

} // namespace detail

// One full sweep schedule over a prepared model (embedding, warps and mosaic
// already initialized). Shared by the single-resolution and coarse-to-fine
// drivers.
inline void run_estimation_stages(const ImageSequence& seq, ShotModel& model,
                                  const SolverConfig& cfg, std::mt19937_64& rng,
                                  const std::string& external_flow_dir = "") {
  detail::StageRunner runner(seq, model, cfg);

  auto snap_vis = [&] { return model.visibility.frames; };
  auto rest_vis = [&](std::vector<Image>&& s) { model.visibility.frames = std::move(s); };
  auto snap_mosaic = [&] { return model.mosaic.color; };
  auto rest_mosaic = [&](Image&& s) { model.mosaic.color = std::move(s); };
  auto snap_warp = [&] { return model.warps.frames; };
  auto rest_warp = [&](std::vector<Image>&& s) { model.warps.frames = std::move(s); };
  auto snap_light = [&] { return model.lighting; };
  auto rest_light = [&](LightingField&& s) { model.lighting = std::move(s); };

  for (int sweep = 1; sweep <= cfg.n_sweeps; ++sweep) {
    runner.run("estimate_visibility", sweep,
               [&] { estimate_visibility(seq, model, cfg); }, snap_vis, rest_vis);
    runner.run("estimate_mosaic", sweep,
               [&] { estimate_mosaic(seq, model, cfg, rng); }, snap_mosaic, rest_mosaic);
  }
  runner.run("fit_lighting", cfg.n_sweeps,
             [&] { fit_lighting(seq, model, cfg); }, snap_light, rest_light);
  runner.run("refine_mapping", cfg.n_sweeps,
             [&] { refine_mapping(seq, model, cfg, external_flow_dir); }, snap_warp, rest_warp);
  const int final_sweep = cfg.n_sweeps + 1;
  runner.run("estimate_visibility", final_sweep,
             [&] { estimate_visibility(seq, model, cfg); }, snap_vis, rest_vis);
  runner.run("estimate_mosaic", final_sweep,
             [&] { estimate_mosaic(seq, model, cfg, rng); }, snap_mosaic, rest_mosaic);

  for (const auto& name : runner.reverted())
    model.provenance.warnings.push_back("stage reverted by energy guard: " + name);
}

// Initial visibility: 1 on texels warped into the frame, 0 elsewhere.
inline VisibilityField initial_visibility(const WarpField& warps, int W, int H) {
  VisibilityField vis;
  vis.grid = warps.grid;
  for (const auto& warp : warps.frames) {
    Image b(warps.grid.width, warps.grid.height, 1, 0.f);
    for (int j = 0; j < warps.grid.height; ++j)
      for (int i = 0; i < warps.grid.width; ++i)
        if (in_frame(W, H, warp.at(i, j, 0), warp.at(i, j, 1))) b.at(i, j) = 1.f;
    vis.frames.push_back(std::move(b));
  }
  return vis;
}

// Full single-resolution solve: embedding -> dense warps -> mosaic init ->
// alternating estimation with energy checkpoints.
inline ShotModel solve_shot(const ImageSequence& seq, const TrackSet& tracks,
                            const SolverConfig& cfg,
                            const std::string& external_flow_dir = "") {
  cfg.validate();
  seq.validate();
  validate_tracks(tracks, seq.count());

  std::mt19937_64 rng(cfg.seed ^ 0xda3e39cb94b95bdbull);

  ShotModel model;
  model.width = seq.width;
  model.height = seq.height;
  model.provenance.seed = cfg.seed;
  model.provenance.config_hash = config_hash(cfg);

  double tau = cfg.resolve_tau(seq.width, seq.height);
  DisplacementTable table = pairwise_max_displacement(tracks, tau, cfg);
  model.embedding = embed_hybrid(table, cfg);

  model.grid = choose_grid(seq.width, seq.height, cfg.grid_scale,
                           model.embedding.prenorm_aspect());
  model.warps = interpolate_mapping(model.embedding, tracks, model.grid, seq.count(), cfg);
  model.visibility = initial_visibility(model.warps, seq.width, seq.height);
  model.mosaic = init_mosaic(seq, model.warps);

  for (int t = 0; t < seq.count(); ++t)
    if (!model.warps.constrained[t])
      model.provenance.warnings.push_back("frame " + std::to_string(t) +
                                          " had fewer than 3 visible tracks; copied nearest warp");

  run_estimation_stages(seq, model, cfg, rng, external_flow_dir);
  model.validate();
  return model;
}

} // namespace mosaic
