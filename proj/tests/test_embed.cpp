#include <gtest/gtest.h>

#include <random>

#include "mosaic/embed.hpp"

using namespace mosaic;

namespace {

Track make_track(std::int64_t id, TrackKind kind, std::vector<std::array<double, 2>> pos,
                 std::vector<bool> vis = {}, std::optional<std::int64_t> key = {}) {
  Track t;
  t.id = id;
  t.kind = kind;
  if (kind == TrackKind::Semantic) t.semantic_key = key.value_or(id);
  for (std::size_t i = 0; i < pos.size(); ++i)
    t.samples.push_back({static_cast<int>(i), pos[i][0], pos[i][1],
                         vis.empty() ? true : static_cast<bool>(vis[i])});
  return t;
}

TrackSet random_tracks(int n, int frames, std::uint64_t seed, bool with_semantic = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 100.0);
  std::uniform_real_distribution<double> step(-3.0, 3.0);
  TrackSet ts;
  for (int i = 0; i < n; ++i) {
    Track t;
    t.id = i;
    t.kind = (with_semantic && i % 3 == 0) ? TrackKind::Semantic : TrackKind::Flow;
    if (t.kind == TrackKind::Semantic) t.semantic_key = i;
    double x = unif(rng), y = unif(rng);
    for (int f = 0; f < frames; ++f) {
      t.samples.push_back({f, x, y, true});
      x += step(rng);
      y += step(rng);
    }
    ts.push_back(std::move(t));
  }
  return ts;
}

} // namespace

TEST(Displacements, PicksFrameOfMaxSeparation) {
  TrackSet ts = {make_track(0, TrackKind::Flow, {{0, 0}, {0, 0}}),
                 make_track(1, TrackKind::Flow, {{1, 0}, {3, 0}})};
  DisplacementTable table = pairwise_max_displacement(ts, 1e4);
  ASSERT_EQ(table.flow_flow.size(), 1u);
  EXPECT_DOUBLE_EQ(table.flow_flow[0].d.x, -3.0);  // x_1(1) - x_2(1)
  EXPECT_DOUBLE_EQ(table.flow_flow[0].d.y, 0.0);
}

TEST(Displacements, OverlapRule) {
  TrackSet ts = {make_track(0, TrackKind::Flow, {{0, 0}, {1, 1}, {9, 9}}, {true, true, false}),
                 make_track(1, TrackKind::Flow, {{5, 5}, {4, 0}, {2, 2}}, {false, true, true})};
  DisplacementTable table = pairwise_max_displacement(ts, 1e4);
  ASSERT_EQ(table.flow_flow.size(), 1u);
  // only t=1 is commonly visible
  EXPECT_DOUBLE_EQ(table.flow_flow[0].d.x, 1.0 - 4.0);
  EXPECT_DOUBLE_EQ(table.flow_flow[0].d.y, 1.0 - 0.0);
}

TEST(Displacements, EmptyOverlapOmitted) {
  TrackSet ts = {make_track(0, TrackKind::Flow, {{0, 0}, {1, 1}}, {true, false}),
                 make_track(1, TrackKind::Flow, {{5, 5}, {4, 4}}, {false, true})};
  DisplacementTable table = pairwise_max_displacement(ts, 1e4);
  EXPECT_TRUE(table.flow_flow.empty());
}

TEST(Displacements, StaticTracksUseFrameZeroDifferences) {
  TrackSet ts = {make_track(0, TrackKind::Flow, {{0, 0}, {0, 0}}),
                 make_track(1, TrackKind::Flow, {{1, 0}, {1, 0}}),
                 make_track(2, TrackKind::Flow, {{0, 1}, {0, 1}})};
  DisplacementTable table = pairwise_max_displacement(ts, 1e4);
  ASSERT_EQ(table.flow_flow.size(), 3u);
  for (const auto& p : table.flow_flow) {
    Vec2 expected{ts[p.a].samples[0].x - ts[p.b].samples[0].x,
                  ts[p.a].samples[0].y - ts[p.b].samples[0].y};
    EXPECT_DOUBLE_EQ(p.d.x, expected.x);
    EXPECT_DOUBLE_EQ(p.d.y, expected.y);
  }
}

TEST(Displacements, TranslationInvariance) {
  TrackSet ts = random_tracks(6, 4, 11);
  DisplacementTable a = pairwise_max_displacement(ts, 1e4);
  for (auto& t : ts)
    for (auto& s : t.samples) {
      s.x += 1234.5;
      s.y -= 77.25;
    }
  DisplacementTable b = pairwise_max_displacement(ts, 1e4);
  ASSERT_EQ(a.flow_flow.size(), b.flow_flow.size());
  for (std::size_t i = 0; i < a.flow_flow.size(); ++i) {
    // Exact up to float rounding of the shifted positions.
    EXPECT_NEAR(a.flow_flow[i].d.x, b.flow_flow[i].d.x, 1e-9);
    EXPECT_NEAR(a.flow_flow[i].d.y, b.flow_flow[i].d.y, 1e-9);
    EXPECT_NEAR(a.flow_flow[i].weight, b.flow_flow[i].weight, 1e-12);
  }
}

TEST(Oracle, TwoTracksSingleConstraint) {
  TrackSet ts = {make_track(0, TrackKind::Flow, {{4, 0}}), make_track(1, TrackKind::Flow, {{0, 0}})};
  DisplacementTable table = pairwise_max_displacement(ts, 1e4);
  Embedding e = embed_closed_form_oracle(table);
  Vec2 u0 = e.denormalize(e.find(0)->u);
  Vec2 u1 = e.denormalize(e.find(1)->u);
  EXPECT_NEAR(u0.x - u1.x, 4.0, 1e-9);
  EXPECT_NEAR(u0.y - u1.y, 0.0, 1e-9);
  EXPECT_NEAR(e.objective, 0.0, 1e-12);
}

TEST(Oracle, DisconnectedGraphErrors) {
  // Two islands with no common visible frames between them.
  TrackSet ts = {make_track(0, TrackKind::Flow, {{0, 0}, {1, 1}}, {true, false}),
                 make_track(1, TrackKind::Flow, {{2, 0}, {1, 1}}, {true, false}),
                 make_track(2, TrackKind::Flow, {{5, 5}, {6, 6}}, {false, true}),
                 make_track(3, TrackKind::Flow, {{7, 5}, {8, 6}}, {false, true})};
  DisplacementTable table = pairwise_max_displacement(ts, 1e4);
  EXPECT_THROW(embed_closed_form_oracle(table), validation_error);
}

TEST(Oracle, ExactMinimizerBeatsGradientDescent) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    TrackSet ts = random_tracks(10, 5, seed);
    DisplacementTable table = pairwise_max_displacement(ts, 4e4);
    Embedding oracle = embed_closed_form_oracle(table);
    SolverConfig cfg;
    cfg.seed = seed;
    cfg.l_min = 5;
    cfg.l_max = 500;
    cfg.mu1 = 1e-2;
    cfg.mu2 = 1e-2;
    Embedding gd = embed_hybrid(table, cfg);
    EXPECT_LE(oracle.objective, gd.objective * (1.0 + 1e-9));
  }
}

TEST(Hybrid, StaticSceneReachesZeroStress) {
  // Constant tracks: frame-0 geometry is exactly embeddable.
  TrackSet ts;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(0.0, 50.0);
  for (int i = 0; i < 8; ++i) {
    double x = unif(rng), y = unif(rng);
    ts.push_back(make_track(i, TrackKind::Flow, {{x, y}, {x, y}, {x, y}}));
  }
  DisplacementTable table = pairwise_max_displacement(ts, 4e4);
  SolverConfig cfg;
  cfg.l_min = 10;
  cfg.l_max = 4000;
  cfg.mu1 = 1e-2;
  Embedding e = embed_hybrid(table, cfg);
  EXPECT_LE(e.objective, 1e-8);

  // The embedding reproduces frame-0 geometry up to translation + per-axis scale.
  for (int i = 1; i < 8; ++i) {
    Vec2 du = e.denormalize(e.find(i)->u) - e.denormalize(e.find(0)->u);
    Vec2 dx{ts[i].samples[0].x - ts[0].samples[0].x, ts[i].samples[0].y - ts[0].samples[0].y};
    EXPECT_NEAR(du.x, dx.x, 1e-4);
    EXPECT_NEAR(du.y, dx.y, 1e-4);
  }
}

TEST(Hybrid, FlowOnlyMatchesOracleWithinTenth) {
  TrackSet ts = random_tracks(4, 3, 21);
  DisplacementTable table = pairwise_max_displacement(ts, 4e4);
  Embedding oracle = embed_closed_form_oracle(table);
  SolverConfig cfg;
  cfg.l_min = 5;
  cfg.l_max = 2000;
  cfg.mu1 = 1e-2;
  cfg.mu2 = 1e-2;
  Embedding gd = embed_hybrid(table, cfg);
  EXPECT_LE(gd.objective, oracle.objective * 1.001 + 1e-12);
}

TEST(Hybrid, SemanticOnlyStopsAfterLineOne) {
  TrackSet ts;
  for (int i = 0; i < 12; ++i) {
    double x = 3.0 * i, y = 50.0 - 2.0 * i;
    ts.push_back(make_track(i, TrackKind::Semantic, {{x, y}, {x + 1, y}}, {}, i));
  }
  DisplacementTable table = pairwise_max_displacement(ts, 4e4);
  SolverConfig cfg;
  cfg.l_min = 5;
  cfg.l_max = 10;
  EmbedDiagnostics diag;
  Embedding e = embed_hybrid(table, cfg, &diag);
  EXPECT_EQ(diag.iterations, 0);  // no flow terms: line 1 then stop
  EXPECT_EQ(e.entries.size(), 12u);
  // Line 1 solves the semantic-only stress exactly; static-ish geometry fits well.
  EXPECT_LE(e.objective, 1e-10);
}

TEST(Hybrid, SemanticFrozenWithZeroMu2) {
  TrackSet ts = random_tracks(9, 4, 31, /*with_semantic=*/true);
  DisplacementTable table = pairwise_max_displacement(ts, 4e4);
  SolverConfig cfg;
  cfg.l_min = 3;
  cfg.l_max = 50;
  cfg.mu2 = 0.0;
  Embedding with_steps = embed_hybrid(table, cfg);

  cfg.l_max = 4;  // stop right after l_min: u2 still the line-1 init
  Embedding early = embed_hybrid(table, cfg);
  for (const auto& entry : with_steps.entries) {
    if (entry.partition != 2) continue;
    Vec2 a = with_steps.denormalize(entry.u);
    Vec2 b = early.denormalize(early.find(entry.id)->u);
    EXPECT_NEAR(a.x, b.x, 1e-9);
    EXPECT_NEAR(a.y, b.y, 1e-9);
  }
}

TEST(Hybrid, AcceptedStepsNeverIncreaseObjective) {
  TrackSet ts = random_tracks(12, 5, 77, true);
  DisplacementTable table = pairwise_max_displacement(ts, 4e4);
  SolverConfig cfg;
  cfg.l_min = 10;
  cfg.l_max = 300;
  cfg.mu1 = 2e-2;
  cfg.mu2 = 1e-3;
  EmbedDiagnostics diag;
  Embedding e = embed_hybrid(table, cfg, &diag);
  EXPECT_LE(diag.final_objective, diag.initial_objective);
  EXPECT_GT(e.entries.size(), 0u);
}

TEST(Hybrid, DivergenceAborts) {
  TrackSet ts = random_tracks(8, 4, 3);
  DisplacementTable table = pairwise_max_displacement(ts, 4e4);
  SolverConfig cfg;
  cfg.mu1 = 1e12;  // explodes even after ten halvings
  cfg.mu2 = 0.0;
  cfg.l_min = 1;
  cfg.l_max = 50;
  EXPECT_THROW(embed_hybrid(table, cfg), divergence_error);
}
