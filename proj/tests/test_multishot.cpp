#include <gtest/gtest.h>

#include "mosaic/edit.hpp"
#include "mosaic/multishot.hpp"
#include "mosaic/synth.hpp"

using namespace mosaic;

namespace {

// A synthetic shot model whose mosaic parameterization is an affine map M of
// the shared texture domain: texel u shows texture(M^-1(u)), semantic keys
// embed at M(site). Two such models are related by an exactly known affine
// mosaic-to-mosaic warp.
ShotModel synthetic_shot(const Image& texture, const Affine2& M, int grid_n, int n_keys) {
  ShotModel m;
  m.width = texture.width;
  m.height = texture.height;
  m.grid = {grid_n, grid_n};
  m.mosaic.grid = m.grid;
  m.mosaic.color = Image(grid_n, grid_n, 3);
  m.mosaic.coverage = Image(grid_n, grid_n, 1, 0.f);
  Affine2 Minv = M.inverse();
  for (int j = 0; j < grid_n; ++j)
    for (int i = 0; i < grid_n; ++i) {
      Vec2 u = grid_to_unit(i, j, m.grid);
      Vec2 q = Minv(u);
      if (q.x < 0 || q.x > 1 || q.y < 0 || q.y > 1) continue;
      m.mosaic.coverage.at(i, j) = 1.f;
      for (int c = 0; c < 3; ++c)
        m.mosaic.color.at(i, j, c) =
            texture.sample(q.x * texture.width - 0.5, q.y * texture.height - 0.5, c);
    }

  int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_keys))));
  int key = 0;
  for (int j = 0; j < side && key < n_keys; ++j)
    for (int i = 0; i < side && key < n_keys; ++i, ++key) {
      Vec2 site{0.05 + 0.9 * (side == 1 ? 0.5 : static_cast<double>(i) / (side - 1)),
                0.05 + 0.9 * (side == 1 ? 0.5 : static_cast<double>(j) / (side - 1))};
      Embedding::Entry e;
      e.id = key;
      e.partition = 2;
      e.semantic_key = key;
      e.u = M(site);
      m.embedding.entries.push_back(e);
    }
  // one frame of plumbing so the model is structurally valid
  m.warps.grid = m.grid;
  m.warps.frames = {Image(grid_n, grid_n, 2)};
  m.warps.constrained = {1};
  m.visibility.grid = m.grid;
  m.visibility.frames = {Image(grid_n, grid_n, 1, 1.f)};
  return m;
}

Image test_texture(int n) {
  SceneSpec spec;
  spec.width = spec.height = n;
  spec.frames = 2;
  spec.n_flow_tracks = 0;
  spec.n_semantic_tracks = 0;
  return generate_synthetic_scene(spec).texture;
}

} // namespace

TEST(Correspondences, IdenticalShotsPairIdenticalCoordinates) {
  Image tex = test_texture(64);
  Affine2 id;
  ShotModel a = synthetic_shot(tex, id, 64, 50);
  ShotModel b = synthetic_shot(tex, id, 64, 50);
  SolverConfig cfg;
  CorrespondenceSet cs = mosaic_correspondences({&a, &b}, cfg);
  EXPECT_EQ(cs.links.size(), 50u);
  for (const auto& link : cs.links) {
    const auto& pa = cs.points[0][link.idx_a];
    const auto& pb = cs.points[1][link.idx_b];
    EXPECT_DOUBLE_EQ(pa.y.x, pb.y.x);
    EXPECT_DOUBLE_EQ(pa.y.y, pb.y.y);
    EXPECT_EQ(pa.semantic_key, pb.semantic_key);
  }
}

TEST(Correspondences, DisjointKeySetsError) {
  Image tex = test_texture(48);
  Affine2 id;
  ShotModel a = synthetic_shot(tex, id, 48, 20);
  ShotModel b = synthetic_shot(tex, id, 48, 20);
  for (auto& e : b.embedding.entries) e.semantic_key = *e.semantic_key + 1000;
  SolverConfig cfg;
  EXPECT_THROW(mosaic_correspondences({&a, &b}, cfg), validation_error);
}

TEST(Universal, IdenticalMosaicsKeepCorrespondencesCoincident) {
  Image tex = test_texture(48);
  Affine2 id;
  ShotModel a = synthetic_shot(tex, id, 48, 25);
  ShotModel b = synthetic_shot(tex, id, 48, 25);
  SolverConfig cfg;
  cfg.universal_epochs = 100;
  CorrespondenceSet cs = mosaic_correspondences({&a, &b}, cfg);
  UniversalEmbedding uni = embed_universal(cs, cfg, 4.0 * 48 * 48);
  EXPECT_LE(uni.correspondence, 1e-6 * cs.links.size());
}

TEST(Universal, SingleShotPreservesOwnGeometry) {
  Image tex = test_texture(48);
  Affine2 id;
  ShotModel a = synthetic_shot(tex, id, 48, 16);
  SolverConfig cfg;
  CorrespondenceSet cs;
  cs.points.resize(1);
  for (const auto& e : a.embedding.entries)
    cs.points[0].push_back({unit_to_texel(e.u, a.grid), *e.semantic_key});
  UniversalEmbedding uni = embed_universal(cs, cfg, 4.0 * 48 * 48);
  EXPECT_LE(uni.stress, 1e-6);

  // Geometry reproduced up to translation + the normalization scaling.
  const auto& pts = cs.points[0];
  for (std::size_t i = 1; i < pts.size(); ++i) {
    Vec2 expect = pts[i].y - pts[0].y;
    Vec2 got = uni.u[0][i] - uni.u[0][0];
    // undo the joint normalization scale
    Vec2 lo = pts[0].y, hi = pts[0].y;
    for (const auto& p : pts) {
      lo.x = std::min(lo.x, p.y.x);
      lo.y = std::min(lo.y, p.y.y);
      hi.x = std::max(hi.x, p.y.x);
      hi.y = std::max(hi.y, p.y.y);
    }
    double sx = (1.0 - 0.04) / (hi.x - lo.x);
    double sy = (1.0 - 0.04) / (hi.y - lo.y);
    EXPECT_NEAR(got.x, expect.x * sx, 1e-6);
    EXPECT_NEAR(got.y, expect.y * sy, 1e-6);
  }
}

TEST(Multishot, KnownAffineWarpAndTransfer) {
  Image tex = test_texture(64);
  Affine2 A_map;  // identity
  Affine2 B_map;  // translation + slight rotation/scale
  B_map.m[0] = 0.995 * std::cos(0.005);
  B_map.m[1] = -0.995 * std::sin(0.005);
  B_map.m[3] = 0.995 * std::sin(0.005);
  B_map.m[4] = 0.995 * std::cos(0.005);
  B_map.m[2] = -0.06;
  B_map.m[5] = 0.04;

  const int G = 64;
  ShotModel a = synthetic_shot(tex, A_map, G, 50);
  ShotModel b = synthetic_shot(tex, B_map, G, 50);

  SolverConfig cfg;
  cfg.universal_epochs = 400;
  cfg.map_max_iters = 4000;
  CorrespondenceSet cs = mosaic_correspondences({&a, &b}, cfg);
  ASSERT_EQ(cs.links.size(), 50u);
  UniversalEmbedding uni = embed_universal(cs, cfg, 4.0 * G * G);

  // Corresponding key points land within one texel of each other.
  for (const auto& link : cs.links) {
    Vec2 ua = unit_to_texel(Vec2{uni.u[0][link.idx_a].x, uni.u[0][link.idx_a].y}, {G, G});
    Vec2 ub = unit_to_texel(Vec2{uni.u[1][link.idx_b].x, uni.u[1][link.idx_b].y}, {G, G});
    EXPECT_LE((ua - ub).norm(), 1.0);
  }

  MosaicWarp warp = build_mosaic_warp(cs, uni, a, b, cfg);

  // Against the exact affine ground truth: u_B = B_map(A_map^-1(u_A)).
  int checked = 0;
  double max_err = 0.0;
  for (int j = 4; j < G - 4; ++j)
    for (int i = 4; i < G - 4; ++i) {
      if (warp.fwd_valid.at(i, j) <= 0.5f) continue;
      Vec2 uA = grid_to_unit(i, j, a.grid);
      Vec2 uB_true = B_map(uA);  // A_map is identity
      Vec2 tB_true = unit_to_texel(uB_true, b.grid);
      if (tB_true.x < 2 || tB_true.x > G - 3 || tB_true.y < 2 || tB_true.y > G - 3) continue;
      Vec2 got{warp.fwd.at(i, j, 0), warp.fwd.at(i, j, 1)};
      max_err = std::max(max_err, (got - tB_true).norm());
      ++checked;
    }
  ASSERT_GT(checked, 1000);
  EXPECT_LE(max_err, 2.0);

  // Round trip A -> B -> A within 2 texels on the whole valid region.
  for (int j = 0; j < G; ++j)
    for (int i = 0; i < G; ++i) {
      if (warp.fwd_valid.at(i, j) <= 0.5f) continue;
      double bx = warp.fwd.at(i, j, 0), by = warp.fwd.at(i, j, 1);
      ASSERT_TRUE(in_frame(G, G, bx, by));
      double ax = warp.rev.sample(bx, by, 0), ay = warp.rev.sample(bx, by, 1);
      EXPECT_LE(std::hypot(ax - i, ay - j), 2.0) << "texel (" << i << "," << j << ")";
    }

  // A single-texel edit at a central key site lands within 2 texels of the
  // matching site in B.
  const auto& key_pt = cs.points[0][cs.links[27].idx_a];
  int ei = static_cast<int>(std::lround(key_pt.y.x));
  int ej = static_cast<int>(std::lround(key_pt.y.y));
  Image edited = a.mosaic.color;
  for (int c = 0; c < 3; ++c) edited.at(ei, ej, c) += 0.5f;
  EditDiff diff = diff_mosaic(a.mosaic, edited);
  TransferResult tr = transfer_edit(diff.delta, diff.alpha, warp);

  double cx = 0, cy = 0, mass = 0;
  for (int j = 0; j < G; ++j)
    for (int i = 0; i < G; ++i) {
      double w = tr.alpha.at(i, j);
      cx += w * i;
      cy += w * j;
      mass += w;
    }
  ASSERT_GT(mass, 0.0);
  const auto& key_pt_b = cs.points[1][cs.links[27].idx_b];
  EXPECT_LE(std::hypot(cx / mass - key_pt_b.y.x, cy / mass - key_pt_b.y.y), 2.0);
  EXPECT_LE(tr.support_lost, 0.01);
}

TEST(Transfer, ZeroDiffAndFullyInvalidRegion) {
  Image tex = test_texture(48);
  Affine2 id;
  ShotModel a = synthetic_shot(tex, id, 48, 16);
  ShotModel b = synthetic_shot(tex, id, 48, 16);
  SolverConfig cfg;
  cfg.universal_epochs = 50;
  CorrespondenceSet cs = mosaic_correspondences({&a, &b}, cfg);
  UniversalEmbedding uni = embed_universal(cs, cfg, 4.0 * 48 * 48);
  MosaicWarp warp = build_mosaic_warp(cs, uni, a, b, cfg);

  EditDiff zero = diff_mosaic(a.mosaic, a.mosaic.color);
  TransferResult tz = transfer_edit(zero.delta, zero.alpha, warp);
  for (float v : tz.alpha.data) EXPECT_FLOAT_EQ(v, 0.f);
  EXPECT_EQ(tz.support_lost, 0.0);

  // An edit placed where the forward warp is invalid reports full loss.
  warp.fwd_valid.fill(0.f);
  warp.rev_valid.fill(0.f);
  Image edited = a.mosaic.color;
  edited.at(24, 24, 0) += 0.5f;
  EditDiff d = diff_mosaic(a.mosaic, edited);
  TransferResult tr = transfer_edit(d.delta, d.alpha, warp);
  EXPECT_EQ(tr.support_lost, 1.0);
  for (float v : tr.alpha.data) EXPECT_FLOAT_EQ(v, 0.f);
}

TEST(Multishot, ShotOrderInvariance) {
  Image tex = test_texture(48);
  Affine2 A_map, B_map;
  B_map.m[2] = -0.04;
  B_map.m[5] = 0.03;
  ShotModel a = synthetic_shot(tex, A_map, 48, 25);
  ShotModel b = synthetic_shot(tex, B_map, 48, 25);
  SolverConfig cfg;
  cfg.universal_epochs = 150;
  cfg.map_max_iters = 3000;

  CorrespondenceSet cs_ab = mosaic_correspondences({&a, &b}, cfg);
  CorrespondenceSet cs_ba = mosaic_correspondences({&b, &a}, cfg);
  UniversalEmbedding uni_ab = embed_universal(cs_ab, cfg, 4.0 * 48 * 48);
  UniversalEmbedding uni_ba = embed_universal(cs_ba, cfg, 4.0 * 48 * 48);
  MosaicWarp w_ab = build_mosaic_warp(cs_ab, uni_ab, a, b, cfg);
  MosaicWarp w_ba = build_mosaic_warp(cs_ba, uni_ba, b, a, cfg);

  // The A->B warp must agree regardless of input order (w_ab.fwd vs w_ba.rev).
  double max_d = 0.0;
  for (int j = 0; j < 48; ++j)
    for (int i = 0; i < 48; ++i) {
      bool va = w_ab.fwd_valid.at(i, j) > 0.5f;
      bool vb = w_ba.rev_valid.at(i, j) > 0.5f;
      ASSERT_EQ(va, vb) << "validity differs at (" << i << "," << j << ")";
      if (!va) continue;
      max_d = std::max(max_d,
                       std::hypot(static_cast<double>(w_ab.fwd.at(i, j, 0)) - w_ba.rev.at(i, j, 0),
                                  static_cast<double>(w_ab.fwd.at(i, j, 1)) - w_ba.rev.at(i, j, 1)));
    }
  EXPECT_LE(max_d, 1e-3);
}
