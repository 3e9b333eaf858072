#include <doctest.h>

#include <cmath>

#include "support/oracles.hpp"
#include "wavefuse/error.hpp"
#include "wavefuse/fusion.hpp"

using namespace wavefuse;

namespace {

// Identity extrinsics, f = 10, principal point at the origin: u = 10 x / z.
CalibrationSet simple_calib() {
  CalibrationSet c;
  c.p2 = {{{10, 0, 0, 0}, {0, 10, 0, 0}, {0, 0, 1, 0}}};
  c.r0_rect = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  c.tr_velo_to_cam = {{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}}};
  return c;
}

FusionConfig small_config() { return {3, 4, 5, 6, 2}; }

FusionCellBatch random_batch(std::size_t m, CounterRng& rng) {
  FusionCellBatch b{oracle::random_tensor({m, 3}, rng), oracle::random_tensor({m, 4}, rng), {}};
  for (std::size_t i = 0; i < m; ++i) b.centers.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
  return b;
}

}  // namespace

TEST_CASE("gather at a node, behind the camera, and between nodes") {
  CounterRng rng(1);
  const Tensor f = oracle::random_tensor({6, 8, 3}, rng);
  const auto calib = simple_calib();
  // Node (2, 3) sits at pixel (13.5, 9.5).
  const std::vector<CellCenter> centers = {{1.35, 0.95, 1.0}, {1.35, 0.95, -1.0}, {1.55, 0.95, 1.0}, {99, 0, 1}};
  const Tensor g = gather_image_features(f, centers, calib);
  REQUIRE(g.dims() == std::vector<std::size_t>{4, 3});
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(std::abs(g.at(0, k) - f.at(2, 3, k)) < 1e-12);
    CHECK(g.at(1, k) == 0.0);
    CHECK(std::abs(g.at(2, k) - (f.at(2, 3, k) + f.at(2, 4, k)) / 2) < 1e-12);
    CHECK(g.at(3, k) == 0.0);
  }
  CHECK(gather_image_features(f, {}, calib).dims() == std::vector<std::size_t>{0, 3});
}

TEST_CASE("zero attention projections give uniform weights") {
  auto params = FusionParams::random(small_config(), 2);
  params.wq = LinearMap::zeros(5, 5);
  CounterRng rng(3);
  const auto batch = random_batch(7, rng);
  const auto trace = adaptive_fuse_traced(batch, params);
  for (double w : trace.weights.data()) CHECK(w == 0.5);

  const Tensor tl = params.lidar_proj.apply(batch.lidar_feats), tc = params.camera_proj.apply(batch.cam_feats);
  const Tensor vl = params.wv.apply(tl), vc = params.wv.apply(tc);
  Tensor tokens({7, 10});
  for (std::size_t m = 0; m < 7; ++m)
    for (std::size_t j = 0; j < 5; ++j) {
      const double mean = 0.5 * vl.at(m, j) + 0.5 * vc.at(m, j);
      tokens.at(m, j) = tl.at(m, j) + mean;
      tokens.at(m, 5 + j) = tc.at(m, j) + mean;
    }
  CHECK(max_abs_diff(trace.tokens, tokens) < 1e-12);
  CHECK(max_abs_diff(trace.output, params.mlp_out.apply(relu(params.mlp_in.apply(tokens)))) < 1e-12);
}

TEST_CASE("identical modality tokens update identically") {
  FusionConfig c{3, 3, 5, 6, 2};
  auto params = FusionParams::random(c, 4);
  params.camera_proj = params.lidar_proj;
  CounterRng rng(5);
  FusionCellBatch b{oracle::random_tensor({4, 3}, rng), {}, {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}}};
  b.cam_feats = b.lidar_feats;
  const auto trace = adaptive_fuse_traced(b, params);
  for (std::size_t m = 0; m < 4; ++m)
    for (std::size_t j = 0; j < 5; ++j) CHECK(trace.tokens.at(m, j) == trace.tokens.at(m, 5 + j));
}

TEST_CASE("two-token hand trace") {
  FusionConfig c{1, 1, 2, 2, 1};
  auto p = FusionParams::random(c, 6);
  p.lidar_proj = {Tensor::matrix({{1}, {0}}), Tensor::vector({0, 0})};   // lidar -> (a, 0)
  p.camera_proj = {Tensor::matrix({{0}, {1}}), Tensor::vector({0, 0})};  // camera -> (0, b)
  p.wq = {Tensor::identity(2), Tensor::vector({0, 0})};
  p.wk = {Tensor::identity(2), Tensor::vector({0, 0})};
  p.wv = {Tensor::matrix({{2, 0}, {0, 3}}), Tensor::vector({0, 0})};
  p.mlp_in = {Tensor::matrix({{1, 0, 0, 0}, {0, 0, 0, 1}}), Tensor::vector({0, 0})};
  p.mlp_out = {Tensor::matrix({{1, 1}}), Tensor::vector({0.5})};
  const double a = 1.0, b = 2.0;
  FusionCellBatch batch{Tensor::matrix({{a}}), Tensor::matrix({{b}}), {{0, 0, 0}}};
  const auto trace = adaptive_fuse_traced(batch, p);

  const double s = 1 / std::sqrt(2.0);
  // Token l = (1, 0), token c = (0, 2). Logits: l.l = 1, l.c = 0, c.l = 0, c.c = 4.
  const double wl0 = std::exp(1 * s) / (std::exp(1 * s) + 1), wl1 = 1 - wl0;
  const double wc0 = 1 / (1 + std::exp(4 * s)), wc1 = 1 - wc0;
  CHECK(trace.weights.at(0, 0) == doctest::Approx(wl0).epsilon(1e-12));
  CHECK(trace.weights.at(0, 3) == doctest::Approx(wc1).epsilon(1e-12));
  // v_l = (2, 0), v_c = (0, 6).
  const double ul0 = 1 + wl0 * 2, ul1 = wl1 * 6;
  const double uc0 = wc0 * 2, uc1 = 2 + wc1 * 6;
  CHECK(trace.tokens.at(0, 0) == doctest::Approx(ul0).epsilon(1e-12));
  CHECK(trace.tokens.at(0, 1) == doctest::Approx(ul1).epsilon(1e-12));
  CHECK(trace.tokens.at(0, 2) == doctest::Approx(uc0).epsilon(1e-12));
  CHECK(trace.tokens.at(0, 3) == doctest::Approx(uc1).epsilon(1e-12));
  // mlp_in picks (ul0, uc1); both positive so relu passes; mlp_out sums + 0.5.
  CHECK(trace.output.at(0, 0) == doctest::Approx(ul0 + uc1 + 0.5).epsilon(1e-12));
}

TEST_CASE("cells are independent and rows are stochastic") {
  const auto params = FusionParams::random(small_config(), 7);
  CounterRng rng(8);
  const auto batch = random_batch(9, rng);
  const auto trace = adaptive_fuse_traced(batch, params);
  for (std::size_t m = 0; m < 9; ++m) {
    CHECK(std::abs(trace.weights.at(m, 0) + trace.weights.at(m, 1) - 1) < 1e-9);
    CHECK(std::abs(trace.weights.at(m, 2) + trace.weights.at(m, 3) - 1) < 1e-9);
  }
  std::vector<std::size_t> perm(9);
  for (std::size_t i = 0; i < 9; ++i) perm[i] = (i * 4 + 3) % 9;
  FusionCellBatch shuffled{Tensor({9, 3}), Tensor({9, 4}), batch.centers};
  for (std::size_t i = 0; i < 9; ++i) {
    for (std::size_t k = 0; k < 3; ++k) shuffled.lidar_feats.at(i, k) = batch.lidar_feats.at(perm[i], k);
    for (std::size_t k = 0; k < 4; ++k) shuffled.cam_feats.at(i, k) = batch.cam_feats.at(perm[i], k);
  }
  const Tensor out = adaptive_fuse(shuffled, params);
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t k = 0; k < 2; ++k) CHECK(out.at(i, k) == trace.output.at(perm[i], k));
  CHECK(adaptive_fuse(batch, params) == trace.output);
}

TEST_CASE("fusion shape errors") {
  const auto params = FusionParams::random(small_config(), 9);
  CounterRng rng(10);
  auto batch = random_batch(3, rng);
  batch.cam_feats = Tensor({2, 4});
  CHECK_THROWS_AS(adaptive_fuse(batch, params), ShapeError);
  batch = random_batch(3, rng);
  batch.lidar_feats = Tensor({3, 5});
  CHECK_THROWS_AS(adaptive_fuse(batch, params), ShapeError);
}
