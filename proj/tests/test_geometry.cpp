#include <doctest.h>

#include <cmath>
#include <numbers>

#include "support/oracles.hpp"
#include "wavefuse/error.hpp"
#include "wavefuse/geometry.hpp"
#include "wavefuse/rng.hpp"

using namespace wavefuse;

namespace {

CalibrationSet pinhole(double f, double cx, double cy) {
  CalibrationSet c;
  c.p2 = {{{f, 0, cx, 0}, {0, f, cy, 0}, {0, 0, 1, 0}}};
  c.r0_rect = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  c.tr_velo_to_cam = {{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}}};
  return c;
}

Box3D random_box(CounterRng& rng, double spread) {
  return {rng.uniform(-spread, spread), rng.uniform(-spread, spread), rng.uniform(-0.5, 0.5),
          rng.uniform(0.5, 5.0),        rng.uniform(0.5, 3.0),        rng.uniform(0.5, 2.0),
          normalize_yaw(rng.uniform(-4, 4))};
}

}  // namespace

TEST_CASE("normalize_yaw maps into (-pi, pi]") {
  CHECK(normalize_yaw(std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(normalize_yaw(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(normalize_yaw(3 * std::numbers::pi / 2) == doctest::Approx(-std::numbers::pi / 2));
  CHECK(normalize_yaw(0.25) == 0.25);
}

TEST_CASE("projection examples") {
  const auto calib = pinhole(500, 320.4, 180.6);
  RawPointCloud cloud;
  cloud.points.push_back({0, 0, 12.5, 0.3});
  auto map = project_points(cloud, calib, 360, 640);
  CHECK(map.valid(181, 320));
  CHECK(map.depth(181, 320) == 12.5);

  cloud.points = {{0, 0, -3, 0.1}, {0, 0, 0, 0.1}};
  map = project_points(cloud, calib, 360, 640);
  CHECK(sum_squares(map.values) == 0.0);

  cloud.points = {{0, 0, 5, 0}, {0, 0, 3, 0}};
  map = project_points(cloud, calib, 360, 640);
  CHECK(map.depth(181, 320) == 3.0);
}

TEST_CASE("projection rounding sends exact halves to the smaller index") {
  CHECK(round_half_down(2.5) == 2);
  CHECK(round_half_down(2.5000001) == 3);
  CHECK(round_half_down(-0.5) == -1);
  CHECK(round_half_down(3.49) == 3);
  const auto calib = pinhole(100, 10.5, 4.5);
  RawPointCloud cloud;
  cloud.points.push_back({0, 0, 2, 0});
  const auto map = project_points(cloud, calib, 10, 20);
  CHECK(map.valid(4, 10));
}

TEST_CASE("projection errors") {
  auto calib = pinhole(100, 10, 10);
  calib.p2[0][0] = std::nan("");
  CHECK_THROWS_AS(project_points({}, calib, 10, 10), InputError);
  CHECK_THROWS_AS(project_points({}, pinhole(100, 10, 10), 0, 10), InputError);
}

TEST_CASE("projection matches a brute-force re-scan") {
  CounterRng rng(21);
  CalibrationSet calib = pinhole(60, 31.5, 15.5);
  // A rotated extrinsic so all three matrices matter.
  calib.tr_velo_to_cam = {{{0, -1, 0, 0.1}, {0, 0, -1, -0.2}, {1, 0, 0, 0.3}}};
  for (int trial = 0; trial < 5; ++trial) {
    RawPointCloud cloud;
    for (int i = 0; i < 600; ++i) {
      // Coarse coordinates produce plenty of pixel collisions.
      cloud.points.push_back({std::round(rng.uniform(-2, 30) * 4) / 4, std::round(rng.uniform(-20, 20) * 4) / 4,
                              std::round(rng.uniform(-3, 3) * 4) / 4, 0.0});
    }
    const auto map = project_points(cloud, calib, 32, 64);
    CHECK(map.values == oracle::brute_depth_raster(cloud, calib, 32, 64));
    for (std::size_t r = 0; r < 32; ++r)
      for (std::size_t c = 0; c < 64; ++c)
        if (!map.valid(r, c)) REQUIRE(map.depth(r, c) == 0.0);
  }
}

TEST_CASE("bev iou examples") {
  const Box3D a{0, 0, 0, 1, 1, 1, 0};
  CHECK(rotated_bev_iou(a, a) == doctest::Approx(1.0));
  CHECK(rotated_bev_iou(a, Box3D{5, 5, 0, 1, 1, 1, 0}) == 0.0);
  CHECK(rotated_bev_iou(a, Box3D{0.5, 0, 0, 1, 1, 1, 0}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(std::abs(oracle::raster_bev_iou(a, Box3D{0.5, 0, 0, 1, 1, 1, 0}) - 1.0 / 3.0) < 1e-3);
  // Square rotated by 45 degrees inside a larger square.
  const Box3D big{0, 0, 0, 4, 4, 1, 0}, diamond{0, 0, 0, 2, 2, 1, std::numbers::pi / 4};
  CHECK(rotated_bev_iou(big, diamond) == doctest::Approx(4.0 / 16.0));
}

TEST_CASE("bev iou agrees with the raster oracle") {
  CounterRng rng(1234);
  for (int trial = 0; trial < 60; ++trial) {
    const Box3D a = random_box(rng, 1.5), b = random_box(rng, 1.5);
    REQUIRE(std::abs(rotated_bev_iou(a, b) - oracle::raster_bev_iou(a, b, 600)) < 4e-3);
  }
}

TEST_CASE("iou symmetry and yaw invariance") {
  CounterRng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const Box3D a = random_box(rng, 2), b = random_box(rng, 2);
    REQUIRE(rotated_bev_iou(a, b) == rotated_bev_iou(b, a));
    REQUIRE(iou3d(a, b) == iou3d(b, a));
    const double th = rng.uniform(-3, 3);
    auto rotate = [&](Box3D box) {
      const double x = box.x, y = box.y;
      box.x = std::cos(th) * x - std::sin(th) * y;
      box.y = std::sin(th) * x + std::cos(th) * y;
      box.yaw = normalize_yaw(box.yaw + th);
      return box;
    };
    REQUIRE(std::abs(rotated_bev_iou(rotate(a), rotate(b)) - rotated_bev_iou(a, b)) < 1e-9);
  }
}

TEST_CASE("iou3d examples") {
  const Box3D a{0, 0, 0, 2, 1, 2, 0.3};
  CHECK(iou3d(a, a) == doctest::Approx(1.0));
  Box3D up = a;
  up.z = 3;
  CHECK(iou3d(a, up) == 0.0);
  up.z = 1;  // half the height overlaps
  CHECK(iou3d(a, up) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(std::abs(oracle::monte_carlo_iou3d(a, up, 100000, 3) - 1.0 / 3.0) < 1e-2);
}

TEST_CASE("iou3d agrees with Monte-Carlo sampling") {
  CounterRng rng(4321);
  for (int trial = 0; trial < 20; ++trial) {
    const Box3D a = random_box(rng, 1), b = random_box(rng, 1);
    REQUIRE(std::abs(iou3d(a, b) - oracle::monte_carlo_iou3d(a, b, 100000, trial)) < 1e-2);
  }
}

TEST_CASE("degenerate footprints give zero iou") {
  const Box3D flat{0, 0, 0, 0, 1, 1, 0};
  CHECK(rotated_bev_iou(flat, flat) == 0.0);
  CHECK(iou3d(flat, Box3D{}) == 0.0);
}

TEST_CASE("polygon helpers") {
  const std::vector<Vec2> sq{{0, 0}, {2, 0}, {2, 2}, {0, 2}};
  const std::vector<Vec2> shifted{{1, 1}, {3, 1}, {3, 3}, {1, 3}};
  CHECK(polygon_area(sq) == doctest::Approx(4.0));
  CHECK(convex_intersection_area(sq, shifted) == doctest::Approx(1.0));
  const auto c = bev_corners(Box3D{1, 2, 0, 4, 2, 1, 0});
  CHECK(polygon_area({c.begin(), c.end()}) == doctest::Approx(8.0));  // counter-clockwise => positive
}

TEST_CASE("label_to_box permutes the camera frame") {
  LabelRecord l;
  l.type = "Car";
  l.dimensions = {1.5, 1.6, 3.9};
  l.location = {2.0, 1.7, 20.0};
  l.rotation_y = 0.0;
  const Box3D b = label_to_box(l);
  CHECK(b.x == 20.0);
  CHECK(b.y == -2.0);
  CHECK(b.z == doctest::Approx(-1.7 + 0.75));
  CHECK(b.l == 3.9);
  CHECK(b.w == 1.6);
  CHECK(b.h == 1.5);
  // ry = 0 points the car along camera +x, i.e. towards -y here.
  CHECK(b.yaw == doctest::Approx(-std::numbers::pi / 2));
}
