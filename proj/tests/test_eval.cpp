#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "support/oracles.hpp"
#include "wavefuse/error.hpp"
#include "wavefuse/eval.hpp"

using namespace wavefuse;

namespace {

Detection det(double x, double score, double l = 1.0) { return {{x, 0, 0, l, 1, 1, 0}, score}; }

PrCurve curve_of(const std::vector<bool>& tp, std::size_t gt) {
  std::vector<ScoredMatch> m;
  for (std::size_t i = 0; i < tp.size(); ++i) m.push_back({1.0 - 0.1 * static_cast<double>(i), tp[i]});
  return curve_from_matches(m, gt);
}

const std::vector<double> kKittiCor = {85.29, 86.48, 85.53, 85.50, 85.71, 83.17, 84.12, 76.56, 85.05, 85.26,
                                       82.16, 83.30, 83.51, 49.30, 84.17, 83.21, 77.22, 79.02, 84.69, 85.26};
const std::vector<double> kNuscCor = {67.12, 67.58, 67.01, 67.24, 69.48, 69.18, 68.68, 39.48, 57.77, 64.57, 65.64,
                                      66.73, 65.77, 64.82, 41.88, 67.21, 66.74, 66.82, 65.08, 66.71, 66.53};

}  // namespace

TEST_CASE("nms examples") {
  const std::vector<Detection> same = {det(0, 0.9), det(0, 0.8)};
  CHECK(nms(same, 0.7) == std::vector<std::size_t>{0});
  const std::vector<Detection> apart = {det(0, 0.5), det(5, 0.9), det(10, 0.7)};
  CHECK(nms(apart, 0.7) == std::vector<std::size_t>{1, 2, 0});
  // IoU(a, b) = IoU(b, c) = 0.7 / 1.3, IoU(a, c) = 0.4 / 1.6.
  const std::vector<Detection> chain = {det(0, 0.9), det(0.3, 0.8), det(0.6, 0.7)};
  CHECK(nms(chain, 0.5) == std::vector<std::size_t>{0, 2});
  CHECK_THROWS_AS(nms(chain, 1.5), InputError);
  CHECK(nms({}, 0.7).empty());
}

TEST_CASE("nms is independent of input order up to ties") {
  CounterRng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Detection> dets;
    for (int i = 0; i < 12; ++i) dets.push_back({{rng.uniform(0, 6), rng.uniform(0, 3), 0, 3.9, 1.6, 1.5, rng.uniform(-3, 3)}, rng.uniform()});
    std::vector<std::size_t> perm(dets.size());
    std::iota(perm.begin(), perm.end(), 0);
    shuffle(std::span<std::size_t>(perm), rng);
    std::vector<Detection> permuted;
    for (std::size_t p : perm) permuted.push_back(dets[p]);
    std::vector<double> a, b;
    for (std::size_t k : nms(dets, 0.3)) a.push_back(dets[k].score);
    for (std::size_t k : nms(permuted, 0.3)) b.push_back(permuted[k].score);
    REQUIRE(a == b);
  }
}

TEST_CASE("matching examples") {
  const Box3D gt{0, 0, 0, 1, 1, 1, 0};
  const std::vector<Detection> one = {{gt, 0.9}};
  const auto c = match_detections(one, std::vector<Box3D>{gt}, 0.7, IouKind::box3d);
  REQUIRE(c.points.size() == 1);
  CHECK(c.points[0].recall == 1.0);
  CHECK(c.points[0].precision == 1.0);
  CHECK(ap_r40(c) == doctest::Approx(100.0));

  const auto empty = match_detections({}, std::vector<Box3D>{gt, gt, gt}, 0.7, IouKind::bev);
  CHECK(empty.points.empty());
  CHECK(ap_r40(empty) == 0.0);

  const std::vector<Detection> two = {{gt, 0.8}, {gt, 0.9}};
  const auto c2 = match_detections(two, std::vector<Box3D>{gt}, 0.7, IouKind::box3d);
  REQUIRE(c2.points.size() == 2);
  CHECK(c2.points[0].precision == 1.0);
  CHECK(c2.points[1].recall == 1.0);
  CHECK(c2.points[1].precision == 0.5);
  CHECK_THROWS_AS(ap_r40(PrCurve{}), InputError);
}

TEST_CASE("matching prefers the highest-IoU unclaimed GT and respects the IoU kind") {
  const std::vector<Box3D> gts = {{0, 0, 0, 4, 2, 1.5, 0}, {0.4, 0, 0, 4, 2, 1.5, 0}};
  const std::vector<Detection> dets = {{{0.35, 0, 0, 4, 2, 1.5, 0}, 0.9}, {{0.05, 0, 0, 4, 2, 1.5, 0}, 0.8}};
  const auto m = match_frame(dets, gts, 0.7, IouKind::bev);
  CHECK(m[0].true_positive);
  CHECK(m[1].true_positive);
  // Same footprint, half the height overlapping: BEV match, 3D miss.
  const std::vector<Detection> lifted = {{{0, 0, 0.75, 4, 2, 1.5, 0}, 0.9}};
  CHECK(match_frame(lifted, std::vector<Box3D>{gts[0]}, 0.7, IouKind::bev)[0].true_positive);
  CHECK_FALSE(match_frame(lifted, std::vector<Box3D>{gts[0]}, 0.7, IouKind::box3d)[0].true_positive);
}

TEST_CASE("ap_r40 matches brute force on every TP/FP pattern") {
  for (std::size_t k = 0; k <= 6; ++k)
    for (unsigned bits = 0; bits < (1u << k); ++bits) {
      std::vector<bool> tp(k);
      std::size_t hits = 0;
      for (std::size_t i = 0; i < k; ++i) hits += (tp[i] = (bits >> i) & 1u);
      for (std::size_t gt = std::max<std::size_t>(hits, 1); gt <= k + 2; ++gt) {
        REQUIRE(std::abs(ap_r40(curve_of(tp, gt)) - oracle::brute_ap_r40(tp, gt)) < 1e-9);
      }
    }
}

TEST_CASE("ap_r40 monotonicity") {
  CounterRng rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 1 + rng.index(10);
    std::vector<bool> tp(k);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < k; ++i) hits += (tp[i] = rng.uniform() < 0.5);
    const std::size_t gt = hits + 1 + rng.index(3);
    const double base = ap_r40(curve_of(tp, gt));
    // Flipping an FP into a TP never hurts.
    const std::size_t flip = rng.index(k);
    if (!tp[flip]) {
      auto better = tp;
      better[flip] = true;
      REQUIRE(ap_r40(curve_of(better, gt)) >= base - 1e-12);
    }
    // A trailing FP changes nothing at anchors already reached.
    auto worse = tp;
    worse.push_back(false);
    REQUIRE(std::abs(ap_r40(curve_of(worse, gt)) - base) < 1e-12);
  }
}

TEST_CASE("rce reproduces the published tables") {
  CHECK(std::abs(rce(88.04, kKittiCor) - 7.17) < 0.02);
  CHECK(std::abs(rce(88.04, std::vector<double>{81.72}) - 7.17) < 0.02);
  CHECK(std::abs(rce(69.91, kNuscCor) - 8.58) < 0.03);
  CHECK(std::abs(rce(69.91, std::vector<double>{63.90}) - 8.58) < 0.03);
  // Weather-only subset in fractional units.
  CHECK(std::abs(rce(69.91, std::vector<double>{67.24}, RceUnit::fraction) - 0.04) < 0.005);
  CHECK(rce(50, std::vector<double>{50, 50}) == 0.0);
  CHECK_THROWS_AS(rce(0.0, std::vector<double>{1.0}), InputError);
  CHECK_THROWS_AS(rce(-1.0, std::vector<double>{1.0}), InputError);
}

TEST_CASE("rce is scale invariant") {
  CounterRng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const double clean = rng.uniform(10, 100), c = rng.uniform(0.1, 10);
    std::vector<double> cor(5), scaled(5);
    for (std::size_t i = 0; i < 5; ++i) scaled[i] = c * (cor[i] = rng.uniform(0, 100));
    REQUIRE(std::abs(rce(clean, cor) - rce(c * clean, scaled)) < 1e-9);
  }
}

TEST_CASE("dataset pixel statistics") {
  const std::vector<Tensor> zeros = {Tensor({2, 2, 3}), Tensor({3, 1, 3})};
  const auto z = dataset_pixel_stats(zeros);
  CHECK(z.image_means == std::vector<double>{0, 0});
  CHECK(z.mean == 0.0);
  CHECK(z.stddev == 0.0);
  CHECK(dataset_pixel_stats(std::vector<Tensor>{Tensor({4, 4, 3}, 128.0)}).image_means[0] == 128.0);
  const auto two = dataset_pixel_stats(std::vector<Tensor>{Tensor({2, 2, 3}, 100.0), Tensor({5, 3, 3}, 200.0)});
  CHECK(two.mean == doctest::Approx(150.0));
  CHECK(two.stddev == doctest::Approx(50.0));
  CHECK_THROWS_AS(dataset_pixel_stats({}), InputError);
}

TEST_CASE("difficulty buckets") {
  LabelRecord l;
  l.type = "Car";
  l.bbox = {0, 0, 50, 30};
  l.occlusion = 1;
  l.truncation = 0.2;
  CHECK_FALSE(passes_difficulty(l, Difficulty::easy));
  CHECK(passes_difficulty(l, Difficulty::moderate));
  l.bbox[3] = 20;
  CHECK_FALSE(passes_difficulty(l, Difficulty::moderate));
  CHECK(parse_difficulty("hard") == Difficulty::hard);
  CHECK_THROWS(parse_difficulty("medium"));
  l.type = "DontCare";
  l.bbox[3] = 100;
  CHECK_FALSE(passes_difficulty(l, Difficulty::hard));
}

TEST_CASE("benchmark report assembly and serialisation") {
  const std::vector<CellResult> cells = {{CorruptionKind::fog, 1, 80},
                                         {CorruptionKind::fog, 2, 70},
                                         {CorruptionKind::density, 1, 60},
                                         {CorruptionKind::density, 2, 50}};
  const auto r = BenchmarkReport::assemble(100, cells);
  REQUIRE(r.per_kind.size() == 2);
  CHECK(r.per_kind[0].kind == CorruptionKind::fog);
  CHECK(r.per_kind[0].mean_ap == 75.0);
  CHECK(r.average_ap_cor == 65.0);
  REQUIRE(r.rce.has_value());
  CHECK(*r.rce == doctest::Approx(35.0));
  CHECK(r.rce_consistent(1e-9));

  const std::string csv = report_to_csv(r);
  CHECK(csv.rfind("kind,severity,ap\n", 0) == 0);
  CHECK(csv.find("fog,2,70.000000\n") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);

  const auto back = report_from_json(report_to_json(r));
  CHECK(back.ap_clean == r.ap_clean);
  CHECK(back.cells.size() == 4);
  CHECK(back.cells[3].kind == CorruptionKind::density);
  CHECK(back.rce == r.rce);
  CHECK(report_to_json(back) == report_to_json(r));
  CHECK_THROWS_AS(report_from_json("{not json"), FormatError);

  const auto zero = BenchmarkReport::assemble(0, cells);
  CHECK_FALSE(zero.rce.has_value());
  CHECK(zero.rce_consistent(1e-9));
  CHECK(report_from_json(report_to_json(zero)).rce == std::nullopt);

  auto tampered = r;
  tampered.rce = 30.0;
  CHECK_FALSE(tampered.rce_consistent(1e-9));
}
