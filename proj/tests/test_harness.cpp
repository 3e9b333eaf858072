#include <doctest.h>

#include <cmath>

#include "wavefuse/error.hpp"
#include "wavefuse/harness.hpp"
#include "wavefuse/image_io.hpp"
#include "wavefuse/rng.hpp"

using namespace wavefuse;

namespace {

BenchConfig small_config() {
  BenchConfig cfg;
  cfg.scenes = 2;
  cfg.image_height = 64;
  cfg.image_width = 128;
  return cfg;
}

std::vector<std::byte> bytes_of(const std::string& s) {
  std::vector<std::byte> out;
  for (char c : s) out.push_back(static_cast<std::byte>(c));
  return out;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = BenchConfig::parse(
      "# comment\n"
      "seed = 11\n"
      "\n"
      "kinds = fog, density\n"
      "severities = 2,4\n"
      "anchor = 4.0, 1.7, 1.5\n"
      "iou_kind = bev\n"
      "rce_unit = fraction\n"
      "output_dir = out/dir\n");
  CHECK(cfg.seed == 11);
  CHECK(cfg.kinds == std::vector<CorruptionKind>{CorruptionKind::fog, CorruptionKind::density});
  CHECK(cfg.severities == std::vector<int>{2, 4});
  CHECK(cfg.anchor[0] == 4.0);
  CHECK(cfg.iou_kind == IouKind::bev);
  CHECK(cfg.rce_unit == RceUnit::fraction);
  CHECK(cfg.output_dir == "out/dir");
  CHECK(cfg.scenes == BenchConfig{}.scenes);
}

TEST_CASE("config errors name the line") {
  auto fails_on_line = [](const std::string& text, int line) {
    try {
      BenchConfig::parse(text);
    } catch (const FormatError& e) {
      return std::string(e.what()).find("line " + std::to_string(line)) != std::string::npos;
    }
    return false;
  };
  CHECK(fails_on_line("seed = 1\nbogus = 2\n", 2));
  CHECK(fails_on_line("seed = 1\nseed = 2\n", 2));
  CHECK(fails_on_line("scenes 3\n", 1));
  CHECK(fails_on_line("scenes = three\n", 1));
  CHECK(fails_on_line("kinds = fog, hail\n", 1));
  CHECK(fails_on_line("iou_kind = 2d\n", 1));
  CHECK(fails_on_line("kinds =\n", 1));
  // Parsing checks syntax; ranges are checked by validate().
  CHECK_THROWS_AS(BenchConfig::parse("objects_min = 5\nobjects_max = 2\n").validate(), InputError);
  CHECK_THROWS_AS(BenchConfig::parse("image_height = 100\n").validate(), InputError);
  CHECK_THROWS_AS(BenchConfig::parse("severities = 0\n").validate(), InputError);
  CHECK_NOTHROW(BenchConfig{}.validate());
}

TEST_CASE("config text round trip") {
  BenchConfig cfg;
  cfg.seed = 123456789012345ull;
  cfg.kinds = {CorruptionKind::none, CorruptionKind::local_gauss};
  cfg.cell_size = 0.1;
  cfg.readout_gain = 1.0 / 3.0;
  cfg.output_dir = "a b";
  const auto back = BenchConfig::parse(cfg.to_text());
  CHECK(back.to_text() == cfg.to_text());
  CHECK(back.readout_gain == cfg.readout_gain);
  CHECK(back.seed == cfg.seed);
  CHECK(back.output_dir == "a b");
}

TEST_CASE("synthetic scenes") {
  const auto cfg = small_config();
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto s = synth_scene(seed, cfg);
    REQUIRE(s.gt_boxes.size() >= cfg.objects_min);
    REQUIRE(s.gt_boxes.size() <= cfg.objects_max);
    for (std::size_t i = 0; i < s.gt_boxes.size(); ++i) {
      const auto& b = s.gt_boxes[i];
      REQUIRE((b.x >= cfg.place_x_min && b.x <= cfg.place_x_max));
      REQUIRE(b.l == cfg.anchor[0]);
      for (std::size_t j = i + 1; j < s.gt_boxes.size(); ++j) REQUIRE(rotated_bev_iou(b, s.gt_boxes[j]) == 0.0);
    }
    REQUIRE(s.image.dims() == std::vector<std::size_t>{64, 128, 3});
    REQUIRE(s.cloud.size() > cfg.ground_points);
  }
  const auto a = synth_scene(5, cfg), b = synth_scene(5, cfg);
  CHECK(a.cloud == b.cloud);
  CHECK(a.image == b.image);
  CHECK(a.gt_boxes.size() == b.gt_boxes.size());
  CHECK_FALSE(synth_scene(6, cfg).cloud == a.cloud);
}

TEST_CASE("empty scenes") {
  auto cfg = small_config();
  cfg.objects_min = cfg.objects_max = 0;
  const auto s = synth_scene(1, cfg);
  CHECK(s.gt_boxes.empty());
  CHECK(s.cloud.size() == cfg.ground_points);
  const auto params = PipelineParams::create(1);
  CHECK(toy_detect(s, params, cfg).empty());
  SyntheticScene bare = s;
  bare.cloud.points.clear();
  CHECK(toy_detect(bare, params, cfg).empty());
}

TEST_CASE("placement failure raises GenerationError") {
  auto cfg = small_config();
  cfg.objects_min = cfg.objects_max = 200;
  CHECK_THROWS_AS(synth_scene(1, cfg), GenerationError);
}

TEST_CASE("toy detector finds a single well-sampled object") {
  auto cfg = small_config();
  cfg.objects_min = cfg.objects_max = 1;
  cfg.place_x_max = 20;
  const auto params = PipelineParams::create(pipeline_seed(cfg.seed));
  int found = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto s = synth_scene(seed, cfg);
    const auto dets = toy_detect(s, params, cfg);
    double best = 0;
    for (const auto& d : dets) best = std::max(best, rotated_bev_iou(d.box, s.gt_boxes[0]));
    found += best >= 0.5;
    CHECK(dets.size() <= cfg.max_detections);
    const auto again = toy_detect(s, params, cfg);
    REQUIRE(again.size() == dets.size());
    for (std::size_t i = 0; i < dets.size(); ++i) {
      CHECK(again[i].score == dets[i].score);
      CHECK(again[i].box.x == dets[i].box.x);
    }
  }
  CHECK(found == 5);
}

TEST_CASE("parallel_for covers every index and rethrows") {
  std::vector<int> hit(100, 0);
  parallel_for(100, 4, [&](std::size_t i) { hit[i] += 1; });
  CHECK(std::count(hit.begin(), hit.end(), 1) == 100);
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](std::size_t i) {
                                 if (i == 7) throw InputError("seven");
                               }),
                  InputError);
  parallel_for(0, 2, [](std::size_t) { FAIL("no work expected"); });
}

TEST_CASE("run_benchmark with the identity corruption") {
  auto cfg = small_config();
  cfg.kinds = {CorruptionKind::none};
  cfg.severities = {1, 3};
  const auto r = run_benchmark(cfg);
  REQUIRE(r.cells.size() == 2);
  for (const auto& c : r.cells) CHECK(c.ap == r.ap_clean);
  REQUIRE(r.rce.has_value());
  CHECK(*r.rce == 0.0);
  CHECK(r.rce_consistent(1e-9));
}

TEST_CASE("run_benchmark structure and thread independence") {
  auto cfg = small_config();
  cfg.kinds = {CorruptionKind::density, CorruptionKind::gauss_img};
  cfg.severities = {1, 5};
  const auto r = run_benchmark(cfg, 1);
  REQUIRE(r.cells.size() == 4);
  CHECK(r.cells[0].kind == CorruptionKind::density);
  CHECK(r.cells[1].severity == 5);
  CHECK(r.cells[2].kind == CorruptionKind::gauss_img);
  CHECK(r.rce_consistent(1e-9));
  const auto r2 = run_benchmark(cfg, 3);
  CHECK(report_to_json(r) == report_to_json(r2));
  CHECK(report_to_csv(r) == report_to_csv(r2));
}

TEST_CASE("ppm round trip") {
  CounterRng rng(3);
  Tensor img({5, 7, 3});
  for (auto& v : img.data()) v = static_cast<double>(rng.index(256));
  const auto bytes = encode_ppm(img);
  CHECK(decode_ppm(bytes) == img);
  CHECK(encode_ppm(decode_ppm(bytes)) == bytes);
  const Tensor commented = decode_ppm(bytes_of(std::string("P6\n# hi\n1 1\n255\n") + "abc"));
  CHECK(commented.at(0, 0, 2) == 99.0);
  CHECK_THROWS_AS(decode_ppm(bytes_of("P5\n1 1\n255\nx")), FormatError);
  CHECK_THROWS_AS(decode_ppm(bytes_of("P6\n2 1\n255\nabc")), FormatError);
  CHECK_THROWS_AS(decode_ppm(bytes_of("P6\n1 1\n65535\nabcdef")), FormatError);
}

TEST_CASE("feature dump round trip") {
  CounterRng rng(4);
  Tensor map({3, 4, 5});
  for (auto& v : map.data()) v = static_cast<float>(rng.uniform(-10, 10));
  const auto bytes = encode_feature_dump(map);
  CHECK(bytes.size() == 16 + 4 * 60);
  CHECK(std::to_integer<char>(bytes[0]) == 'W');
  CHECK(decode_feature_dump(bytes) == map);
  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(decode_feature_dump(truncated), FormatError);
  auto bad_magic = bytes;
  bad_magic[0] = std::byte{'X'};
  CHECK_THROWS_AS(decode_feature_dump(bad_magic), FormatError);
}
