#include <benchmark/benchmark.h>

#include "wavefuse/attention.hpp"
#include "wavefuse/corruptions.hpp"
#include "wavefuse/dgwa.hpp"
#include "wavefuse/eval.hpp"
#include "wavefuse/geometry.hpp"
#include "wavefuse/harness.hpp"
#include "wavefuse/rng.hpp"
#include "wavefuse/wavelet.hpp"

using namespace wavefuse;

namespace {

Tensor random_tensor(std::vector<std::size_t> dims, std::uint64_t seed) {
  CounterRng rng(seed);
  Tensor t(std::move(dims));
  for (auto& v : t.data()) v = rng.uniform(-1, 1);
  return t;
}

void BM_Conv3x3(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  CounterRng rng(1);
  const Tensor x = random_tensor({n, n, 16}, 2);
  const auto k = ConvKernel::random(16, 16, 3, 3, rng, 1, 1);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, k));
}
BENCHMARK(BM_Conv3x3)->Arg(16)->Arg(32)->Arg(64);

void BM_Dwt2RoundTrip(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_tensor({n, n, 16}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(idwt2(dwt2(x)));
}
BENCHMARK(BM_Dwt2RoundTrip)->Arg(32)->Arg(128);

void BM_Attention(benchmark::State& state) {
  const auto nq = static_cast<std::size_t>(state.range(0));
  const Tensor q = random_tensor({nq, 16}, 4), k = random_tensor({nq / 4, 16}, 5), v = random_tensor({nq / 4, 16}, 6);
  for (auto _ : state) benchmark::DoNotOptimize(scaled_dot_attention_values(q, k, v, 0.25));
}
BENCHMARK(BM_Attention)->Arg(256)->Arg(1920);

void BM_DgwaForward(benchmark::State& state) {
  const auto params = DgwaParams::random(DgwaConfig{}, 7);
  const DepthGuidedFeatures x{random_tensor({24, 80, 16}, 8)};
  for (auto _ : state) benchmark::DoNotOptimize(dgwa_forward(x, params));
}
BENCHMARK(BM_DgwaForward)->Unit(benchmark::kMillisecond);

void BM_ProjectPoints(benchmark::State& state) {
  const auto cfg = BenchConfig{};
  const auto scene = synth_scene(1, cfg);
  for (auto _ : state)
    benchmark::DoNotOptimize(project_points(scene.cloud, scene.calib, cfg.image_height, cfg.image_width));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * scene.cloud.size()));
}
BENCHMARK(BM_ProjectPoints);

void BM_RotatedIou(benchmark::State& state) {
  const Box3D a{0, 0, 0, 3.9, 1.6, 1.56, 0.3}, b{0.8, 0.4, 0.1, 3.9, 1.6, 1.56, -0.2};
  for (auto _ : state) benchmark::DoNotOptimize(iou3d(a, b));
}
BENCHMARK(BM_RotatedIou);

void BM_ApR40(benchmark::State& state) {
  CounterRng rng(9);
  std::vector<ScoredMatch> matches;
  for (int i = 0; i < state.range(0); ++i) matches.push_back({rng.uniform(), rng.uniform() < 0.6});
  for (auto _ : state) benchmark::DoNotOptimize(ap_r40(curve_from_matches(matches, matches.size())));
}
BENCHMARK(BM_ApR40)->Arg(100)->Arg(10000);

void BM_CorruptLidar(benchmark::State& state) {
  const auto scene = synth_scene(2, BenchConfig{});
  const auto kind = static_cast<CorruptionKind>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(corrupt_lidar(scene.cloud, {kind, 3, 1}, scene.gt_boxes));
  state.SetLabel(std::string(kind_name(kind)));
}
BENCHMARK(BM_CorruptLidar)
    ->Arg(static_cast<int>(CorruptionKind::density))
    ->Arg(static_cast<int>(CorruptionKind::cutout))
    ->Arg(static_cast<int>(CorruptionKind::gauss_lidar));

void BM_ToyDetect(benchmark::State& state) {
  const BenchConfig cfg;
  const auto params = PipelineParams::create(pipeline_seed(cfg.seed));
  const auto scene = synth_scene(3, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(toy_detect(scene, params, cfg));
}
BENCHMARK(BM_ToyDetect)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
