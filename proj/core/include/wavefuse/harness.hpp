#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wavefuse/adfpn.hpp"
#include "wavefuse/corruptions.hpp"
#include "wavefuse/dgwa.hpp"
#include "wavefuse/eval.hpp"
#include "wavefuse/fusion.hpp"
#include "wavefuse/geometry.hpp"
#include "wavefuse/kitti_io.hpp"
#include "wavefuse/tensor.hpp"

namespace wavefuse {

/// Every knob of the synthetic benchmark. Defaults are the shipped
/// configuration; `parse` reads the flat "key = value" form documented in
/// the README.
struct BenchConfig {
  std::uint64_t seed = 7;
  std::size_t scenes = 20;
  std::size_t objects_min = 1;
  std::size_t objects_max = 4;
  std::vector<CorruptionKind> kinds = {CorruptionKind::snow,    CorruptionKind::fog,
                                       CorruptionKind::gauss_img, CorruptionKind::density,
                                       CorruptionKind::cutout,  CorruptionKind::gauss_lidar};
  std::vector<int> severities = {1, 2, 3, 4, 5};

  // Camera
  std::size_t image_height = 96;
  std::size_t image_width = 320;

  // BEV grid and point crop, LiDAR frame (metres)
  double x_min = 0.0, x_max = 48.0;
  double y_min = -24.0, y_max = 24.0;
  double z_min = -5.0, z_max = 3.0;
  double cell_size = 0.05;

  // Scene generation
  std::array<double, 3> anchor = {3.9, 1.6, 1.56};  // l, w, h
  double place_x_min = 8.0, place_x_max = 40.0;
  double min_separation = 6.0;   // centre distance
  double surface_density = 20.0;  // points per m^2 at reference_range
  double reference_range = 10.0;  // density falls off as (reference_range / r)^2 beyond it
  std::size_t ground_points = 4000;
  double ground_z = -1.73;

  // Detector
  double ground_clearance = 0.3;  // points this far above ground_z count as objects
  double count_radius = 2.0;
  double count_scale = 40.0;
  double score_threshold = 0.5;
  double peak_radius = 1.5;
  double cluster_radius = 2.6;
  double nms_threshold = 0.7;
  std::size_t max_detections = 100;
  double readout_gain = 0.1;

  // Evaluation
  double iou_threshold = 0.7;
  IouKind iou_kind = IouKind::box3d;
  RceUnit rce_unit = RceUnit::percent;

  std::string output_dir;

  /// Throws InputError on empty or inverted ranges and out-of-range values.
  void validate() const;

  /// Unknown keys, duplicate keys and malformed values raise FormatError
  /// naming the line. Missing keys keep their defaults.
  static BenchConfig parse(const std::string& text);
  /// Every key, in parse-compatible form.
  std::string to_text() const;
};

struct SyntheticScene {
  std::vector<Box3D> gt_boxes;
  RawPointCloud cloud;
  Tensor image;  // H x W x 3, [0, 255]
  CalibrationSet calib;
};

/// Camera at the LiDAR origin looking down +x with a 90 degree horizontal
/// field of view; identity rectification.
CalibrationSet synthetic_calibration(std::size_t height, std::size_t width);

/// Throws GenerationError when the objects cannot be placed in 1000 tries.
SyntheticScene synth_scene(std::uint64_t seed, const BenchConfig& cfg);

struct PipelineParams {
  EncoderParams encoder;
  PyramidParams pyramid;
  DgwaParams dgwa;
  FusionParams fusion;
  LinearMap readout;  // fused feature -> 1

  static PipelineParams create(std::uint64_t seed);
};

/// Image branch up to the stride-4 merged pyramid map F_i.
Tensor image_features(const Tensor& image, const PipelineParams& params);

/// Depth-guided wavelet attention over F_i with the projected cloud: F_out.
Tensor dgwa_features(const Tensor& f_i, const RawPointCloud& cloud, const CalibrationSet& calib,
                     std::size_t height, std::size_t width, const PipelineParams& params);

/// Detector back half: BEV rasterisation, feature gathering, fusion,
/// scoring, peak extraction, box fitting and NMS, given F_out.
std::vector<Detection> detect_from_features(const RawPointCloud& cloud, const CalibrationSet& calib,
                                            const Tensor& f_out, const PipelineParams& params,
                                            const BenchConfig& cfg);

std::vector<Detection> toy_detect(const SyntheticScene& scene, const PipelineParams& params,
                                  const BenchConfig& cfg);

/// Runs fn(0) .. fn(n-1) on up to `threads` workers. Callers write results
/// into per-index slots, so the outcome never depends on scheduling.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

/// Clean pass plus every (kind, severity) cell; corruptions are applied to
/// copies of each scene at evaluation time only.
BenchmarkReport run_benchmark(const BenchConfig& cfg, unsigned threads = 1);

/// Seeds used by run_benchmark, exposed so tools can regenerate its inputs.
std::uint64_t pipeline_seed(std::uint64_t bench_seed);
std::uint64_t scene_seed(std::uint64_t bench_seed, std::size_t scene);

/// Seed of the corruption applied to scene `scene` for one cell.
std::uint64_t corruption_seed(std::uint64_t bench_seed, std::size_t scene, CorruptionKind kind,
                              int severity);

}  // namespace wavefuse
