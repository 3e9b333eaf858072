#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wavefuse/corruptions.hpp"
#include "wavefuse/geometry.hpp"
#include "wavefuse/kitti_io.hpp"
#include "wavefuse/tensor.hpp"

namespace wavefuse {

struct Detection {
  Box3D box;
  double score = 0.0;
  std::string cls = "Car";
};

/// Greedy suppression by descending score (ties: lower index first) using
/// rotated BEV IoU; a box is dropped when its IoU with a kept box exceeds
/// `iou_thresh`. Returns kept indices in visiting order.
std::vector<std::size_t> nms(std::span<const Detection> dets, double iou_thresh);

enum class IouKind { bev, box3d };

struct ScoredMatch {
  double score = 0.0;
  bool true_positive = false;
};

/// One frame: detections visit GTs in descending-score order and claim the
/// highest-IoU unclaimed GT with IoU >= thresh.
std::vector<ScoredMatch> match_frame(std::span<const Detection> dets, std::span<const Box3D> gts,
                                     double iou_thresh, IouKind kind);

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

struct PrCurve {
  std::vector<PrPoint> points;  // one per detection, score-descending
  std::size_t gt_count = 0;
};

/// Merges per-frame matches into one score-descending sweep (stable on ties).
PrCurve curve_from_matches(std::vector<ScoredMatch> matches, std::size_t gt_count);

PrCurve match_detections(std::span<const Detection> dets, std::span<const Box3D> gts,
                         double iou_thresh, IouKind kind);

/// Mean over recall anchors {1/40, ..., 40/40} of the best precision at
/// recall >= anchor, in percent. Throws InputError when gt_count is zero.
double ap_r40(const PrCurve& curve);

enum class RceUnit { percent, fraction };

/// (ap_clean - mean(ap_cor)) / ap_clean, scaled by 100 for percent.
double rce(double ap_clean, std::span<const double> ap_cor, RceUnit unit = RceUnit::percent);

struct PixelStats {
  std::vector<double> image_means;
  double mean = 0.0;    // of image_means
  double stddev = 0.0;  // population
};

PixelStats dataset_pixel_stats(std::span<const Tensor> images);

// ---------------------------------------------------------------------------
// KITTI difficulty buckets

enum class Difficulty { easy, moderate, hard };

struct DifficultyLimits {
  double min_bbox_height;  // px
  int max_occlusion;
  double max_truncation;
};

DifficultyLimits difficulty_limits(Difficulty d);
Difficulty parse_difficulty(const std::string& name);
/// False for DontCare rows.
bool passes_difficulty(const LabelRecord& label, Difficulty d);

// ---------------------------------------------------------------------------
// Benchmark report

struct CellResult {
  CorruptionKind kind = CorruptionKind::none;
  int severity = 1;
  double ap = 0.0;
};

struct KindSummary {
  CorruptionKind kind = CorruptionKind::none;
  double mean_ap = 0.0;
};

struct BenchmarkReport {
  double ap_clean = 0.0;
  std::vector<CellResult> cells;     // kind-major, severity-minor
  std::vector<KindSummary> per_kind;  // mean over severities, first-seen order
  double average_ap_cor = 0.0;       // mean of per_kind
  std::optional<double> rce;         // absent when ap_clean == 0
  RceUnit rce_unit = RceUnit::percent;

  /// Derives per_kind, average_ap_cor and rce from the cells.
  static BenchmarkReport assemble(double ap_clean, std::vector<CellResult> cells,
                                  RceUnit unit = RceUnit::percent);
  /// |rce - recomputed| <= tol (vacuously true without rce).
  bool rce_consistent(double tol) const;
};

/// Header "kind,severity,ap"; one row per cell; fixed 6-decimal values.
std::string report_to_csv(const BenchmarkReport& report);
std::string report_to_json(const BenchmarkReport& report);
BenchmarkReport report_from_json(const std::string& text);

}  // namespace wavefuse
