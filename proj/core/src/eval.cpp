#include "wavefuse/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "wavefuse/error.hpp"

namespace wavefuse {

namespace {

std::vector<std::size_t> score_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

}  // namespace

std::vector<std::size_t> nms(std::span<const Detection> dets, double iou_thresh) {
  if (!(iou_thresh >= 0.0 && iou_thresh <= 1.0)) throw InputError("nms: iou_thresh must be in [0, 1]");
  std::vector<std::size_t> kept;
  for (std::size_t i : score_order(dets)) {
    bool suppressed = false;
    for (std::size_t k : kept) {
      if (rotated_bev_iou(dets[k].box, dets[i].box) > iou_thresh) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(i);
  }
  return kept;
}

std::vector<ScoredMatch> match_frame(std::span<const Detection> dets, std::span<const Box3D> gts,
                                     double iou_thresh, IouKind kind) {
  std::vector<char> claimed(gts.size(), 0);
  std::vector<ScoredMatch> out;
  out.reserve(dets.size());
  for (std::size_t i : score_order(dets)) {
    double best = -1.0;
    std::size_t best_gt = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (claimed[g]) continue;
      const double iou = kind == IouKind::bev ? rotated_bev_iou(dets[i].box, gts[g]) : iou3d(dets[i].box, gts[g]);
      if (iou >= iou_thresh && iou > best) {
        best = iou;
        best_gt = g;
      }
    }
    const bool tp = best_gt < gts.size();
    if (tp) claimed[best_gt] = 1;
    out.push_back({dets[i].score, tp});
  }
  return out;
}

PrCurve curve_from_matches(std::vector<ScoredMatch> matches, std::size_t gt_count) {
  std::stable_sort(matches.begin(), matches.end(),
                   [](const ScoredMatch& a, const ScoredMatch& b) { return a.score > b.score; });
  PrCurve curve;
  curve.gt_count = gt_count;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    if (matches[i].true_positive) ++tp;
    const double recall = gt_count ? static_cast<double>(tp) / static_cast<double>(gt_count) : 0.0;
    curve.points.push_back({recall, static_cast<double>(tp) / static_cast<double>(i + 1)});
  }
  return curve;
}

PrCurve match_detections(std::span<const Detection> dets, std::span<const Box3D> gts,
                         double iou_thresh, IouKind kind) {
  return curve_from_matches(match_frame(dets, gts, iou_thresh, kind), gts.size());
}

double ap_r40(const PrCurve& curve) {
  if (curve.gt_count == 0) throw InputError("ap_r40: no ground-truth objects");
  // Suffix maximum gives the interpolated precision at each sweep position.
  const std::size_t n = curve.points.size();
  std::vector<double> best_after(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) best_after[i] = std::max(best_after[i + 1], curve.points[i].precision);
  double total = 0.0;
  std::size_t pos = 0;
  for (int k = 1; k <= 40; ++k) {
    const double anchor = static_cast<double>(k) / 40.0;
    while (pos < n && curve.points[pos].recall < anchor) ++pos;
    total += best_after[pos];
  }
  return 100.0 * total / 40.0;
}

double rce(double ap_clean, std::span<const double> ap_cor, RceUnit unit) {
  if (!(ap_clean > 0.0)) throw InputError("rce: ap_clean must be positive");
  if (ap_cor.empty()) throw InputError("rce: no corruption APs");
  const double mean = std::accumulate(ap_cor.begin(), ap_cor.end(), 0.0) / static_cast<double>(ap_cor.size());
  const double frac = (ap_clean - mean) / ap_clean;
  return unit == RceUnit::percent ? 100.0 * frac : frac;
}

PixelStats dataset_pixel_stats(std::span<const Tensor> images) {
  if (images.empty()) throw InputError("dataset_pixel_stats: empty image set");
  PixelStats stats;
  for (const auto& img : images) {
    require_rank(img, 3, "dataset_pixel_stats");
    const double sum = std::accumulate(img.data().begin(), img.data().end(), 0.0);
    stats.image_means.push_back(sum / static_cast<double>(img.size()));
  }
  const double n = static_cast<double>(stats.image_means.size());
  stats.mean = std::accumulate(stats.image_means.begin(), stats.image_means.end(), 0.0) / n;
  double var = 0.0;
  for (double m : stats.image_means) var += (m - stats.mean) * (m - stats.mean);
  stats.stddev = std::sqrt(var / n);
  return stats;
}

DifficultyLimits difficulty_limits(Difficulty d) {
  switch (d) {
    case Difficulty::easy:
      return {40.0, 0, 0.15};
    case Difficulty::moderate:
      return {25.0, 1, 0.30};
    case Difficulty::hard:
      return {25.0, 2, 0.50};
  }
  return {25.0, 1, 0.30};
}

Difficulty parse_difficulty(const std::string& name) {
  if (name == "easy") return Difficulty::easy;
  if (name == "moderate") return Difficulty::moderate;
  if (name == "hard") return Difficulty::hard;
  throw InputError("unknown difficulty '" + name + "'");
}

bool passes_difficulty(const LabelRecord& label, Difficulty d) {
  if (label.dont_care()) return false;
  const auto lim = difficulty_limits(d);
  return label.bbox[3] - label.bbox[1] >= lim.min_bbox_height && label.occlusion <= lim.max_occlusion &&
         label.truncation <= lim.max_truncation;
}

// ---------------------------------------------------------------------------
// report

BenchmarkReport BenchmarkReport::assemble(double ap_clean, std::vector<CellResult> cells, RceUnit unit) {
  BenchmarkReport r;
  r.ap_clean = ap_clean;
  r.cells = std::move(cells);
  r.rce_unit = unit;
  std::vector<std::size_t> counts;
  for (const auto& c : r.cells) {
    auto it = std::find_if(r.per_kind.begin(), r.per_kind.end(),
                           [&](const KindSummary& s) { return s.kind == c.kind; });
    if (it == r.per_kind.end()) {
      r.per_kind.push_back({c.kind, 0.0});
      counts.push_back(0);
      it = r.per_kind.end() - 1;
    }
    const auto idx = static_cast<std::size_t>(it - r.per_kind.begin());
    it->mean_ap += c.ap;
    ++counts[idx];
  }
  std::vector<double> means;
  for (std::size_t i = 0; i < r.per_kind.size(); ++i) {
    r.per_kind[i].mean_ap /= static_cast<double>(counts[i]);
    means.push_back(r.per_kind[i].mean_ap);
  }
  if (!means.empty()) {
    r.average_ap_cor = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(means.size());
  }
  if (ap_clean > 0.0 && !means.empty()) r.rce = wavefuse::rce(ap_clean, means, unit);
  return r;
}

bool BenchmarkReport::rce_consistent(double tol) const {
  if (!rce) return true;
  const double frac = (ap_clean - average_ap_cor) / ap_clean;
  const double expected = rce_unit == RceUnit::percent ? 100.0 * frac : frac;
  return std::abs(*rce - expected) <= tol;
}

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string report_to_csv(const BenchmarkReport& report) {
  std::string out = "kind,severity,ap\n";
  for (const auto& c : report.cells) {
    out += std::string(kind_name(c.kind)) + "," + std::to_string(c.severity) + "," + fixed6(c.ap) + "\n";
  }
  return out;
}

std::string report_to_json(const BenchmarkReport& report) {
  nlohmann::ordered_json j;
  j["ap_clean"] = report.ap_clean;
  auto& cells = j["cells"] = nlohmann::ordered_json::array();
  for (const auto& c : report.cells) {
    cells.push_back({{"kind", kind_name(c.kind)}, {"severity", c.severity}, {"ap", c.ap}});
  }
  auto& kinds = j["per_kind"] = nlohmann::ordered_json::array();
  for (const auto& k : report.per_kind) kinds.push_back({{"kind", kind_name(k.kind)}, {"mean_ap", k.mean_ap}});
  j["average_ap_cor"] = report.average_ap_cor;
  if (report.rce) j["rce"] = *report.rce;
  else j["rce"] = nullptr;
  j["rce_unit"] = report.rce_unit == RceUnit::percent ? "percent" : "fraction";
  return j.dump(2) + "\n";
}

BenchmarkReport report_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    BenchmarkReport r;
    r.ap_clean = j.at("ap_clean").get<double>();
    for (const auto& c : j.at("cells")) {
      r.cells.push_back({parse_kind(c.at("kind").get<std::string>()), c.at("severity").get<int>(),
                         c.at("ap").get<double>()});
    }
    for (const auto& k : j.at("per_kind")) {
      r.per_kind.push_back({parse_kind(k.at("kind").get<std::string>()), k.at("mean_ap").get<double>()});
    }
    r.average_ap_cor = j.at("average_ap_cor").get<double>();
    if (!j.at("rce").is_null()) r.rce = j.at("rce").get<double>();
    r.rce_unit = j.at("rce_unit").get<std::string>() == "fraction" ? RceUnit::fraction : RceUnit::percent;
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("benchmark report JSON: ") + e.what());
  }
}

}  // namespace wavefuse
