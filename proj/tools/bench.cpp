// bench: synthetic robustness benchmark driver and single-purpose helpers.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "wavefuse/corruptions.hpp"
#include "wavefuse/error.hpp"
#include "wavefuse/eval.hpp"
#include "wavefuse/harness.hpp"
#include "wavefuse/image_io.hpp"
#include "wavefuse/kitti_io.hpp"

namespace fs = std::filesystem;
using namespace wavefuse;

namespace {

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_file_text(out_path, text);
  }
}

bool has_extension(const std::string& path, const char* ext) { return fs::path(path).extension() == ext; }

// "x y z l w h yaw" per line, LiDAR frame; '#' starts a comment.
std::vector<Box3D> read_box_list(const std::string& path) {
  std::vector<Box3D> boxes;
  std::istringstream in(read_file_text(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = line.substr(0, line.find('#'));
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    Box3D b;
    std::string extra;
    if (!(fields >> b.x >> b.y >> b.z >> b.l >> b.w >> b.h >> b.yaw) || (fields >> extra)) {
      throw FormatError(path + ": box line " + std::to_string(line_no) + " needs 7 numbers");
    }
    boxes.push_back(b);
  }
  return boxes;
}

// ---------------------------------------------------------------------------

struct RunArgs {
  std::string config;
  std::string out;
  std::string format = "csv";
  unsigned threads = 1;
  std::string dump_features;
};

int cmd_run(const RunArgs& a) {
  const BenchConfig cfg = a.config.empty() ? BenchConfig{} : BenchConfig::parse(read_file_text(a.config));
  const std::string out_dir = a.out.empty() ? cfg.output_dir : a.out;
  if (out_dir.empty()) throw InputError("run: no output directory (--out or output_dir)");
  fs::create_directories(out_dir);

  const auto report = run_benchmark(cfg, a.threads);
  if (!report.rce_consistent(1e-9)) throw std::logic_error("report RCE disagrees with its own AP fields");
  const std::string name = a.format == "json" ? "report.json" : "report.csv";
  const auto path = (fs::path(out_dir) / name).string();
  write_file_text(path, a.format == "json" ? report_to_json(report) : report_to_csv(report));

  if (!a.dump_features.empty()) {
    fs::create_directories(a.dump_features);
    const auto params = PipelineParams::create(pipeline_seed(cfg.seed));
    for (std::size_t s = 0; s < cfg.scenes; ++s) {
      const auto scene = synth_scene(scene_seed(cfg.seed, s), cfg);
      const auto f_i = image_features(scene.image, params);
      const auto f_out = dgwa_features(f_i, scene.cloud, scene.calib, cfg.image_height, cfg.image_width, params);
      char stem[32];
      std::snprintf(stem, sizeof stem, "scene_%03zu", s);
      const fs::path dir(a.dump_features);
      write_file_bytes((dir / (std::string(stem) + "_fi.wft")).string(), encode_feature_dump(f_i));
      write_file_bytes((dir / (std::string(stem) + "_fout.wft")).string(), encode_feature_dump(f_out));
      write_ppm((dir / (std::string(stem) + ".ppm")).string(), scene.image);
    }
  }

  std::cout << "ap_clean " << fixed(report.ap_clean, 4) << "\n"
            << "average_ap_cor " << fixed(report.average_ap_cor, 4) << "\n"
            << "rce " << (report.rce ? fixed(*report.rce, 4) : std::string("n/a")) << "\n"
            << "wrote " << path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct CorruptArgs {
  std::string kind;
  int severity = 1;
  std::uint64_t seed = 0;
  std::string in;
  std::string out;
  std::string boxes;
};

int cmd_corrupt(const CorruptArgs& a) {
  const CorruptionSpec spec{parse_kind(a.kind), a.severity, a.seed};
  if (has_extension(a.in, ".bin")) {
    const auto cloud = read_velodyne_bin(read_file_bytes(a.in));
    std::optional<std::vector<Box3D>> boxes;
    if (!a.boxes.empty()) boxes = read_box_list(a.boxes);
    std::optional<std::span<const Box3D>> view;
    if (boxes) view = std::span<const Box3D>(*boxes);
    write_file_bytes(a.out, write_velodyne_bin(corrupt_lidar(cloud, spec, view)));
  } else if (has_extension(a.in, ".ppm")) {
    write_ppm(a.out, corrupt_image(read_ppm(a.in), spec));
  } else {
    throw InputError("corrupt: --in must be a .bin point cloud or a .ppm image");
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string dets;
  std::string gts;
  double iou = 0.7;
  std::string iou_kind = "3d";
  std::string difficulty = "moderate";
  std::string cls = "Car";
  std::string format = "csv";
  std::string out;
};

// A label file, or a directory of them paired by file name.
std::vector<std::pair<std::string, std::string>> pair_label_files(const std::string& dets, const std::string& gts) {
  if (!fs::is_directory(gts)) return {{dets, gts}};
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& entry : fs::directory_iterator(gts)) {
    if (entry.path().extension() != ".txt") continue;
    pairs.push_back({(fs::path(dets) / entry.path().filename()).string(), entry.path().string()});
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

int cmd_eval(const EvalArgs& a) {
  const auto difficulty = parse_difficulty(a.difficulty);
  const IouKind kind = a.iou_kind == "bev" ? IouKind::bev : IouKind::box3d;
  std::vector<ScoredMatch> matches;
  std::size_t gt_count = 0, det_count = 0;
  for (const auto& [det_path, gt_path] : pair_label_files(a.dets, a.gts)) {
    std::vector<Box3D> gt_boxes;
    for (const auto& l : parse_labels(read_file_text(gt_path))) {
      if (l.type == a.cls && passes_difficulty(l, difficulty)) gt_boxes.push_back(label_to_box(l));
    }
    std::vector<Detection> dets;
    if (fs::exists(det_path)) {
      for (const auto& l : parse_labels(read_file_text(det_path))) {
        if (l.type != a.cls) continue;
        if (!l.score) throw FormatError(det_path + ": detection rows need a score column");
        dets.push_back({label_to_box(l), *l.score, l.type});
      }
    }
    const auto m = match_frame(dets, gt_boxes, a.iou, kind);
    matches.insert(matches.end(), m.begin(), m.end());
    gt_count += gt_boxes.size();
    det_count += dets.size();
  }
  const double ap = ap_r40(curve_from_matches(matches, gt_count));
  const auto tp = std::count_if(matches.begin(), matches.end(), [](const ScoredMatch& m) { return m.true_positive; });

  std::string text;
  if (a.format == "json") {
    nlohmann::ordered_json j{{"class", a.cls},         {"difficulty", a.difficulty}, {"iou_kind", a.iou_kind},
                             {"iou_threshold", a.iou}, {"gt_count", gt_count},       {"det_count", det_count},
                             {"true_positives", tp},   {"ap_r40", ap}};
    text = j.dump(2) + "\n";
  } else {
    text = "class,difficulty,iou_kind,iou_threshold,gt_count,det_count,true_positives,ap_r40\n" + a.cls + "," +
           a.difficulty + "," + a.iou_kind + "," + fixed(a.iou, 2) + "," + std::to_string(gt_count) + "," +
           std::to_string(det_count) + "," + std::to_string(tp) + "," + fixed(ap) + "\n";
  }
  emit(text, a.out);
  return 0;
}

// ---------------------------------------------------------------------------

struct StatsArgs {
  std::string images;
  std::string format = "csv";
  std::string out;
};

int cmd_stats(const StatsArgs& a) {
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(a.images)) {
    if (entry.path().extension() == ".ppm") paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<Tensor> images;
  for (const auto& p : paths) images.push_back(read_ppm(p));
  const auto stats = dataset_pixel_stats(images);

  std::string text;
  if (a.format == "json") {
    nlohmann::ordered_json j;
    auto& rows = j["images"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < paths.size(); ++i) {
      rows.push_back({{"image", fs::path(paths[i]).filename().string()}, {"mean", stats.image_means[i]}});
    }
    j["mean"] = stats.mean;
    j["stddev"] = stats.stddev;
    text = j.dump(2) + "\n";
  } else {
    text = "image,mean\n";
    for (std::size_t i = 0; i < paths.size(); ++i) {
      text += fs::path(paths[i]).filename().string() + "," + fixed(stats.image_means[i]) + "\n";
    }
    text += "#fit,mean=" + fixed(stats.mean) + ",stddev=" + fixed(stats.stddev) + "\n";
  }
  emit(text, a.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic multi-modal robustness benchmark"};
  app.require_subcommand(1);
  const std::vector<std::string> formats{"csv", "json"};

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run the clean + corruption matrix and write a report");
  run_cmd->add_option("--config", run.config, "Flat key = value config file (defaults when omitted)")
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--out", run.out, "Output directory");
  run_cmd->add_option("--format", run.format, "Report format")->check(CLI::IsMember(formats));
  run_cmd->add_option("--threads", run.threads, "Worker threads")->check(CLI::PositiveNumber);
  run_cmd->add_option("--dump-features", run.dump_features, "Directory for F_i / F_out feature dumps");

  CorruptArgs corrupt;
  auto* corrupt_cmd = app.add_subcommand("corrupt", "Corrupt one .bin point cloud or .ppm image");
  corrupt_cmd->add_option("--kind", corrupt.kind, "Corruption kind")->required();
  corrupt_cmd->add_option("--severity", corrupt.severity, "Severity 1..5")->required()->check(CLI::Range(1, 5));
  corrupt_cmd->add_option("--seed", corrupt.seed, "Seed")->required();
  corrupt_cmd->add_option("--in", corrupt.in, "Input file")->required()->check(CLI::ExistingFile);
  corrupt_cmd->add_option("--out", corrupt.out, "Output file")->required();
  corrupt_cmd->add_option("--boxes", corrupt.boxes, "Object boxes (x y z l w h yaw per line) for local kinds")
      ->check(CLI::ExistingFile);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "AP (R40) of KITTI-format detections against ground truth");
  eval_cmd->add_option("--dets", eval.dets, "Detection label file or directory")->required();
  eval_cmd->add_option("--gts", eval.gts, "Ground-truth label file or directory")->required()->check(CLI::ExistingPath);
  eval_cmd->add_option("--iou", eval.iou, "Match threshold")->check(CLI::Range(0.0, 1.0));
  eval_cmd->add_option("--iou-kind", eval.iou_kind, "bev or 3d")->check(CLI::IsMember({"bev", "3d"}));
  eval_cmd->add_option("--difficulty", eval.difficulty, "easy, moderate or hard")
      ->check(CLI::IsMember({"easy", "moderate", "hard"}));
  eval_cmd->add_option("--class", eval.cls, "Object class");
  eval_cmd->add_option("--format", eval.format, "Output format")->check(CLI::IsMember(formats));
  eval_cmd->add_option("--out", eval.out, "Output file (stdout when omitted)");

  StatsArgs stats;
  auto* stats_cmd = app.add_subcommand("stats", "Per-image pixel means and their Gaussian fit");
  stats_cmd->add_option("--images", stats.images, "Directory of .ppm images")->required()->check(CLI::ExistingDirectory);
  stats_cmd->add_option("--format", stats.format, "Output format")->check(CLI::IsMember(formats));
  stats_cmd->add_option("--out", stats.out, "Output file (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(run);
    if (*corrupt_cmd) return cmd_corrupt(corrupt);
    if (*eval_cmd) return cmd_eval(eval);
    if (*stats_cmd) return cmd_stats(stats);
  } catch (const std::exception& e) {
    std::cerr << "bench: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
