#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wavefuse {

struct LidarPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;

  bool operator==(const LidarPoint&) const = default;
};

/// LiDAR sweep in the sensor frame (x forward, y left, z up).
struct RawPointCloud {
  std::vector<LidarPoint> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool operator==(const RawPointCloud&) const = default;
};

using Mat3x4 = std::array<std::array<double, 4>, 3>;
using Mat3x3 = std::array<std::array<double, 3>, 3>;

struct CalibrationSet {
  Mat3x4 p2{};
  Mat3x3 r0_rect{};
  Mat3x4 tr_velo_to_cam{};

  bool operator==(const CalibrationSet&) const = default;
};

struct LabelRecord {
  std::string type;
  double truncation = 0.0;
  int occlusion = 0;
  double alpha = 0.0;
  std::array<double, 4> bbox{};        // x1, y1, x2, y2 in pixels
  std::array<double, 3> dimensions{};  // h, w, l in metres
  std::array<double, 3> location{};    // x, y, z, camera frame, bottom centre
  double rotation_y = 0.0;
  std::optional<double> score;

  bool dont_care() const { return type == "DontCare"; }
};

/// Decodes KITTI velodyne scans: little-endian float32 (x, y, z, intensity).
RawPointCloud read_velodyne_bin(std::span<const std::byte> bytes);
std::vector<std::byte> write_velodyne_bin(const RawPointCloud& cloud);

/// Requires P2, R0_rect and Tr_velo_to_cam; other keys are ignored.
CalibrationSet parse_calib(std::string_view text);
std::string format_calib(const CalibrationSet& calib);

struct LabelParseOptions {
  /// DontCare rows are kept (flagged by LabelRecord::dont_care) unless false.
  bool keep_dont_care = true;
};

std::vector<LabelRecord> parse_labels(std::string_view text, LabelParseOptions options = {});
std::string format_labels(std::span<const LabelRecord> labels);

std::vector<std::byte> read_file_bytes(const std::string& path);
std::string read_file_text(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::byte> bytes);
void write_file_text(const std::string& path, std::string_view text);

}  // namespace wavefuse
