#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "wavefuse/kitti_io.hpp"
#include "wavefuse/tensor.hpp"

namespace wavefuse {

/// Image-plane depth raster: channel 0 is depth in metres (camera z),
/// channel 1 is a {0,1} validity mask.
struct SparseDepthMap {
  Tensor values;  // H x W x 2

  std::size_t height() const { return values.height(); }
  std::size_t width() const { return values.width(); }
  double depth(std::size_t row, std::size_t col) const { return values.at(row, col, 0); }
  bool valid(std::size_t row, std::size_t col) const { return values.at(row, col, 1) != 0.0; }
};

/// Oriented box in the LiDAR frame; (x, y, z) is the geometric centre and
/// yaw rotates the length axis from +x towards +y.
struct Box3D {
  double x = 0.0, y = 0.0, z = 0.0;
  double l = 1.0, w = 1.0, h = 1.0;
  double yaw = 0.0;

  bool operator==(const Box3D&) const = default;
};

/// Maps an angle into (-pi, pi].
double normalize_yaw(double yaw);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

/// Counter-clockwise corners of the box footprint in the x-y plane.
std::array<Vec2, 4> bev_corners(const Box3D& box);

struct CameraPoint {
  double x, y, z;  // rectified camera frame
};

/// LiDAR -> rectified camera: R0_rect * Tr_velo_to_cam * p.
CameraPoint lidar_to_camera(const CalibrationSet& calib, double x, double y, double z);

struct PixelProjection {
  double u;      // column, continuous
  double v;      // row, continuous
  double depth;  // camera z
};

/// nullopt when the point is not strictly in front of the camera.
std::optional<PixelProjection> project_to_image(const CalibrationSet& calib, double x, double y,
                                                double z);

/// Rounds to the nearest integer; exact .5 ties go to the smaller index.
long round_half_down(double v);

SparseDepthMap project_points(const RawPointCloud& cloud, const CalibrationSet& calib,
                              std::size_t height, std::size_t width);

/// Area of intersection of two convex polygons given counter-clockwise.
double convex_intersection_area(const std::vector<Vec2>& subject, const std::vector<Vec2>& clip);
double polygon_area(const std::vector<Vec2>& poly);

double rotated_bev_iou(const Box3D& a, const Box3D& b);
double iou3d(const Box3D& a, const Box3D& b);

/// KITTI camera-frame label -> Box3D with the axis permutation
/// (x, y, z)_box = (z, -x, -y)_cam; valid for evaluation because every
/// box is moved by the same rigid map.
Box3D label_to_box(const LabelRecord& label);

}  // namespace wavefuse
