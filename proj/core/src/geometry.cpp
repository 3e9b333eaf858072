#include "wavefuse/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include "wavefuse/error.hpp"

namespace wavefuse {

namespace {

bool calib_finite(const CalibrationSet& c) {
  for (const auto& row : c.p2)
    for (double v : row)
      if (!std::isfinite(v)) return false;
  for (const auto& row : c.r0_rect)
    for (double v : row)
      if (!std::isfinite(v)) return false;
  for (const auto& row : c.tr_velo_to_cam)
    for (double v : row)
      if (!std::isfinite(v)) return false;
  return true;
}

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

}  // namespace

double normalize_yaw(double yaw) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(yaw, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  if (r > std::numbers::pi) r -= two_pi;
  return r;
}

std::array<Vec2, 4> bev_corners(const Box3D& box) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const double hl = box.l / 2, hw = box.w / 2;
  const double local[4][2] = {{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}};
  std::array<Vec2, 4> out{};
  for (int i = 0; i < 4; ++i) {
    out[i] = {box.x + c * local[i][0] - s * local[i][1], box.y + s * local[i][0] + c * local[i][1]};
  }
  return out;
}

CameraPoint lidar_to_camera(const CalibrationSet& calib, double x, double y, double z) {
  double velo[3];
  for (int r = 0; r < 3; ++r) {
    const auto& t = calib.tr_velo_to_cam[r];
    velo[r] = t[0] * x + t[1] * y + t[2] * z + t[3];
  }
  double rect[3];
  for (int r = 0; r < 3; ++r) {
    const auto& m = calib.r0_rect[r];
    rect[r] = m[0] * velo[0] + m[1] * velo[1] + m[2] * velo[2];
  }
  return {rect[0], rect[1], rect[2]};
}

std::optional<PixelProjection> project_to_image(const CalibrationSet& calib, double x, double y,
                                                double z) {
  const CameraPoint cam = lidar_to_camera(calib, x, y, z);
  if (!(cam.z > 0.0)) return std::nullopt;
  double img[3];
  for (int r = 0; r < 3; ++r) {
    const auto& p = calib.p2[r];
    img[r] = p[0] * cam.x + p[1] * cam.y + p[2] * cam.z + p[3];
  }
  if (!(img[2] > 0.0)) return std::nullopt;
  return PixelProjection{img[0] / img[2], img[1] / img[2], cam.z};
}

long round_half_down(double v) { return static_cast<long>(std::ceil(v - 0.5)); }

SparseDepthMap project_points(const RawPointCloud& cloud, const CalibrationSet& calib,
                              std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw InputError("project_points: image size must be positive");
  if (!calib_finite(calib)) throw InputError("project_points: calibration has non-finite entries");
  SparseDepthMap map{Tensor({height, width, 2})};
  for (const auto& pt : cloud.points) {
    const auto proj = project_to_image(calib, pt.x, pt.y, pt.z);
    if (!proj) continue;
    const long col = round_half_down(proj->u);
    const long row = round_half_down(proj->v);
    if (col < 0 || row < 0 || col >= static_cast<long>(width) || row >= static_cast<long>(height)) {
      continue;
    }
    const auto r = static_cast<std::size_t>(row), c = static_cast<std::size_t>(col);
    double& depth = map.values.at(r, c, 0);
    double& valid = map.values.at(r, c, 1);
    if (valid == 0.0 || proj->depth < depth) {
      depth = proj->depth;
      valid = 1.0;
    }
  }
  return map;
}

double polygon_area(const std::vector<Vec2>& poly) {
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    twice += a.x * b.y - b.x * a.y;
  }
  return std::abs(twice) / 2.0;
}

// Sutherland-Hodgman against each edge of the (convex, CCW) clip polygon.
double convex_intersection_area(const std::vector<Vec2>& subject, const std::vector<Vec2>& clip) {
  std::vector<Vec2> output = subject;
  for (std::size_t e = 0; e < clip.size() && !output.empty(); ++e) {
    const Vec2& a = clip[e];
    const Vec2& b = clip[(e + 1) % clip.size()];
    std::vector<Vec2> input;
    input.swap(output);
    for (std::size_t i = 0; i < input.size(); ++i) {
      const Vec2& cur = input[i];
      const Vec2& prev = input[(i + input.size() - 1) % input.size()];
      const double dc = cross(a, b, cur);
      const double dp = cross(a, b, prev);
      if (dc >= 0.0) {
        if (dp < 0.0) {
          const double t = dp / (dp - dc);
          output.push_back({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
        }
        output.push_back(cur);
      } else if (dp >= 0.0) {
        const double t = dp / (dp - dc);
        output.push_back({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
      }
    }
  }
  return output.size() < 3 ? 0.0 : polygon_area(output);
}

namespace {

double bev_intersection(const Box3D& a, const Box3D& b) {
  const auto ca = bev_corners(a);
  const auto cb = bev_corners(b);
  // Clip in a canonical order so the result does not depend on argument order.
  const bool swap = std::tie(a.x, a.y, a.z, a.l, a.w, a.h, a.yaw) >
                    std::tie(b.x, b.y, b.z, b.l, b.w, b.h, b.yaw);
  const std::vector<Vec2> pa(ca.begin(), ca.end());
  const std::vector<Vec2> pb(cb.begin(), cb.end());
  return swap ? convex_intersection_area(pb, pa) : convex_intersection_area(pa, pb);
}

}  // namespace

double rotated_bev_iou(const Box3D& a, const Box3D& b) {
  const double area_a = a.l * a.w, area_b = b.l * b.w;
  if (area_a <= 0.0 || area_b <= 0.0) return 0.0;
  const double inter = bev_intersection(a, b);
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou3d(const Box3D& a, const Box3D& b) {
  const double vol_a = a.l * a.w * a.h, vol_b = b.l * b.w * b.h;
  if (vol_a <= 0.0 || vol_b <= 0.0) return 0.0;
  const double z_overlap =
      std::min(a.z + a.h / 2, b.z + b.h / 2) - std::max(a.z - a.h / 2, b.z - b.h / 2);
  if (z_overlap <= 0.0) return 0.0;
  const double inter = bev_intersection(a, b) * z_overlap;
  const double uni = vol_a + vol_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

Box3D label_to_box(const LabelRecord& label) {
  const double h = label.dimensions[0], w = label.dimensions[1], l = label.dimensions[2];
  Box3D box;
  box.x = label.location[2];
  box.y = -label.location[0];
  box.z = -label.location[1] + h / 2;
  box.l = l;
  box.w = w;
  box.h = h;
  box.yaw = normalize_yaw(-label.rotation_y - std::numbers::pi / 2);
  return box;
}

}  // namespace wavefuse
