#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "wavefuse/geometry.hpp"
#include "wavefuse/kitti_io.hpp"
#include "wavefuse/tensor.hpp"

namespace wavefuse {

enum class CorruptionKind {
  none,
  // camera
  snow,
  rain,
  fog,
  sunlight,
  gauss_img,
  uniform_img,
  impulse_img,
  motion_blur,
  // LiDAR
  gauss_lidar,
  uniform_lidar,
  impulse_lidar,
  density,
  cutout,
  crosstalk,
  fov_lost,
  local_density,
  local_cutout,
  local_gauss,
  local_uniform,
  local_impulse,
  moving_object,
  compensation,
};

std::span<const CorruptionKind> all_corruption_kinds();
std::string_view kind_name(CorruptionKind kind);
/// Throws InputError for unknown names.
CorruptionKind parse_kind(std::string_view name);

bool is_image_kind(CorruptionKind kind);
bool is_lidar_kind(CorruptionKind kind);
/// Kinds that only act on points inside object boxes.
bool requires_boxes(CorruptionKind kind);

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::none;
  int severity = 1;
  std::uint64_t seed = 0;

  /// "kind:severity:seed", e.g. "fog:3:42".
  std::string to_string() const;
  static CorruptionSpec parse(std::string_view text);

  bool operator==(const CorruptionSpec&) const = default;
};

/// One row of the severity table. Field meaning depends on the kind:
///
///   kind           magnitude                    extent               count
///   snow           flake density (per pixel)    flake radius px      -
///   rain           streak density (per pixel)   blend weight         streak length px
///   fog            opacity at 20 m (1 - t)      reference depth m    -
///   sunlight       brightness offset            glare sigma / width  -
///   gauss_img      sigma (0..255 scale)         -                    -
///   uniform_img    half-width (0..255 scale)    -                    -
///   impulse_img    salt-and-pepper rate         -                    -
///   motion_blur    -                            -                    kernel length px
///   *gauss lidar   sigma m                      -                    -
///   *uniform lidar half-width m                 -                    -
///   *impulse lidar fraction of points           offset m             -
///   density        drop fraction                -                    -
///   cutout         -                            sphere radius m      spheres
///   crosstalk      fraction of points           jitter sigma m       -
///   fov_lost       lost azimuth degrees         -                    -
///   local_density  in-box drop fraction         -                    -
///   local_cutout   in-box removed fraction      -                    -
///   moving_object  displacement m               -                    -
///   compensation   max sector rotation rad      -                    sectors
///
/// Every field is non-decreasing in severity.
struct SeverityParams {
  double magnitude = 0.0;
  double extent = 0.0;
  int count = 0;
};

/// Throws InputError when severity is outside [1, 5].
SeverityParams severity_params(CorruptionKind kind, int severity);

/// img is H x W x 3 in [0, 255]. `depth` (same H x W) makes fog
/// depth-weighted. Throws KindError for LiDAR kinds.
Tensor corrupt_image(const Tensor& img, const CorruptionSpec& spec,
                     const SparseDepthMap* depth = nullptr);

/// `boxes` must be present for requires_boxes() kinds (an empty list is
/// fine). Throws KindError for camera kinds.
RawPointCloud corrupt_lidar(const RawPointCloud& cloud, const CorruptionSpec& spec,
                            std::optional<std::span<const Box3D>> boxes = std::nullopt);

/// True when the point lies inside the oriented box (faces inclusive).
bool point_in_box(const LidarPoint& p, const Box3D& box);

}  // namespace wavefuse
