#include "wavefuse/corruptions.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "wavefuse/error.hpp"
#include "wavefuse/rng.hpp"

namespace wavefuse {

namespace {

using K = CorruptionKind;

struct KindInfo {
  K kind;
  std::string_view name;
};

constexpr std::array<KindInfo, 23> kKinds = {{
    {K::none, "none"},
    {K::snow, "snow"},
    {K::rain, "rain"},
    {K::fog, "fog"},
    {K::sunlight, "sunlight"},
    {K::gauss_img, "gauss_img"},
    {K::uniform_img, "uniform_img"},
    {K::impulse_img, "impulse_img"},
    {K::motion_blur, "motion_blur"},
    {K::gauss_lidar, "gauss_lidar"},
    {K::uniform_lidar, "uniform_lidar"},
    {K::impulse_lidar, "impulse_lidar"},
    {K::density, "density"},
    {K::cutout, "cutout"},
    {K::crosstalk, "crosstalk"},
    {K::fov_lost, "fov_lost"},
    {K::local_density, "local_density"},
    {K::local_cutout, "local_cutout"},
    {K::local_gauss, "local_gauss"},
    {K::local_uniform, "local_uniform"},
    {K::local_impulse, "local_impulse"},
    {K::moving_object, "moving_object"},
    {K::compensation, "compensation"},
}};

constexpr std::array<K, 23> kKindList = [] {
  std::array<K, 23> out{};
  for (std::size_t i = 0; i < kKinds.size(); ++i) out[i] = kKinds[i].kind;
  return out;
}();

using Row = std::array<SeverityParams, 5>;

constexpr double kDeg = std::numbers::pi / 180.0;

Row table_row(K kind) {
  switch (kind) {
    case K::none:
      return {};
    case K::snow:
      return {{{0.004, 1.0, 0}, {0.008, 1.0, 0}, {0.012, 1.5, 0}, {0.016, 1.5, 0}, {0.020, 2.0, 0}}};
    case K::rain:
      return {{{0.002, 0.30, 4}, {0.004, 0.35, 6}, {0.006, 0.40, 8}, {0.008, 0.45, 10}, {0.010, 0.50, 12}}};
    case K::fog:
      return {{{0.2, 20, 0}, {0.3, 20, 0}, {0.4, 20, 0}, {0.5, 20, 0}, {0.6, 20, 0}}};
    case K::sunlight:
      return {{{20, 0.10, 0}, {35, 0.15, 0}, {50, 0.20, 0}, {65, 0.25, 0}, {80, 0.30, 0}}};
    case K::gauss_img:
      return {{{0.04 * 255, 0, 0}, {0.06 * 255, 0, 0}, {0.08 * 255, 0, 0}, {0.10 * 255, 0, 0}, {0.12 * 255, 0, 0}}};
    case K::uniform_img:
      return {{{0.08 * 255, 0, 0}, {0.12 * 255, 0, 0}, {0.16 * 255, 0, 0}, {0.20 * 255, 0, 0}, {0.24 * 255, 0, 0}}};
    case K::impulse_img:
      return {{{0.01, 0, 0}, {0.02, 0, 0}, {0.03, 0, 0}, {0.05, 0, 0}, {0.07, 0, 0}}};
    case K::motion_blur:
      return {{{0, 0, 3}, {0, 0, 5}, {0, 0, 7}, {0, 0, 9}, {0, 0, 11}}};
    case K::gauss_lidar:
    case K::uniform_lidar:
      return {{{0.02, 0, 0}, {0.04, 0, 0}, {0.06, 0, 0}, {0.08, 0, 0}, {0.10, 0, 0}}};
    case K::impulse_lidar:
      return {{{0.02, 0.4, 0}, {0.04, 0.4, 0}, {0.06, 0.4, 0}, {0.08, 0.4, 0}, {0.10, 0.4, 0}}};
    case K::density:
      return {{{0.1, 0, 0}, {0.2, 0, 0}, {0.3, 0, 0}, {0.4, 0, 0}, {0.5, 0, 0}}};
    case K::cutout:
      return {{{0, 1.0, 2}, {0, 1.25, 3}, {0, 1.5, 5}, {0, 1.75, 7}, {0, 2.0, 10}}};
    case K::crosstalk:
      return {{{0.01, 3.0, 0}, {0.02, 3.0, 0}, {0.03, 3.0, 0}, {0.04, 3.0, 0}, {0.05, 3.0, 0}}};
    case K::fov_lost:
      return {{{150, 0, 0}, {180, 0, 0}, {210, 0, 0}, {240, 0, 0}, {270, 0, 0}}};
    case K::local_density:
      return {{{0.2, 0, 0}, {0.35, 0, 0}, {0.5, 0, 0}, {0.65, 0, 0}, {0.8, 0, 0}}};
    case K::local_cutout:
      return {{{0.2, 0, 0}, {0.3, 0, 0}, {0.4, 0, 0}, {0.5, 0, 0}, {0.6, 0, 0}}};
    case K::local_gauss:
    case K::local_uniform:
      return {{{0.04, 0, 0}, {0.08, 0, 0}, {0.12, 0, 0}, {0.16, 0, 0}, {0.20, 0, 0}}};
    case K::local_impulse:
      return {{{0.1, 0.4, 0}, {0.2, 0.4, 0}, {0.3, 0.4, 0}, {0.4, 0.4, 0}, {0.5, 0.4, 0}}};
    case K::moving_object:
      return {{{0.2, 0, 0}, {0.4, 0, 0}, {0.6, 0, 0}, {0.8, 0, 0}, {1.0, 0, 0}}};
    case K::compensation:
      return {{{0.5 * kDeg, 0, 36}, {1.0 * kDeg, 0, 36}, {1.5 * kDeg, 0, 36}, {2.0 * kDeg, 0, 36}, {2.5 * kDeg, 0, 36}}};
  }
  return {};
}

double clip255(double v) { return std::clamp(v, 0.0, 255.0); }

// ---------------------------------------------------------------------------
// camera

void additive_noise(Tensor& img, CounterRng& rng, bool gaussian, double scale) {
  for (auto& v : img.data()) v = clip255(v + (gaussian ? rng.normal(0.0, scale) : rng.uniform(-scale, scale)));
}

void impulse_noise(Tensor& img, CounterRng& rng, double rate) {
  for (auto& v : img.data()) {
    const double u = rng.uniform();
    const double coin = rng.uniform();
    if (u < rate) v = coin < 0.5 ? 0.0 : 255.0;
  }
}

void blend_pixel(Tensor& img, std::size_t y, std::size_t x, double target, double alpha) {
  for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = img.at(y, x, c) * (1 - alpha) + target * alpha;
}

void snow(Tensor& img, CounterRng& rng, const SeverityParams& p) {
  const std::size_t H = img.height(), W = img.width();
  const auto flakes = static_cast<std::size_t>(std::floor(p.magnitude * static_cast<double>(H * W)));
  const double r = p.extent;
  const auto reach = static_cast<long>(std::ceil(r));
  for (std::size_t f = 0; f < flakes; ++f) {
    const double cy = rng.uniform(0.0, static_cast<double>(H));
    const double cx = rng.uniform(0.0, static_cast<double>(W));
    const long iy = static_cast<long>(cy), ix = static_cast<long>(cx);
    for (long dy = -reach; dy <= reach; ++dy) {
      for (long dx = -reach; dx <= reach; ++dx) {
        const long y = iy + dy, x = ix + dx;
        if (y < 0 || x < 0 || y >= static_cast<long>(H) || x >= static_cast<long>(W)) continue;
        if (static_cast<double>(dy * dy + dx * dx) > r * r) continue;
        blend_pixel(img, static_cast<std::size_t>(y), static_cast<std::size_t>(x), 250.0, 0.8);
      }
    }
  }
}

void rain(Tensor& img, CounterRng& rng, const SeverityParams& p) {
  const std::size_t H = img.height(), W = img.width();
  const auto streaks = static_cast<std::size_t>(std::floor(p.magnitude * static_cast<double>(H * W)));
  // One wind slant per image.
  const double slant = rng.uniform(-0.4, 0.4);
  for (std::size_t s = 0; s < streaks; ++s) {
    const double y0 = rng.uniform(0.0, static_cast<double>(H));
    const double x0 = rng.uniform(0.0, static_cast<double>(W));
    for (int t = 0; t < p.count; ++t) {
      const long y = static_cast<long>(y0 + t);
      const long x = static_cast<long>(std::floor(x0 + slant * t));
      if (y < 0 || x < 0 || y >= static_cast<long>(H) || x >= static_cast<long>(W)) continue;
      blend_pixel(img, static_cast<std::size_t>(y), static_cast<std::size_t>(x), 200.0, p.extent);
    }
  }
}

void fog(Tensor& img, const SeverityParams& p, const SparseDepthMap* depth) {
  const double base_t = 1.0 - p.magnitude;
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      double t = base_t;
      if (depth && depth->valid(y, x)) t = std::pow(base_t, depth->depth(y, x) / p.extent);
      for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = clip255(img.at(y, x, c) * t + 255.0 * (1.0 - t));
    }
  }
}

void sunlight(Tensor& img, CounterRng& rng, const SeverityParams& p) {
  const double H = static_cast<double>(img.height()), W = static_cast<double>(img.width());
  const double gain = 1.0 + p.magnitude / 255.0;
  const double cy = rng.uniform(0.0, H / 2);
  const double cx = rng.uniform(0.0, W);
  const double sigma = p.extent * W;
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
      const double glare = 2.0 * p.magnitude * std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = clip255(img.at(y, x, c) * gain + p.magnitude + glare);
    }
  }
}

// Horizontal box filter, edge-clamped.
Tensor motion_blur(const Tensor& img, int length) {
  Tensor out(img.dims());
  const long half = length / 2;
  const long W = static_cast<long>(img.width());
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (long x = 0; x < W; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (long k = -half; k <= half; ++k) {
          const long xx = std::clamp(x + k, 0L, W - 1);
          acc += img.at(y, static_cast<std::size_t>(xx), c);
        }
        out.at(y, static_cast<std::size_t>(x), c) = clip255(acc / static_cast<double>(2 * half + 1));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// LiDAR

std::vector<std::size_t> shuffled_indices(std::size_t n, CounterRng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  shuffle(std::span<std::size_t>(idx), rng);
  return idx;
}

std::size_t exact_count(std::size_t n, double rate) {
  return std::min(n, static_cast<std::size_t>(std::floor(static_cast<double>(n) * rate)));
}

RawPointCloud keep_unmarked(const RawPointCloud& cloud, const std::vector<char>& removed) {
  RawPointCloud out;
  out.points.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (!removed[i]) out.points.push_back(cloud.points[i]);
  return out;
}

/// Applies coordinate noise to the listed points, drawing in list order.
void jitter(RawPointCloud& cloud, std::span<const std::size_t> which, CounterRng& rng, K base,
            const SeverityParams& p) {
  for (std::size_t i : which) {
    auto& pt = cloud.points[i];
    double* coords[3] = {&pt.x, &pt.y, &pt.z};
    for (double* c : coords) {
      switch (base) {
        case K::gauss_lidar:
          *c += rng.normal(0.0, p.magnitude);
          break;
        case K::uniform_lidar:
          *c += rng.uniform(-p.magnitude, p.magnitude);
          break;
        default:  // impulse
          *c += rng.uniform() < 0.5 ? -p.extent : p.extent;
          break;
      }
    }
  }
}

std::vector<std::size_t> in_box_indices(const RawPointCloud& cloud, std::span<const Box3D> boxes) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (const auto& b : boxes) {
      if (point_in_box(cloud.points[i], b)) {
        idx.push_back(i);
        break;
      }
    }
  }
  return idx;
}

RawPointCloud drop_fraction(const RawPointCloud& cloud, std::span<const std::size_t> candidates,
                            double rate, CounterRng& rng) {
  std::vector<std::size_t> order(candidates.begin(), candidates.end());
  shuffle(std::span<std::size_t>(order), rng);
  std::vector<char> removed(cloud.size(), 0);
  const std::size_t k = exact_count(order.size(), rate);
  for (std::size_t i = 0; i < k; ++i) removed[order[i]] = 1;
  return keep_unmarked(cloud, removed);
}

double dist2(const LidarPoint& a, const LidarPoint& b) {
  return (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z);
}

}  // namespace

std::span<const CorruptionKind> all_corruption_kinds() { return kKindList; }

std::string_view kind_name(CorruptionKind kind) {
  for (const auto& k : kKinds)
    if (k.kind == kind) return k.name;
  return "unknown";
}

CorruptionKind parse_kind(std::string_view name) {
  for (const auto& k : kKinds)
    if (k.name == name) return k.kind;
  throw InputError("unknown corruption kind '" + std::string(name) + "'");
}

bool is_image_kind(CorruptionKind kind) {
  switch (kind) {
    case K::snow:
    case K::rain:
    case K::fog:
    case K::sunlight:
    case K::gauss_img:
    case K::uniform_img:
    case K::impulse_img:
    case K::motion_blur:
      return true;
    default:
      return false;
  }
}

bool is_lidar_kind(CorruptionKind kind) { return kind != K::none && !is_image_kind(kind); }

bool requires_boxes(CorruptionKind kind) {
  switch (kind) {
    case K::local_density:
    case K::local_cutout:
    case K::local_gauss:
    case K::local_uniform:
    case K::local_impulse:
    case K::moving_object:
      return true;
    default:
      return false;
  }
}

std::string CorruptionSpec::to_string() const {
  return std::string(kind_name(kind)) + ":" + std::to_string(severity) + ":" + std::to_string(seed);
}

CorruptionSpec CorruptionSpec::parse(std::string_view text) {
  const auto a = text.find(':');
  const auto b = a == std::string_view::npos ? a : text.find(':', a + 1);
  if (a == std::string_view::npos || b == std::string_view::npos) {
    throw InputError("corruption spec '" + std::string(text) + "' is not kind:severity:seed");
  }
  CorruptionSpec spec;
  spec.kind = parse_kind(text.substr(0, a));
  const auto sev = text.substr(a + 1, b - a - 1);
  const auto seed = text.substr(b + 1);
  auto r1 = std::from_chars(sev.data(), sev.data() + sev.size(), spec.severity);
  auto r2 = std::from_chars(seed.data(), seed.data() + seed.size(), spec.seed);
  if (r1.ec != std::errc() || r1.ptr != sev.data() + sev.size() || r2.ec != std::errc() ||
      r2.ptr != seed.data() + seed.size() || sev.empty() || seed.empty()) {
    throw InputError("corruption spec '" + std::string(text) + "' has a malformed severity or seed");
  }
  if (spec.severity < 1 || spec.severity > 5) {
    throw InputError("corruption severity must be in [1, 5], got " + std::to_string(spec.severity));
  }
  return spec;
}

SeverityParams severity_params(CorruptionKind kind, int severity) {
  if (severity < 1 || severity > 5) {
    throw InputError("corruption severity must be in [1, 5], got " + std::to_string(severity));
  }
  return table_row(kind)[static_cast<std::size_t>(severity - 1)];
}

bool point_in_box(const LidarPoint& p, const Box3D& box) {
  const double dx = p.x - box.x, dy = p.y - box.y;
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const double along = c * dx + s * dy;
  const double across = -s * dx + c * dy;
  return std::abs(along) <= box.l / 2 && std::abs(across) <= box.w / 2 &&
         std::abs(p.z - box.z) <= box.h / 2;
}

Tensor corrupt_image(const Tensor& img, const CorruptionSpec& spec, const SparseDepthMap* depth) {
  require_rank(img, 3, "corrupt_image");
  if (img.channels() != 3) throw ShapeError("corrupt_image: expected H x W x 3, got " + shape_string(img.dims()));
  if (is_lidar_kind(spec.kind)) {
    throw KindError("corrupt_image: '" + std::string(kind_name(spec.kind)) + "' is a LiDAR corruption");
  }
  const SeverityParams p = severity_params(spec.kind, spec.severity);
  if (spec.kind == K::none) return img;
  if (depth && (depth->height() != img.height() || depth->width() != img.width())) {
    throw ShapeError("corrupt_image: depth map size does not match the image");
  }
  CounterRng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(spec.kind)));
  Tensor out = img;
  switch (spec.kind) {
    case K::snow:
      snow(out, rng, p);
      break;
    case K::rain:
      rain(out, rng, p);
      break;
    case K::fog:
      fog(out, p, depth);
      break;
    case K::sunlight:
      sunlight(out, rng, p);
      break;
    case K::gauss_img:
      additive_noise(out, rng, true, p.magnitude);
      break;
    case K::uniform_img:
      additive_noise(out, rng, false, p.magnitude);
      break;
    case K::impulse_img:
      impulse_noise(out, rng, p.magnitude);
      break;
    case K::motion_blur:
      out = motion_blur(img, p.count);
      break;
    default:
      break;
  }
  return out;
}

RawPointCloud corrupt_lidar(const RawPointCloud& cloud, const CorruptionSpec& spec,
                            std::optional<std::span<const Box3D>> boxes) {
  if (is_image_kind(spec.kind)) {
    throw KindError("corrupt_lidar: '" + std::string(kind_name(spec.kind)) + "' is a camera corruption");
  }
  const SeverityParams p = severity_params(spec.kind, spec.severity);
  if (spec.kind == K::none) return cloud;
  if (requires_boxes(spec.kind) && !boxes) {
    throw InputError("corrupt_lidar: '" + std::string(kind_name(spec.kind)) + "' needs object boxes");
  }
  CounterRng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(spec.kind)));
  const std::size_t N = cloud.size();

  switch (spec.kind) {
    case K::gauss_lidar:
    case K::uniform_lidar: {
      RawPointCloud out = cloud;
      std::vector<std::size_t> all(N);
      std::iota(all.begin(), all.end(), std::size_t{0});
      jitter(out, all, rng, spec.kind, p);
      return out;
    }
    case K::impulse_lidar: {
      RawPointCloud out = cloud;
      auto order = shuffled_indices(N, rng);
      order.resize(exact_count(N, p.magnitude));
      jitter(out, order, rng, K::impulse_lidar, p);
      return out;
    }
    case K::density: {
      std::vector<std::size_t> all(N);
      std::iota(all.begin(), all.end(), std::size_t{0});
      return drop_fraction(cloud, all, p.magnitude, rng);
    }
    case K::cutout: {
      std::vector<char> removed(N, 0);
      if (N == 0) return cloud;
      for (int s = 0; s < p.count; ++s) {
        const LidarPoint centre = cloud.points[rng.index(N)];
        for (std::size_t i = 0; i < N; ++i)
          if (dist2(cloud.points[i], centre) <= p.extent * p.extent) removed[i] = 1;
      }
      return keep_unmarked(cloud, removed);
    }
    case K::crosstalk: {
      RawPointCloud out = cloud;
      auto order = shuffled_indices(N, rng);
      order.resize(exact_count(N, p.magnitude));
      for (std::size_t i : order) {
        auto& pt = out.points[i];
        pt.x += rng.normal(0.0, p.extent);
        pt.y += rng.normal(0.0, p.extent);
        pt.z += rng.normal(0.0, p.extent);
      }
      return out;
    }
    case K::fov_lost: {
      const double half_keep = (360.0 - p.magnitude) / 2.0 * kDeg;
      RawPointCloud out;
      for (const auto& pt : cloud.points)
        if (std::abs(std::atan2(pt.y, pt.x)) <= half_keep) out.points.push_back(pt);
      return out;
    }
    case K::local_density:
      return drop_fraction(cloud, in_box_indices(cloud, *boxes), p.magnitude, rng);
    case K::local_cutout: {
      std::vector<char> removed(N, 0);
      for (const auto& box : *boxes) {
        const Box3D one[] = {box};
        auto inside = in_box_indices(cloud, one);
        if (inside.empty()) continue;
        const LidarPoint centre = cloud.points[inside[rng.index(inside.size())]];
        std::stable_sort(inside.begin(), inside.end(), [&](std::size_t a, std::size_t b) {
          return dist2(cloud.points[a], centre) < dist2(cloud.points[b], centre);
        });
        const std::size_t k = exact_count(inside.size(), p.magnitude);
        for (std::size_t i = 0; i < k; ++i) removed[inside[i]] = 1;
      }
      return keep_unmarked(cloud, removed);
    }
    case K::local_gauss:
    case K::local_uniform: {
      RawPointCloud out = cloud;
      const auto inside = in_box_indices(cloud, *boxes);
      jitter(out, inside, rng, spec.kind == K::local_gauss ? K::gauss_lidar : K::uniform_lidar, p);
      return out;
    }
    case K::local_impulse: {
      RawPointCloud out = cloud;
      auto inside = in_box_indices(cloud, *boxes);
      shuffle(std::span<std::size_t>(inside), rng);
      inside.resize(exact_count(inside.size(), p.magnitude));
      jitter(out, inside, rng, K::impulse_lidar, p);
      return out;
    }
    case K::moving_object: {
      RawPointCloud out = cloud;
      for (const auto& box : *boxes) {
        const double dx = p.magnitude * std::cos(box.yaw), dy = p.magnitude * std::sin(box.yaw);
        for (std::size_t i = 0; i < N; ++i) {
          if (!point_in_box(cloud.points[i], box)) continue;
          out.points[i].x = cloud.points[i].x + dx;
          out.points[i].y = cloud.points[i].y + dy;
        }
      }
      return out;
    }
    case K::compensation: {
      // Each azimuth sector gets a fixed fraction of the maximum rotation error.
      std::vector<double> sector_error(static_cast<std::size_t>(p.count));
      for (auto& e : sector_error) e = p.magnitude * rng.uniform(-1.0, 1.0);
      RawPointCloud out = cloud;
      for (auto& pt : out.points) {
        const double az = std::atan2(pt.y, pt.x);
        auto sector = static_cast<std::size_t>((az + std::numbers::pi) / (2 * std::numbers::pi) *
                                               static_cast<double>(p.count));
        sector = std::min(sector, sector_error.size() - 1);
        const double th = sector_error[sector];
        const double c = std::cos(th), s = std::sin(th);
        const double x = pt.x, y = pt.y;
        pt.x = c * x - s * y;
        pt.y = s * x + c * y;
      }
      return out;
    }
    default:
      return cloud;
  }
}

}  // namespace wavefuse
