#include "wavefuse/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>
#include <utility>

#include "wavefuse/error.hpp"
#include "wavefuse/rng.hpp"

namespace wavefuse {

namespace {

constexpr std::uint64_t kPipelineTag = 0x70697065;  // "pipe"
constexpr std::uint64_t kSceneTag = 0x7363656e;     // "scen"
constexpr std::uint64_t kCorruptTag = 0x636f7272;   // "corr"
constexpr std::uint64_t kImageTag = 0x696d6167;     // "imag"

// ---------------------------------------------------------------------------
// config text

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = value.find(',', start);
    out.push_back(trim(std::string_view(value).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw FormatError("expected a number, got '" + s + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError("expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename T, typename F>
std::string join(const std::vector<T>& values, F&& to_text) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += to_text(values[i]);
  }
  return out;
}

struct Field {
  std::function<void(BenchConfig&, const std::string&)> set;
  std::function<std::string(const BenchConfig&)> get;
};

Field real(double BenchConfig::*member) {
  return {[member](BenchConfig& c, const std::string& v) { c.*member = parse_double(v); },
          [member](const BenchConfig& c) { return fmt(c.*member); }};
}

Field count(std::size_t BenchConfig::*member) {
  return {[member](BenchConfig& c, const std::string& v) { c.*member = parse_u64(v); },
          [member](const BenchConfig& c) { return std::to_string(c.*member); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"seed",
       {[](BenchConfig& c, const std::string& v) { c.seed = parse_u64(v); },
        [](const BenchConfig& c) { return std::to_string(c.seed); }}},
      {"scenes", count(&BenchConfig::scenes)},
      {"objects_min", count(&BenchConfig::objects_min)},
      {"objects_max", count(&BenchConfig::objects_max)},
      {"kinds",
       {[](BenchConfig& c, const std::string& v) {
          c.kinds.clear();
          for (const auto& name : split_list(v)) {
            try {
              c.kinds.push_back(parse_kind(name));
            } catch (const InputError& e) {
              throw FormatError(e.what());
            }
          }
        },
        [](const BenchConfig& c) {
          return join(c.kinds, [](CorruptionKind k) { return std::string(kind_name(k)); });
        }}},
      {"severities",
       {[](BenchConfig& c, const std::string& v) {
          c.severities.clear();
          for (const auto& s : split_list(v)) c.severities.push_back(static_cast<int>(parse_u64(s)));
        },
        [](const BenchConfig& c) { return join(c.severities, [](int s) { return std::to_string(s); }); }}},
      {"image_height", count(&BenchConfig::image_height)},
      {"image_width", count(&BenchConfig::image_width)},
      {"x_min", real(&BenchConfig::x_min)},
      {"x_max", real(&BenchConfig::x_max)},
      {"y_min", real(&BenchConfig::y_min)},
      {"y_max", real(&BenchConfig::y_max)},
      {"z_min", real(&BenchConfig::z_min)},
      {"z_max", real(&BenchConfig::z_max)},
      {"cell_size", real(&BenchConfig::cell_size)},
      {"anchor",
       {[](BenchConfig& c, const std::string& v) {
          const auto parts = split_list(v);
          if (parts.size() != 3) throw FormatError("anchor needs three values: l, w, h");
          for (std::size_t i = 0; i < 3; ++i) c.anchor[i] = parse_double(parts[i]);
        },
        [](const BenchConfig& c) {
          return fmt(c.anchor[0]) + "," + fmt(c.anchor[1]) + "," + fmt(c.anchor[2]);
        }}},
      {"place_x_min", real(&BenchConfig::place_x_min)},
      {"place_x_max", real(&BenchConfig::place_x_max)},
      {"min_separation", real(&BenchConfig::min_separation)},
      {"surface_density", real(&BenchConfig::surface_density)},
      {"reference_range", real(&BenchConfig::reference_range)},
      {"ground_points", count(&BenchConfig::ground_points)},
      {"ground_z", real(&BenchConfig::ground_z)},
      {"ground_clearance", real(&BenchConfig::ground_clearance)},
      {"count_radius", real(&BenchConfig::count_radius)},
      {"count_scale", real(&BenchConfig::count_scale)},
      {"score_threshold", real(&BenchConfig::score_threshold)},
      {"peak_radius", real(&BenchConfig::peak_radius)},
      {"cluster_radius", real(&BenchConfig::cluster_radius)},
      {"nms_threshold", real(&BenchConfig::nms_threshold)},
      {"max_detections", count(&BenchConfig::max_detections)},
      {"readout_gain", real(&BenchConfig::readout_gain)},
      {"iou_threshold", real(&BenchConfig::iou_threshold)},
      {"iou_kind",
       {[](BenchConfig& c, const std::string& v) {
          if (v == "bev") c.iou_kind = IouKind::bev;
          else if (v == "3d") c.iou_kind = IouKind::box3d;
          else throw FormatError("iou_kind must be bev or 3d, got '" + v + "'");
        },
        [](const BenchConfig& c) { return std::string(c.iou_kind == IouKind::bev ? "bev" : "3d"); }}},
      {"rce_unit",
       {[](BenchConfig& c, const std::string& v) {
          if (v == "percent") c.rce_unit = RceUnit::percent;
          else if (v == "fraction") c.rce_unit = RceUnit::fraction;
          else throw FormatError("rce_unit must be percent or fraction, got '" + v + "'");
        },
        [](const BenchConfig& c) {
          return std::string(c.rce_unit == RceUnit::percent ? "percent" : "fraction");
        }}},
      {"output_dir",
       {[](BenchConfig& c, const std::string& v) { c.output_dir = v; },
        [](const BenchConfig& c) { return c.output_dir; }}},
  };
  return table;
}

// ---------------------------------------------------------------------------
// scene helpers

std::array<std::array<double, 3>, 8> box_corners(const Box3D& b) {
  std::array<std::array<double, 3>, 8> out{};
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  std::size_t i = 0;
  for (double dx : {-0.5, 0.5})
    for (double dy : {-0.5, 0.5})
      for (double dz : {-0.5, 0.5}) {
        const double lx = dx * b.l, ly = dy * b.w;
        out[i++] = {b.x + c * lx - s * ly, b.y + s * lx + c * ly, b.z + dz * b.h};
      }
  return out;
}

void sample_box_surface(const Box3D& b, double density, CounterRng& rng, RawPointCloud& cloud) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  auto emit = [&](double lx, double ly, double lz) {
    cloud.points.push_back({b.x + c * lx - s * ly, b.y + s * lx + c * ly, b.z + lz, rng.uniform(0.3, 0.9)});
  };
  auto count_for = [&](double area) {
    return static_cast<std::size_t>(std::floor(area * density + rng.uniform()));
  };
  const double hl = b.l / 2, hw = b.w / 2, hh = b.h / 2;
  // Top, two sides, front and back; the underside faces the ground.
  for (std::size_t n = count_for(b.l * b.w); n > 0; --n) emit(rng.uniform(-hl, hl), rng.uniform(-hw, hw), hh);
  for (double side : {-1.0, 1.0}) {
    for (std::size_t n = count_for(b.l * b.h); n > 0; --n)
      emit(rng.uniform(-hl, hl), side * hw, rng.uniform(-hh, hh));
    for (std::size_t n = count_for(b.w * b.h); n > 0; --n)
      emit(side * hl, rng.uniform(-hw, hw), rng.uniform(-hh, hh));
  }
}

Tensor render_image(const std::vector<Box3D>& boxes, const CalibrationSet& calib, std::size_t height,
                    std::size_t width, std::uint64_t seed) {
  Tensor img({height, width, 3});
  CounterRng rng(seed);
  const double horizon = calib.p2[1][2];
  for (std::size_t v = 0; v < height; ++v) {
    for (std::size_t u = 0; u < width; ++u) {
      const double noise = std::round(rng.uniform(-8.0, 8.0));
      const bool sky = static_cast<double>(v) < horizon;
      const double base = sky ? 150.0 + 40.0 * (1.0 - static_cast<double>(v) / horizon) : 85.0;
      img.at(v, u, 0) = base + noise - (sky ? 20.0 : 0.0);
      img.at(v, u, 1) = base + noise - (sky ? 5.0 : 0.0);
      img.at(v, u, 2) = base + noise + (sky ? 15.0 : 0.0);
    }
  }

  // Far to near so nearer boxes overwrite.
  std::vector<std::size_t> order(boxes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::hypot(boxes[a].x, boxes[a].y) > std::hypot(boxes[b].x, boxes[b].y);
  });
  for (std::size_t k : order) {
    double u0 = 1e18, v0 = 1e18, u1 = -1e18, v1 = -1e18;
    bool visible = true;
    for (const auto& p : box_corners(boxes[k])) {
      const auto px = project_to_image(calib, p[0], p[1], p[2]);
      if (!px) {
        visible = false;
        break;
      }
      u0 = std::min(u0, px->u), u1 = std::max(u1, px->u);
      v0 = std::min(v0, px->v), v1 = std::max(v1, px->v);
    }
    if (!visible) continue;
    const double shade = 235.0 - static_cast<double>((k * 47) % 180);
    const long cu0 = std::max(0L, round_half_down(u0)), cu1 = std::min<long>(width - 1, round_half_down(u1));
    const long cv0 = std::max(0L, round_half_down(v0)), cv1 = std::min<long>(height - 1, round_half_down(v1));
    for (long v = cv0; v <= cv1; ++v) {
      for (long u = cu0; u <= cu1; ++u) {
        img.at(v, u, 0) = shade;
        img.at(v, u, 1) = std::round(shade * 0.85);
        img.at(v, u, 2) = std::round(shade * 0.7);
      }
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// detector helpers

using Key = std::pair<long, long>;

/// Uniform 2-D bucket index over points for radius queries.
class BucketIndex {
 public:
  BucketIndex(std::vector<Vec2> points, double bucket) : points_(std::move(points)), bucket_(bucket) {
    for (std::size_t i = 0; i < points_.size(); ++i) buckets_[key(points_[i])].push_back(i);
  }

  template <typename F>
  void for_each_within(Vec2 c, double radius, F&& fn) const {
    const long reach = static_cast<long>(std::ceil(radius / bucket_));
    const Key k = key(c);
    const double r2 = radius * radius;
    for (long dx = -reach; dx <= reach; ++dx) {
      for (long dy = -reach; dy <= reach; ++dy) {
        const auto it = buckets_.find({k.first + dx, k.second + dy});
        if (it == buckets_.end()) continue;
        for (std::size_t i : it->second) {
          const double ex = points_[i].x - c.x, ey = points_[i].y - c.y;
          if (ex * ex + ey * ey <= r2) fn(i);
        }
      }
    }
  }

  const Vec2& operator[](std::size_t i) const { return points_[i]; }

 private:
  Key key(Vec2 p) const {
    return {static_cast<long>(std::floor(p.x / bucket_)), static_cast<long>(std::floor(p.y / bucket_))};
  }

  std::vector<Vec2> points_;
  double bucket_;
  std::map<Key, std::vector<std::size_t>> buckets_;
};

struct CellStat {
  std::size_t count = 0;
  double z_max = -1e300;
  double z_sum = 0.0;
};

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

// ---------------------------------------------------------------------------
// BenchConfig

void BenchConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw InputError("bench config: " + what);
  };
  require(scenes >= 1, "scenes must be >= 1");
  require(objects_min <= objects_max, "objects_min must not exceed objects_max");
  require(!kinds.empty(), "kinds must not be empty");
  require(!severities.empty(), "severities must not be empty");
  for (int s : severities) require(s >= 1 && s <= 5, "severities must be in 1..5");
  require(image_height > 0 && image_width > 0 && image_height % 32 == 0 && image_width % 32 == 0,
          "image size must be a positive multiple of 32");
  require(x_min < x_max && y_min < y_max && z_min < z_max, "crop ranges must be non-empty");
  require(cell_size > 0.0, "cell_size must be positive");
  require(anchor[0] > 0 && anchor[1] > 0 && anchor[2] > 0, "anchor sizes must be positive");
  require(place_x_min > 0.0 && place_x_min < place_x_max, "placement range must be non-empty and ahead");
  require(place_x_min >= x_min && place_x_max <= x_max, "placement range must lie inside the crop");
  require(ground_z - 0.0 >= z_min && ground_z + anchor[2] <= z_max, "objects must fit the z crop");
  require(min_separation > 0.0, "min_separation must be positive");
  require(surface_density >= 0.0 && reference_range > 0.0, "point density must be non-negative");
  require(count_radius > 0 && count_scale > 0 && peak_radius > 0 && cluster_radius > 0,
          "detector radii must be positive");
  require(score_threshold >= 0.0 && score_threshold <= 1.0, "score_threshold must be in [0, 1]");
  require(nms_threshold >= 0.0 && nms_threshold <= 1.0, "nms_threshold must be in [0, 1]");
  require(iou_threshold > 0.0 && iou_threshold <= 1.0, "iou_threshold must be in (0, 1]");
  require(max_detections >= 1, "max_detections must be >= 1");
}

BenchConfig BenchConfig::parse(const std::string& text) {
  BenchConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw FormatError(where + "expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    const auto it = fields().find(key);
    if (it == fields().end()) throw FormatError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw FormatError(where + "duplicate key '" + key + "'");
    try {
      it->second.set(cfg, value);
    } catch (const FormatError& e) {
      throw FormatError(where + key + ": " + e.what());
    }
  }
  return cfg;
}

std::string BenchConfig::to_text() const {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(*this) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// scenes

CalibrationSet synthetic_calibration(std::size_t height, std::size_t width) {
  CalibrationSet calib;
  const double f = static_cast<double>(width) / 2.0;
  const double cx = (static_cast<double>(width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(height) - 1.0) / 2.0;
  calib.p2 = {{{f, 0, cx, 0}, {0, f, cy, 0}, {0, 0, 1, 0}}};
  calib.r0_rect = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  // LiDAR (forward, left, up) -> camera (right, down, forward).
  calib.tr_velo_to_cam = {{{0, -1, 0, 0}, {0, 0, -1, 0}, {1, 0, 0, 0}}};
  return calib;
}

SyntheticScene synth_scene(std::uint64_t seed, const BenchConfig& cfg) {
  cfg.validate();
  SyntheticScene scene;
  scene.calib = synthetic_calibration(cfg.image_height, cfg.image_width);
  CounterRng rng(seed);

  const std::size_t n = cfg.objects_min + rng.index(cfg.objects_max - cfg.objects_min + 1);
  const double half_diag = std::hypot(cfg.anchor[0], cfg.anchor[1]) / 2.0;
  std::size_t attempts = 0;
  while (scene.gt_boxes.size() < n) {
    if (++attempts > 1000) {
      throw GenerationError("synth_scene: could not place " + std::to_string(n) +
                            " separated objects in 1000 attempts");
    }
    Box3D b;
    b.l = cfg.anchor[0], b.w = cfg.anchor[1], b.h = cfg.anchor[2];
    b.x = rng.uniform(cfg.place_x_min, cfg.place_x_max);
    // Keep the whole footprint inside the 90 degree frustum and the crop.
    const double lateral = std::min({0.8 * b.x - half_diag, cfg.y_max - half_diag, -cfg.y_min - half_diag});
    b.y = lateral > 0.0 ? rng.uniform(-lateral, lateral) : 0.0;
    b.z = cfg.ground_z + b.h / 2.0;
    b.yaw = normalize_yaw(rng.uniform(-std::numbers::pi, std::numbers::pi));
    if (b.x + half_diag > cfg.x_max) continue;
    bool clear = true;
    for (const auto& o : scene.gt_boxes) clear = clear && std::hypot(o.x - b.x, o.y - b.y) >= cfg.min_separation;
    if (clear) scene.gt_boxes.push_back(b);
  }

  for (const auto& b : scene.gt_boxes) {
    const double range = std::hypot(b.x, b.y);
    const double falloff = std::min(1.0, std::pow(cfg.reference_range / range, 2));
    sample_box_surface(b, cfg.surface_density * falloff, rng, scene.cloud);
  }
  for (std::size_t i = 0; i < cfg.ground_points; ++i) {
    const double x = rng.uniform(cfg.x_min, cfg.x_max);
    const double y = rng.uniform(cfg.y_min, cfg.y_max);
    const double z = cfg.ground_z + rng.normal(0.0, 0.02);
    scene.cloud.points.push_back({x, y, z, rng.uniform(0.05, 0.25)});
  }

  scene.image = render_image(scene.gt_boxes, scene.calib, cfg.image_height, cfg.image_width,
                             derive_seed(seed, kImageTag));
  return scene;
}

// ---------------------------------------------------------------------------
// pipeline

PipelineParams PipelineParams::create(std::uint64_t seed) {
  PipelineParams p;
  p.encoder = EncoderParams::random(EncoderConfig{}, derive_seed(seed, 1));
  p.pyramid = PyramidParams::random(PyramidConfig{}, derive_seed(seed, 2));
  p.dgwa = DgwaParams::random(DgwaConfig{}, derive_seed(seed, 3));
  p.fusion = FusionParams::random(FusionConfig{}, derive_seed(seed, 4));
  CounterRng rng(derive_seed(seed, 5));
  p.readout = LinearMap::random(p.fusion.config.output_dim, 1, rng);
  return p;
}

Tensor image_features(const Tensor& image, const PipelineParams& params) {
  const auto embedding = encode_stub(image, params.encoder);
  return merge_pyramid(build_pyramid(embedding, params.pyramid), params.pyramid);
}

Tensor dgwa_features(const Tensor& f_i, const RawPointCloud& cloud, const CalibrationSet& calib,
                     std::size_t height, std::size_t width, const PipelineParams& params) {
  const auto depth = project_points(cloud, calib, height, width);
  const auto guided = depth_guide(f_i, depth_encode(depth, params.dgwa), params.dgwa);
  return dgwa_forward(guided, params.dgwa);
}

std::vector<Detection> detect_from_features(const RawPointCloud& cloud, const CalibrationSet& calib,
                                            const Tensor& f_out, const PipelineParams& params,
                                            const BenchConfig& cfg) {
  // BEV occupancy / height raster over the crop.
  std::map<Key, CellStat> grid;
  std::vector<Vec2> raised;
  const double clearance = cfg.ground_z + cfg.ground_clearance;
  for (const auto& p : cloud.points) {
    if (!(p.x >= cfg.x_min && p.x < cfg.x_max && p.y >= cfg.y_min && p.y < cfg.y_max && p.z >= cfg.z_min &&
          p.z < cfg.z_max)) {
      continue;
    }
    auto& cell = grid[{static_cast<long>(std::floor((p.x - cfg.x_min) / cfg.cell_size)),
                       static_cast<long>(std::floor((p.y - cfg.y_min) / cfg.cell_size))}];
    ++cell.count;
    cell.z_max = std::max(cell.z_max, p.z);
    cell.z_sum += p.z;
    if (p.z > clearance) raised.push_back({p.x, p.y});
  }
  if (raised.empty()) return {};

  // Candidate cells: occupied and reaching above the ground band.
  std::vector<Vec2> cell_xy;
  std::vector<CellCenter> centers;
  std::vector<CellStat> stats;
  for (const auto& [key, cell] : grid) {
    if (cell.z_max <= clearance) continue;
    const Vec2 c{cfg.x_min + (static_cast<double>(key.first) + 0.5) * cfg.cell_size,
                 cfg.y_min + (static_cast<double>(key.second) + 0.5) * cfg.cell_size};
    cell_xy.push_back(c);
    centers.push_back({c.x, c.y, cell.z_max});
    stats.push_back(cell);
  }
  const std::size_t m = centers.size();
  const double bucket = std::max({cfg.count_radius, cfg.peak_radius, cfg.cluster_radius});
  const BucketIndex points(raised, bucket);
  const BucketIndex cells(cell_xy, bucket);

  FusionCellBatch batch;
  batch.lidar_feats = Tensor({m, params.fusion.config.lidar_dim});
  std::vector<double> neighbour_density(m);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t near = 0;
    points.for_each_within(cell_xy[i], cfg.count_radius, [&](std::size_t) { ++near; });
    neighbour_density[i] = static_cast<double>(near) / cfg.count_scale;
    const double feats[8] = {static_cast<double>(stats[i].count) / 4.0,
                             (stats[i].z_max - cfg.ground_z) / 2.0,
                             (stats[i].z_sum / static_cast<double>(stats[i].count) - cfg.ground_z) / 2.0,
                             neighbour_density[i],
                             std::hypot(cell_xy[i].x, cell_xy[i].y) / 50.0,
                             cell_xy[i].x / 50.0,
                             cell_xy[i].y / 50.0,
                             1.0};
    for (std::size_t k = 0; k < 8 && k < params.fusion.config.lidar_dim; ++k) batch.lidar_feats.at(i, k) = feats[k];
  }
  batch.cam_feats = gather_image_features(f_out, centers, calib, 4);
  batch.centers = centers;
  const Tensor readout = params.readout.apply(adaptive_fuse(batch, params.fusion));

  // Fixed geometric objectness plus the (untrained) fused readout.
  std::vector<double> score(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double height = std::min((stats[i].z_max - cfg.ground_z) / cfg.anchor[2], 1.5);
    const double logit = 6.0 * std::min(neighbour_density[i], 3.0) + height - 4.0 + cfg.readout_gain * readout[i];
    score[i] = logistic(logit);
  }

  // Local maxima: no candidate within peak_radius scores higher (ties go to
  // the earlier cell).
  std::vector<std::size_t> peaks;
  for (std::size_t i = 0; i < m; ++i) {
    if (score[i] < cfg.score_threshold) continue;
    bool is_peak = true;
    cells.for_each_within(cell_xy[i], cfg.peak_radius, [&](std::size_t j) {
      if (score[j] > score[i] || (score[j] == score[i] && j < i)) is_peak = false;
    });
    if (is_peak) peaks.push_back(i);
  }
  std::stable_sort(peaks.begin(), peaks.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  if (peaks.size() > 4 * cfg.max_detections) peaks.resize(4 * cfg.max_detections);

  std::vector<Detection> proposals;
  for (std::size_t pk : peaks) {
    Vec2 c = cell_xy[pk];
    std::vector<std::size_t> members;
    for (int iter = 0; iter < 10; ++iter) {
      members.clear();
      points.for_each_within(c, cfg.cluster_radius, [&](std::size_t j) { members.push_back(j); });
      if (members.empty()) break;
      std::sort(members.begin(), members.end());
      Vec2 mean{0.0, 0.0};
      for (std::size_t j : members) mean.x += points[j].x, mean.y += points[j].y;
      mean.x /= static_cast<double>(members.size());
      mean.y /= static_cast<double>(members.size());
      const double shift = std::hypot(mean.x - c.x, mean.y - c.y);
      c = mean;
      if (shift < 1e-4) break;
    }
    if (members.size() < 3) continue;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t j : members) {
      const double dx = points[j].x - c.x, dy = points[j].y - c.y;
      sxx += dx * dx, syy += dy * dy, sxy += dx * dy;
    }
    Detection det;
    det.box = {c.x, c.y, cfg.ground_z + cfg.anchor[2] / 2.0, cfg.anchor[0], cfg.anchor[1], cfg.anchor[2],
               normalize_yaw(0.5 * std::atan2(2.0 * sxy, sxx - syy))};
    det.score = score[pk];
    proposals.push_back(det);
  }

  std::vector<Detection> out;
  for (std::size_t k : nms(proposals, cfg.nms_threshold)) {
    if (out.size() == cfg.max_detections) break;
    out.push_back(proposals[k]);
  }
  return out;
}

std::vector<Detection> toy_detect(const SyntheticScene& scene, const PipelineParams& params,
                                  const BenchConfig& cfg) {
  if (scene.cloud.empty()) return {};
  const auto f_i = image_features(scene.image, params);
  const auto f_out = dgwa_features(f_i, scene.cloud, scene.calib, scene.image.height(), scene.image.width(), params);
  return detect_from_features(scene.cloud, scene.calib, f_out, params, cfg);
}

// ---------------------------------------------------------------------------
// benchmark driver

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  std::size_t error_index = n;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        // Report the lowest failing index so errors do not depend on timing.
        std::lock_guard lock(error_mutex);
        if (i < error_index) error_index = i, error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::uint64_t pipeline_seed(std::uint64_t bench_seed) { return derive_seed(bench_seed, kPipelineTag); }

std::uint64_t scene_seed(std::uint64_t bench_seed, std::size_t scene) {
  return derive_seed(derive_seed(bench_seed, kSceneTag), scene);
}

std::uint64_t corruption_seed(std::uint64_t bench_seed, std::size_t scene, CorruptionKind kind, int severity) {
  const auto per_scene = derive_seed(derive_seed(bench_seed, kCorruptTag), scene);
  return derive_seed(per_scene, static_cast<std::uint64_t>(kind) * 8 + static_cast<std::uint64_t>(severity));
}

BenchmarkReport run_benchmark(const BenchConfig& cfg, unsigned threads) {
  cfg.validate();
  const auto params = PipelineParams::create(pipeline_seed(cfg.seed));
  const std::size_t n = cfg.scenes;

  std::vector<SyntheticScene> scenes(n);
  std::vector<Tensor> f_i(n), f_out(n);
  parallel_for(n, threads, [&](std::size_t s) {
    scenes[s] = synth_scene(scene_seed(cfg.seed, s), cfg);
    f_i[s] = image_features(scenes[s].image, params);
    f_out[s] = dgwa_features(f_i[s], scenes[s].cloud, scenes[s].calib, cfg.image_height, cfg.image_width, params);
  });

  // Cell 0 is the clean pass; then kind-major, severity-minor.
  struct Cell {
    CorruptionKind kind;
    int severity;
  };
  std::vector<Cell> cells{{CorruptionKind::none, 0}};
  for (auto kind : cfg.kinds)
    for (int sev : cfg.severities) cells.push_back({kind, sev});

  std::vector<std::vector<ScoredMatch>> matches(cells.size() * n);
  parallel_for(matches.size(), threads, [&](std::size_t task) {
    const Cell& cell = cells[task / n];
    const std::size_t s = task % n;
    const auto& scene = scenes[s];
    std::vector<Detection> dets;
    if (cell.kind == CorruptionKind::none) {
      dets = detect_from_features(scene.cloud, scene.calib, f_out[s], params, cfg);
    } else {
      const CorruptionSpec spec{cell.kind, cell.severity, corruption_seed(cfg.seed, s, cell.kind, cell.severity)};
      if (is_image_kind(cell.kind)) {
        const auto depth = project_points(scene.cloud, scene.calib, cfg.image_height, cfg.image_width);
        const auto image = corrupt_image(scene.image, spec, &depth);
        const auto fi = image_features(image, params);
        const auto fo = dgwa_features(fi, scene.cloud, scene.calib, cfg.image_height, cfg.image_width, params);
        dets = detect_from_features(scene.cloud, scene.calib, fo, params, cfg);
      } else {
        const auto cloud = corrupt_lidar(scene.cloud, spec, std::span<const Box3D>(scene.gt_boxes));
        const auto fo = dgwa_features(f_i[s], cloud, scene.calib, cfg.image_height, cfg.image_width, params);
        dets = detect_from_features(cloud, scene.calib, fo, params, cfg);
      }
    }
    matches[task] = match_frame(dets, scene.gt_boxes, cfg.iou_threshold, cfg.iou_kind);
  });

  std::size_t gt_total = 0;
  for (const auto& s : scenes) gt_total += s.gt_boxes.size();
  auto cell_ap = [&](std::size_t c) {
    std::vector<ScoredMatch> all;
    for (std::size_t s = 0; s < n; ++s) {
      const auto& m = matches[c * n + s];
      all.insert(all.end(), m.begin(), m.end());
    }
    return ap_r40(curve_from_matches(std::move(all), gt_total));
  };

  std::vector<CellResult> results;
  for (std::size_t c = 1; c < cells.size(); ++c) results.push_back({cells[c].kind, cells[c].severity, cell_ap(c)});
  return BenchmarkReport::assemble(cell_ap(0), std::move(results), cfg.rce_unit);
}

}  // namespace wavefuse
