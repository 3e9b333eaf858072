#include "wavefuse/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "wavefuse/error.hpp"
#include "wavefuse/geometry.hpp"
#include "wavefuse/rng.hpp"

namespace wavefuse {

FusionParams FusionParams::random(const FusionConfig& c, std::uint64_t seed) {
  CounterRng rng(derive_seed(seed, 0x667573));
  FusionParams p;
  p.config = c;
  p.lidar_proj = LinearMap::random(c.lidar_dim, c.token_dim, rng);
  p.camera_proj = LinearMap::random(c.camera_dim, c.token_dim, rng);
  p.wq = LinearMap::random(c.token_dim, c.token_dim, rng);
  p.wk = LinearMap::random(c.token_dim, c.token_dim, rng);
  p.wv = LinearMap::random(c.token_dim, c.token_dim, rng);
  p.mlp_in = LinearMap::random(2 * c.token_dim, c.mlp_hidden, rng);
  p.mlp_out = LinearMap::random(c.mlp_hidden, c.output_dim, rng);
  return p;
}

void FusionParams::validate() const {
  const auto& c = config;
  const std::size_t d = c.token_dim;
  const bool ok = lidar_proj.in_dim() == c.lidar_dim && lidar_proj.out_dim() == d &&
                  camera_proj.in_dim() == c.camera_dim && camera_proj.out_dim() == d &&
                  wq.in_dim() == d && wq.out_dim() == d && wk.in_dim() == d && wk.out_dim() == d &&
                  wv.in_dim() == d && wv.out_dim() == d && mlp_in.in_dim() == 2 * d &&
                  mlp_in.out_dim() == c.mlp_hidden && mlp_out.in_dim() == c.mlp_hidden &&
                  mlp_out.out_dim() == c.output_dim;
  if (!ok) throw ShapeError("FusionParams: component widths disagree with config");
}

Tensor gather_image_features(const Tensor& features, std::span<const CellCenter> centers,
                             const CalibrationSet& calib, std::size_t stride) {
  require_rank(features, 3, "gather_image_features");
  const std::size_t gh = features.height(), gw = features.width(), C = features.channels();
  const double s = static_cast<double>(stride);
  const double offset = (s - 1.0) / 2.0;
  Tensor out({centers.size(), C});
  for (std::size_t m = 0; m < centers.size(); ++m) {
    const auto proj = project_to_image(calib, centers[m][0], centers[m][1], centers[m][2]);
    if (!proj) continue;
    const double gx = (proj->u - offset) / s;
    const double gy = (proj->v - offset) / s;
    if (!(gx >= 0.0 && gy >= 0.0 && gx <= static_cast<double>(gw - 1) && gy <= static_cast<double>(gh - 1))) {
      continue;
    }
    const auto x0 = static_cast<std::size_t>(std::floor(gx));
    const auto y0 = static_cast<std::size_t>(std::floor(gy));
    const std::size_t x1 = std::min(x0 + 1, gw - 1), y1 = std::min(y0 + 1, gh - 1);
    const double fx = gx - static_cast<double>(x0), fy = gy - static_cast<double>(y0);
    double* row = out.data().data() + m * C;
    for (std::size_t c = 0; c < C; ++c) {
      row[c] = (1 - fy) * ((1 - fx) * features.at(y0, x0, c) + fx * features.at(y0, x1, c)) +
               fy * ((1 - fx) * features.at(y1, x0, c) + fx * features.at(y1, x1, c));
    }
  }
  return out;
}

FusionTrace adaptive_fuse_traced(const FusionCellBatch& batch, const FusionParams& params) {
  params.validate();
  require_rank(batch.lidar_feats, 2, "adaptive_fuse lidar");
  require_rank(batch.cam_feats, 2, "adaptive_fuse camera");
  const std::size_t M = batch.size();
  if (batch.lidar_feats.dim(0) != M || batch.cam_feats.dim(0) != M) {
    throw ShapeError("adaptive_fuse: batch fields disagree on cell count (" +
                     std::to_string(batch.lidar_feats.dim(0)) + ", " +
                     std::to_string(batch.cam_feats.dim(0)) + ", " + std::to_string(M) + ")");
  }
  const std::size_t d = params.config.token_dim;
  const Tensor tl = params.lidar_proj.apply(batch.lidar_feats);
  const Tensor tc = params.camera_proj.apply(batch.cam_feats);
  const Tensor ql = params.wq.apply(tl), qc = params.wq.apply(tc);
  const Tensor kl = params.wk.apply(tl), kc = params.wk.apply(tc);
  const Tensor vl = params.wv.apply(tl), vc = params.wv.apply(tc);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  FusionTrace trace;
  trace.weights = Tensor({M, 4});
  trace.tokens = Tensor({M, 2 * d});
  auto dot = [d](const double* a, const double* b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) acc += a[i] * b[i];
    return acc;
  };
  for (std::size_t m = 0; m < M; ++m) {
    const double* q[2] = {ql.data().data() + m * d, qc.data().data() + m * d};
    const double* k[2] = {kl.data().data() + m * d, kc.data().data() + m * d};
    const double* v[2] = {vl.data().data() + m * d, vc.data().data() + m * d};
    const double* t[2] = {tl.data().data() + m * d, tc.data().data() + m * d};
    double* w = trace.weights.data().data() + m * 4;
    double* u = trace.tokens.data().data() + m * 2 * d;
    for (int i = 0; i < 2; ++i) {
      const double a0 = dot(q[i], k[0]) * scale, a1 = dot(q[i], k[1]) * scale;
      const double peak = std::max(a0, a1);
      const double e0 = std::exp(a0 - peak), e1 = std::exp(a1 - peak);
      const double w0 = e0 / (e0 + e1), w1 = e1 / (e0 + e1);
      w[2 * i] = w0;
      w[2 * i + 1] = w1;
      for (std::size_t j = 0; j < d; ++j) u[i * d + j] = t[i][j] + w0 * v[0][j] + w1 * v[1][j];
    }
  }
  trace.output = params.mlp_out.apply(relu(params.mlp_in.apply(trace.tokens)));
  return trace;
}

Tensor adaptive_fuse(const FusionCellBatch& batch, const FusionParams& params) {
  return adaptive_fuse_traced(batch, params).output;
}

}  // namespace wavefuse
