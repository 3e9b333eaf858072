#include "wavefuse/dgwa.hpp"

#include <cmath>

#include "wavefuse/attention.hpp"
#include "wavefuse/error.hpp"
#include "wavefuse/rng.hpp"

namespace wavefuse {

namespace {

void expect(bool ok, const std::string& what) {
  if (!ok) throw ShapeError("DgwaParams: " + what);
}

}  // namespace

DgwaParams DgwaParams::random(const DgwaConfig& c, std::uint64_t seed) {
  CounterRng rng(derive_seed(seed, 0x64677761));
  DgwaParams p;
  p.config = c;
  p.depth_stage1 = ConvKernel::random(2, c.depth_hidden, 3, 3, rng, 1, 1);
  p.depth_stage2 = ConvKernel::random(c.depth_hidden, c.depth_channels, 3, 3, rng, 1, 1);
  p.guide = ConvKernel::random(c.image_channels + c.depth_channels, c.guided_channels, 1, 1, rng);
  p.wq = LinearMap::random(c.guided_channels, c.key_dim, rng);
  p.wk = LinearMap::random(4 * c.guided_channels, c.key_dim, rng);
  p.wv = LinearMap::random(4 * c.guided_channels, c.value_dim, rng);
  p.mlp_in = LinearMap::random(c.value_dim + c.guided_channels, c.mlp_hidden, rng);
  p.mlp_out = LinearMap::random(c.mlp_hidden, c.output_channels, rng);
  return p;
}

void DgwaParams::validate() const {
  const auto& c = config;
  expect(depth_stage1.in_channels() == 2 && depth_stage1.out_channels() == c.depth_hidden,
         "depth_stage1 must map 2 -> depth_hidden");
  expect(depth_stage2.in_channels() == c.depth_hidden &&
             depth_stage2.out_channels() == c.depth_channels,
         "depth_stage2 must map depth_hidden -> depth_channels");
  expect(guide.in_channels() == c.image_channels + c.depth_channels &&
             guide.out_channels() == c.guided_channels && guide.kernel_h() == 1 && guide.kernel_w() == 1,
         "guide must be 1x1, (C_i + depth_channels) -> C");
  expect(wq.in_dim() == c.guided_channels && wq.out_dim() == c.key_dim, "wq must map C -> key_dim");
  expect(wk.in_dim() == 4 * c.guided_channels && wk.out_dim() == c.key_dim, "wk must map 4C -> key_dim");
  expect(wv.in_dim() == 4 * c.guided_channels && wv.out_dim() == c.value_dim, "wv must map 4C -> value_dim");
  expect(mlp_in.in_dim() == c.value_dim + c.guided_channels && mlp_in.out_dim() == c.mlp_hidden,
         "mlp_in must map value_dim + C -> mlp_hidden");
  expect(mlp_out.in_dim() == c.mlp_hidden && mlp_out.out_dim() == c.output_channels,
         "mlp_out must map mlp_hidden -> output_channels");
}

Tensor depth_encode(const SparseDepthMap& depth, const DgwaParams& params) {
  const Tensor& s = depth.values;
  require_rank(s, 3, "depth_encode");
  if (s.channels() != 2) throw ShapeError("depth_encode: expected 2 channels, got " + shape_string(s.dims()));
  if (s.height() % 4 || s.width() % 4) {
    throw ShapeError("depth_encode: H and W must be divisible by 4, got " + shape_string(s.dims()));
  }
  if (!(params.config.depth_max_range > 0.0)) throw InputError("depth_encode: depth_max_range must be positive");
  Tensor x = s;
  const double inv_range = 1.0 / params.config.depth_max_range;
  for (std::size_t i = 0; i < x.size(); i += 2) x[i] = s[i] * inv_range;
  x = maxpool2(relu(conv2d(x, params.depth_stage1)));
  x = maxpool2(relu(conv2d(x, params.depth_stage2)));
  return x;
}

DepthGuidedFeatures depth_guide(const Tensor& image_features, const Tensor& depth_features,
                                const DgwaParams& params) {
  require_rank(image_features, 3, "depth_guide image features");
  require_rank(depth_features, 3, "depth_guide depth features");
  if (image_features.height() != depth_features.height() ||
      image_features.width() != depth_features.width()) {
    throw ShapeError("depth_guide: spatial mismatch " + shape_string(image_features.dims()) + " vs " +
                     shape_string(depth_features.dims()));
  }
  return {conv2d(concat_channels(image_features, depth_features), params.guide)};
}

namespace {

WaveAttention attend(const DepthGuidedFeatures& query, const Subbands& bands, const DgwaParams& params,
                     bool keep_weights) {
  const Tensor& q_src = query.map;
  require_rank(q_src, 3, "wave_attention query");
  if (bands.height() * 2 != q_src.height() || bands.width() * 2 != q_src.width()) {
    throw ShapeError("wave_attention: subbands " + shape_string(bands.ll.dims()) +
                     " are not half the query grid " + shape_string(q_src.dims()));
  }
  const Tensor kv_tokens = to_tokens(bands.concatenated());
  if (params.wq.in_dim() != q_src.channels() || params.wk.in_dim() != kv_tokens.dim(1) ||
      params.wv.in_dim() != kv_tokens.dim(1) || params.wq.out_dim() != params.wk.out_dim()) {
    throw ShapeError("wave_attention: projection widths do not match query " +
                     shape_string(q_src.dims()) + " / bands " + shape_string(bands.ll.dims()));
  }
  const Tensor q = params.wq.apply(to_tokens(q_src));
  const Tensor k = params.wk.apply(kv_tokens);
  const Tensor v = params.wv.apply(kv_tokens);
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.wq.out_dim()));
  if (!keep_weights) return {from_tokens(scaled_dot_attention_values(q, k, v, scale), q_src.height(), q_src.width()), {}};
  auto attn = scaled_dot_attention(q, k, v, scale);
  return {from_tokens(attn.output, q_src.height(), q_src.width()), std::move(attn.weights)};
}

DgwaTrace forward(const DepthGuidedFeatures& input, const DgwaParams& params, DgwaOptions options,
                  bool keep_weights) {
  const Tensor& x = input.map;
  require_rank(x, 3, "dgwa_forward");
  if (x.height() % 2 || x.width() % 2) {
    throw ShapeError("dgwa_forward: stride-4 dims must be even, got " + shape_string(x.dims()));
  }
  DgwaTrace trace;
  trace.bands = dwt2(x);
  trace.attention = attend(input, trace.bands, params, keep_weights);
  trace.reconstruction = idwt2(band_filter(trace.bands, options.reconstruction_bands));
  const Tensor joined = to_tokens(concat_channels(trace.attention.features, trace.reconstruction));
  const Tensor out = params.mlp_out.apply(relu(params.mlp_in.apply(joined)));
  trace.output = from_tokens(out, x.height(), x.width());
  return trace;
}

}  // namespace

WaveAttention wave_attention(const DepthGuidedFeatures& query, const Subbands& bands,
                             const DgwaParams& params) {
  return attend(query, bands, params, true);
}

DgwaTrace dgwa_forward_traced(const DepthGuidedFeatures& input, const DgwaParams& params,
                              DgwaOptions options) {
  return forward(input, params, options, true);
}

Tensor dgwa_forward(const DepthGuidedFeatures& input, const DgwaParams& params, DgwaOptions options) {
  return forward(input, params, options, false).output;
}

Tensor pool_to_stride(const Tensor& map, std::size_t factor) {
  if (factor == 0 || (factor & (factor - 1)) != 0) {
    throw InputError("pool_to_stride: factor must be a power of two");
  }
  Tensor out = map;
  for (std::size_t f = factor; f > 1; f /= 2) out = maxpool2(out);
  return out;
}

}  // namespace wavefuse
