#pragma once

#include <cstddef>
#include <cstdint>

#include "wavefuse/geometry.hpp"
#include "wavefuse/tensor.hpp"
#include "wavefuse/wavelet.hpp"

namespace wavefuse {

struct DgwaConfig {
  std::size_t image_channels = 32;   // C_i of the stride-4 image feature
  std::size_t depth_hidden = 8;      // after the first depth-encoder stage
  std::size_t depth_channels = 16;   // F_d
  std::size_t guided_channels = 16;  // C of the depth-guided feature
  std::size_t key_dim = 16;          // wq / wk output width
  std::size_t value_dim = 16;        // wv output width
  std::size_t mlp_hidden = 32;
  std::size_t output_channels = 16;
  double depth_max_range = 80.0;  // metres
};

struct DgwaParams {
  DgwaConfig config;
  ConvKernel depth_stage1;  // 3x3 pad 1, 2 -> depth_hidden
  ConvKernel depth_stage2;  // 3x3 pad 1, depth_hidden -> depth_channels
  ConvKernel guide;         // 1x1, C_i + depth_channels -> C
  LinearMap wq;             // C -> key_dim
  LinearMap wk;             // 4C -> key_dim
  LinearMap wv;             // 4C -> value_dim
  LinearMap mlp_in;         // value_dim + C -> mlp_hidden
  LinearMap mlp_out;        // mlp_hidden -> output_channels

  static DgwaParams random(const DgwaConfig& config, std::uint64_t seed);
  /// Throws ShapeError if any component disagrees with the config widths.
  void validate() const;
};

struct DepthGuidedFeatures {
  Tensor map;  // H/4 x W/4 x C
};

/// Depth normalised by config.depth_max_range, then two
/// (conv3x3 + ReLU + maxpool2) stages: H x W x 2 -> H/4 x W/4 x depth_channels.
Tensor depth_encode(const SparseDepthMap& depth, const DgwaParams& params);

/// 1x1 conv over concat(f_i, f_d).
DepthGuidedFeatures depth_guide(const Tensor& image_features, const Tensor& depth_features,
                                const DgwaParams& params);

struct WaveAttention {
  Tensor features;  // H/4 x W/4 x value_dim
  Tensor weights;   // (H/4 * W/4) x (H/8 * W/8)
};

/// Cross-attention: stride-4 query tokens from the guided features against
/// stride-8 key/value tokens from the concatenated subbands.
WaveAttention wave_attention(const DepthGuidedFeatures& query, const Subbands& bands,
                             const DgwaParams& params);

struct DgwaOptions {
  /// Bands handed to the inverse transform. Anything but all() is a
  /// diagnostic mode; attention always sees every band.
  BandSet reconstruction_bands = BandSet::all();
};

struct DgwaTrace {
  Subbands bands;
  WaveAttention attention;
  Tensor reconstruction;  // idwt2 of the (optionally filtered) bands
  Tensor output;          // H/4 x W/4 x output_channels
};

DgwaTrace dgwa_forward_traced(const DepthGuidedFeatures& input, const DgwaParams& params,
                              DgwaOptions options = {});
Tensor dgwa_forward(const DepthGuidedFeatures& input, const DgwaParams& params,
                    DgwaOptions options = {});

/// Max-pools a stride-4 map down by `factor` (a power of two), e.g. 4 for
/// a stride-16 consumer.
Tensor pool_to_stride(const Tensor& map, std::size_t factor);

}  // namespace wavefuse
