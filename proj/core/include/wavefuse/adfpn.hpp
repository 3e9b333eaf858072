#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "wavefuse/tensor.hpp"

namespace wavefuse {

// ---------------------------------------------------------------------------
// Stub stride-16 image encoder (ViT-style: patchify, embed, attention blocks).

struct EncoderConfig {
  std::size_t patch_size = 16;
  std::size_t embed_dim = 64;
  std::size_t blocks = 2;
  std::size_t mlp_hidden = 128;
  bool position_code = true;
};

/// Pre-norm transformer block: x += Attn(LN(x)); x += MLP(LN(x)).
struct EncoderBlock {
  LinearMap wq, wk, wv, wo;
  LinearMap mlp_in, mlp_out;
};

struct EncoderParams {
  EncoderConfig config;
  LinearMap patch_embed;  // (patch*patch*3) -> embed_dim
  std::vector<EncoderBlock> blocks;

  static EncoderParams random(const EncoderConfig& config, std::uint64_t seed);
};

struct ImageEmbedding {
  Tensor map;  // H/16 x W/16 x D
  std::size_t source_height = 0;
  std::size_t source_width = 0;
};

/// Fixed 2-D sinusoidal code: the first half of the channels encodes the
/// row, the second half the column.
Tensor sinusoidal_position_code(std::size_t rows, std::size_t cols, std::size_t dim);

/// Flattens p x p x 3 patches in row-major patch order.
Tensor patchify(const Tensor& image, std::size_t patch);

ImageEmbedding encode_stub(const Tensor& image, const EncoderParams& params);

// ---------------------------------------------------------------------------
// Pyramid

inline constexpr std::array<std::size_t, 4> kPyramidStrides = {32, 16, 8, 4};

struct PyramidConfig {
  std::size_t embed_dim = 64;
  std::size_t pyramid_channels = 32;  // C_f
  std::size_t output_channels = 32;   // C_i
};

struct PyramidParams {
  ConvKernel up8;                  // tconv2, D -> D
  ConvKernel up4_first, up4_second;  // tconv2 x2, D -> D
  std::array<ConvKernel, 4> lateral;  // 1x1, D -> C_f, indexed like kPyramidStrides
  std::array<ConvKernel, 3> smooth;   // 3x3 pad 1 at strides 16, 8, 4; last maps to C_i

  static PyramidParams random(const PyramidConfig& config, std::uint64_t seed);
  /// Every conv is a channel identity; requires D == C_f == C_i.
  static PyramidParams identity(std::size_t channels);
};

struct FeaturePyramid {
  std::array<Tensor, 4> levels;  // strides 32, 16, 8, 4
};

FeaturePyramid build_pyramid(const ImageEmbedding& embedding, const PyramidParams& params);

/// Coarse-to-fine merge: running = lateral(32); for each finer level,
/// running = smooth(nearest_up2(running) + lateral).
Tensor merge_pyramid(const FeaturePyramid& pyramid, const PyramidParams& params);

}  // namespace wavefuse
