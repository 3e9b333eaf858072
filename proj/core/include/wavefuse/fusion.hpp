#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "wavefuse/kitti_io.hpp"
#include "wavefuse/tensor.hpp"

namespace wavefuse {

using CellCenter = std::array<double, 3>;  // LiDAR frame, metres

struct FusionCellBatch {
  Tensor lidar_feats;  // M x C_l
  Tensor cam_feats;    // M x C_c
  std::vector<CellCenter> centers;

  std::size_t size() const { return centers.size(); }
};

struct FusionConfig {
  std::size_t lidar_dim = 8;
  std::size_t camera_dim = 16;
  std::size_t token_dim = 16;
  std::size_t mlp_hidden = 32;
  std::size_t output_dim = 16;
};

/// Each cell becomes a two-token sequence (LiDAR, camera) in a shared width;
/// one self-attention layer with a residual re-weights them, then an MLP
/// reads the concatenated updated tokens.
struct FusionParams {
  FusionConfig config;
  LinearMap lidar_proj;   // C_l -> d
  LinearMap camera_proj;  // C_c -> d
  LinearMap wq, wk, wv;   // d -> d
  LinearMap mlp_in;       // 2d -> hidden
  LinearMap mlp_out;      // hidden -> output_dim

  static FusionParams random(const FusionConfig& config, std::uint64_t seed);
  void validate() const;
};

/// Bilinear sample of a stride-`stride` feature map at the image projection
/// of each centre. Grid node (i, j) sits at pixel
/// (stride*j + (stride-1)/2, stride*i + (stride-1)/2). Centres behind the
/// camera or outside the node lattice give a zero row.
Tensor gather_image_features(const Tensor& features, std::span<const CellCenter> centers,
                             const CalibrationSet& calib, std::size_t stride = 4);

struct FusionTrace {
  Tensor output;   // M x output_dim
  Tensor weights;  // M x 4: row-major 2x2 attention per cell
  Tensor tokens;   // M x 2d: updated (lidar, camera) tokens
};

FusionTrace adaptive_fuse_traced(const FusionCellBatch& batch, const FusionParams& params);
Tensor adaptive_fuse(const FusionCellBatch& batch, const FusionParams& params);

}  // namespace wavefuse
