#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "wavefuse/tensor.hpp"

namespace wavefuse {

inline constexpr double kDefaultMaskRatio = 0.75;

struct PatchMask {
  std::size_t patch_size = 0;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::vector<char> masked;  // grid_h * grid_w, row-major

  std::size_t masked_count() const;
  bool is_masked(std::size_t py, std::size_t px) const { return masked[py * grid_w + px] != 0; }
  /// Whether pixel (y, x) falls in a masked patch.
  bool covers(std::size_t y, std::size_t x) const { return is_masked(y / patch_size, x / patch_size); }
};

struct MaskedImage {
  Tensor image;  // masked pixels zeroed
  PatchMask mask;
};

/// Masks exactly round(ratio * patches) patches, chosen by a seeded shuffle.
MaskedImage mask_patches(const Tensor& image, std::size_t patch, double ratio, std::uint64_t seed);

/// Mean squared error over the pixels (all channels) of masked patches,
/// against the clean image. Zero when nothing is masked.
double dmae_loss(const Tensor& prediction, const Tensor& clean, const PatchMask& mask);

}  // namespace wavefuse
