#include "wavefuse/dmae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wavefuse/error.hpp"
#include "wavefuse/rng.hpp"

namespace wavefuse {

std::size_t PatchMask::masked_count() const {
  return static_cast<std::size_t>(std::count(masked.begin(), masked.end(), 1));
}

MaskedImage mask_patches(const Tensor& image, std::size_t patch, double ratio, std::uint64_t seed) {
  require_rank(image, 3, "mask_patches");
  if (patch == 0 || image.height() % patch || image.width() % patch) {
    throw ShapeError("mask_patches: " + shape_string(image.dims()) + " not divisible by patch " +
                     std::to_string(patch));
  }
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw InputError("mask_patches: ratio must be in [0, 1]");

  MaskedImage out{image, {patch, image.height() / patch, image.width() / patch, {}}};
  auto& mask = out.mask;
  const std::size_t n = mask.grid_h * mask.grid_w;
  mask.masked.assign(n, 0);
  const auto k = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng rng(derive_seed(seed, 0x646d6165));
  shuffle(std::span<std::size_t>(order), rng);
  for (std::size_t i = 0; i < k; ++i) mask.masked[order[i]] = 1;

  for (std::size_t y = 0; y < image.height(); ++y)
    for (std::size_t x = 0; x < image.width(); ++x)
      if (mask.covers(y, x))
        for (std::size_t c = 0; c < image.channels(); ++c) out.image.at(y, x, c) = 0.0;
  return out;
}

double dmae_loss(const Tensor& prediction, const Tensor& clean, const PatchMask& mask) {
  require_rank(prediction, 3, "dmae_loss prediction");
  if (prediction.dims() != clean.dims()) {
    throw ShapeError("dmae_loss: prediction " + shape_string(prediction.dims()) + " vs clean " +
                     shape_string(clean.dims()));
  }
  if (mask.grid_h * mask.patch_size != clean.height() || mask.grid_w * mask.patch_size != clean.width()) {
    throw ShapeError("dmae_loss: mask grid does not tile the image");
  }
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t y = 0; y < clean.height(); ++y) {
    for (std::size_t x = 0; x < clean.width(); ++x) {
      if (!mask.covers(y, x)) continue;
      for (std::size_t c = 0; c < clean.channels(); ++c) {
        const double d = prediction.at(y, x, c) - clean.at(y, x, c);
        total += d * d;
        ++count;
      }
    }
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

}  // namespace wavefuse
