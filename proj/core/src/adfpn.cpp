#include "wavefuse/adfpn.hpp"

#include <cmath>

#include "wavefuse/attention.hpp"
#include "wavefuse/error.hpp"
#include "wavefuse/rng.hpp"

namespace wavefuse {

EncoderParams EncoderParams::random(const EncoderConfig& config, std::uint64_t seed) {
  if (config.patch_size == 0 || config.embed_dim == 0 || config.mlp_hidden == 0) {
    throw InputError("EncoderConfig: sizes must be positive");
  }
  CounterRng rng(derive_seed(seed, 0x656e63));
  EncoderParams p;
  p.config = config;
  const std::size_t D = config.embed_dim;
  p.patch_embed = LinearMap::random(config.patch_size * config.patch_size * 3, D, rng);
  for (std::size_t b = 0; b < config.blocks; ++b) {
    EncoderBlock block;
    block.wq = LinearMap::random(D, D, rng);
    block.wk = LinearMap::random(D, D, rng);
    block.wv = LinearMap::random(D, D, rng);
    block.wo = LinearMap::random(D, D, rng);
    block.mlp_in = LinearMap::random(D, config.mlp_hidden, rng);
    block.mlp_out = LinearMap::random(config.mlp_hidden, D, rng);
    p.blocks.push_back(std::move(block));
  }
  return p;
}

Tensor sinusoidal_position_code(std::size_t rows, std::size_t cols, std::size_t dim) {
  Tensor code({rows * cols, dim});
  const std::size_t half = dim / 2;
  auto fill = [&](std::size_t token, std::size_t offset, std::size_t width, double pos) {
    for (std::size_t i = 0; i < width; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(width));
      code.at(token, offset + i) = (i % 2 == 0) ? std::sin(pos * freq) : std::cos(pos * freq);
    }
  };
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t t = r * cols + c;
      fill(t, 0, half, static_cast<double>(r));
      fill(t, half, dim - half, static_cast<double>(c));
    }
  }
  return code;
}

Tensor patchify(const Tensor& image, std::size_t patch) {
  require_rank(image, 3, "patchify");
  const std::size_t H = image.height(), W = image.width(), C = image.channels();
  if (H % patch || W % patch) {
    throw ShapeError("patchify: " + shape_string(image.dims()) + " not divisible by patch " +
                     std::to_string(patch));
  }
  const std::size_t gh = H / patch, gw = W / patch;
  Tensor out({gh * gw, patch * patch * C});
  for (std::size_t py = 0; py < gh; ++py)
    for (std::size_t px = 0; px < gw; ++px) {
      double* row = &out.at(py * gw + px, 0);
      for (std::size_t y = 0; y < patch; ++y)
        for (std::size_t x = 0; x < patch; ++x)
          for (std::size_t c = 0; c < C; ++c)
            row[(y * patch + x) * C + c] = image.at(py * patch + y, px * patch + x, c);
    }
  return out;
}

ImageEmbedding encode_stub(const Tensor& image, const EncoderParams& params) {
  require_rank(image, 3, "encode_stub");
  const auto& cfg = params.config;
  if (image.channels() != 3) throw ShapeError("encode_stub: expected 3 channels, got " + shape_string(image.dims()));
  if (image.height() % cfg.patch_size || image.width() % cfg.patch_size) {
    throw ShapeError("encode_stub: image " + shape_string(image.dims()) + " not divisible by " +
                     std::to_string(cfg.patch_size));
  }
  const std::size_t gh = image.height() / cfg.patch_size, gw = image.width() / cfg.patch_size;
  // Pixels arrive in [0, 255].
  Tensor tokens = params.patch_embed.apply(scale(patchify(image, cfg.patch_size), 1.0 / 255.0));
  if (cfg.position_code) tokens = add(tokens, sinusoidal_position_code(gh, gw, cfg.embed_dim));

  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim));
  for (const auto& block : params.blocks) {
    const Tensor h = layer_norm_rows(tokens);
    const auto attn = scaled_dot_attention(block.wq.apply(h), block.wk.apply(h), block.wv.apply(h), attn_scale);
    tokens = add(tokens, block.wo.apply(attn.output));
    const Tensor h2 = layer_norm_rows(tokens);
    tokens = add(tokens, block.mlp_out.apply(relu(block.mlp_in.apply(h2))));
  }
  return {from_tokens(tokens, gh, gw), image.height(), image.width()};
}

PyramidParams PyramidParams::random(const PyramidConfig& config, std::uint64_t seed) {
  CounterRng rng(derive_seed(seed, 0x66706e));
  const std::size_t D = config.embed_dim, Cf = config.pyramid_channels, Ci = config.output_channels;
  PyramidParams p;
  p.up8 = ConvKernel::random(D, D, 2, 2, rng);
  p.up4_first = ConvKernel::random(D, D, 2, 2, rng);
  p.up4_second = ConvKernel::random(D, D, 2, 2, rng);
  for (auto& lat : p.lateral) lat = ConvKernel::random(D, Cf, 1, 1, rng);
  p.smooth[0] = ConvKernel::random(Cf, Cf, 3, 3, rng, 1, 1);
  p.smooth[1] = ConvKernel::random(Cf, Cf, 3, 3, rng, 1, 1);
  p.smooth[2] = ConvKernel::random(Cf, Ci, 3, 3, rng, 1, 1);
  return p;
}

PyramidParams PyramidParams::identity(std::size_t channels) {
  PyramidParams p;
  p.up8 = ConvKernel::identity(channels, 2, 2);
  p.up4_first = ConvKernel::identity(channels, 2, 2);
  p.up4_second = ConvKernel::identity(channels, 2, 2);
  for (auto& lat : p.lateral) lat = ConvKernel::identity(channels, 1, 1);
  for (auto& s : p.smooth) s = ConvKernel::identity(channels, 3, 3, 1, 1);
  return p;
}

FeaturePyramid build_pyramid(const ImageEmbedding& embedding, const PyramidParams& params) {
  const Tensor& e = embedding.map;
  require_rank(e, 3, "build_pyramid");
  if (e.height() % 2 || e.width() % 2) {
    throw ShapeError("build_pyramid: stride-32 level needs an even embedding grid, got " +
                     shape_string(e.dims()));
  }
  const Tensor s32 = maxpool2(e);
  const Tensor s8 = tconv2(e, params.up8);
  const Tensor s4 = tconv2(tconv2(e, params.up4_first), params.up4_second);
  FeaturePyramid p;
  p.levels[0] = conv2d(s32, params.lateral[0]);
  p.levels[1] = conv2d(e, params.lateral[1]);
  p.levels[2] = conv2d(s8, params.lateral[2]);
  p.levels[3] = conv2d(s4, params.lateral[3]);
  return p;
}

Tensor merge_pyramid(const FeaturePyramid& pyramid, const PyramidParams& params) {
  Tensor running = pyramid.levels[0];
  for (std::size_t level = 1; level < 4; ++level) {
    running = conv2d(add(nearest_up2(running), pyramid.levels[level]), params.smooth[level - 1]);
  }
  return running;
}

}  // namespace wavefuse
