#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wavefuse/tensor.hpp"

namespace wavefuse {

/// Binary PPM (P6, maxval 255). Images are H x W x 3 doubles in [0, 255];
/// the writer rounds and clamps.
Tensor decode_ppm(std::span<const std::byte> bytes);
std::vector<std::byte> encode_ppm(const Tensor& image);

Tensor read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Tensor& image);

/// Feature dump: "WFT1", then uint32 H, W, C, then H*W*C float32, all
/// little-endian.
inline constexpr char kFeatureMagic[4] = {'W', 'F', 'T', '1'};

std::vector<std::byte> encode_feature_dump(const Tensor& map);
Tensor decode_feature_dump(std::span<const std::byte> bytes);

}  // namespace wavefuse
