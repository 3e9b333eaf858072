#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>

#include "wavefuse/tensor.hpp"

namespace wavefuse {

/// Single-level orthonormal Haar decomposition of an H x W x C map. Band
/// names read (width filter, height filter): lh is low-pass along the width
/// and high-pass along the height.
struct Subbands {
  Tensor ll, lh, hl, hh;  // each H/2 x W/2 x C

  std::size_t height() const { return ll.height(); }
  std::size_t width() const { return ll.width(); }
  std::size_t channels() const { return ll.channels(); }

  /// [ll | lh | hl | hh] along channels: H/2 x W/2 x 4C.
  Tensor concatenated() const;
};

enum class Band : std::uint8_t { LL = 1, LH = 2, HL = 4, HH = 8 };

/// Bitmask over the four bands.
class BandSet {
 public:
  constexpr BandSet() = default;
  constexpr BandSet(std::initializer_list<Band> bands) {
    for (Band b : bands) bits_ |= static_cast<std::uint8_t>(b);
  }
  static constexpr BandSet all() { return BandSet{Band::LL, Band::LH, Band::HL, Band::HH}; }
  static constexpr BandSet none() { return BandSet{}; }

  constexpr BandSet& insert(Band b) {
    bits_ |= static_cast<std::uint8_t>(b);
    return *this;
  }
  constexpr bool contains(Band b) const { return (bits_ & static_cast<std::uint8_t>(b)) != 0; }
  constexpr bool operator==(const BandSet&) const = default;

  /// Comma-separated names, e.g. "LL,HH"; parse_band_set is the inverse.
  std::string to_string() const;

 private:
  std::uint8_t bits_ = 0;
};

BandSet parse_band_set(const std::string& text);

Subbands dwt2(const Tensor& f);
Tensor idwt2(const Subbands& s);
Subbands band_filter(Subbands s, BandSet keep);

}  // namespace wavefuse
