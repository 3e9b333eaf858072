#include "wavefuse/wavelet.hpp"

#include <numbers>
#include <sstream>

#include "wavefuse/error.hpp"

namespace wavefuse {

namespace {
constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;
}

Tensor Subbands::concatenated() const {
  const Tensor parts[] = {ll, lh, hl, hh};
  return concat_channels(parts);
}

std::string BandSet::to_string() const {
  std::string out;
  const std::pair<Band, const char*> names[] = {
      {Band::LL, "LL"}, {Band::LH, "LH"}, {Band::HL, "HL"}, {Band::HH, "HH"}};
  for (const auto& [band, name] : names) {
    if (!contains(band)) continue;
    if (!out.empty()) out += ',';
    out += name;
  }
  return out;
}

BandSet parse_band_set(const std::string& text) {
  BandSet set;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    Band band;
    if (item == "LL") band = Band::LL;
    else if (item == "LH") band = Band::LH;
    else if (item == "HL") band = Band::HL;
    else if (item == "HH") band = Band::HH;
    else throw InputError("unknown wavelet band '" + item + "'");
    set.insert(band);
  }
  return set;
}

Subbands dwt2(const Tensor& f) {
  require_rank(f, 3, "dwt2");
  const std::size_t H = f.height(), W = f.width(), C = f.channels();
  if (H % 2 || W % 2) throw ShapeError("dwt2: spatial dims must be even, got " + shape_string(f.dims()));
  const std::size_t h = H / 2, w = W / 2;
  Subbands s{Tensor({h, w, C}), Tensor({h, w, C}), Tensor({h, w, C}), Tensor({h, w, C})};
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < C; ++c) {
        const double a = f.at(2 * y, 2 * x, c);
        const double b = f.at(2 * y, 2 * x + 1, c);
        const double d = f.at(2 * y + 1, 2 * x, c);
        const double e = f.at(2 * y + 1, 2 * x + 1, c);
        // Width pass on each of the two rows.
        const double top_lo = (a + b) * kInvSqrt2, top_hi = (a - b) * kInvSqrt2;
        const double bot_lo = (d + e) * kInvSqrt2, bot_hi = (d - e) * kInvSqrt2;
        // Height pass.
        s.ll.at(y, x, c) = (top_lo + bot_lo) * kInvSqrt2;
        s.lh.at(y, x, c) = (top_lo - bot_lo) * kInvSqrt2;
        s.hl.at(y, x, c) = (top_hi + bot_hi) * kInvSqrt2;
        s.hh.at(y, x, c) = (top_hi - bot_hi) * kInvSqrt2;
      }
    }
  }
  return s;
}

Tensor idwt2(const Subbands& s) {
  require_rank(s.ll, 3, "idwt2");
  if (s.lh.dims() != s.ll.dims() || s.hl.dims() != s.ll.dims() || s.hh.dims() != s.ll.dims()) {
    throw ShapeError("idwt2: inconsistent band dims " + shape_string(s.ll.dims()) + ", " +
                     shape_string(s.lh.dims()) + ", " + shape_string(s.hl.dims()) + ", " +
                     shape_string(s.hh.dims()));
  }
  const std::size_t h = s.height(), w = s.width(), C = s.channels();
  Tensor f({2 * h, 2 * w, C});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < C; ++c) {
        const double ll = s.ll.at(y, x, c), lh = s.lh.at(y, x, c);
        const double hl = s.hl.at(y, x, c), hh = s.hh.at(y, x, c);
        const double top_lo = (ll + lh) * kInvSqrt2, bot_lo = (ll - lh) * kInvSqrt2;
        const double top_hi = (hl + hh) * kInvSqrt2, bot_hi = (hl - hh) * kInvSqrt2;
        f.at(2 * y, 2 * x, c) = (top_lo + top_hi) * kInvSqrt2;
        f.at(2 * y, 2 * x + 1, c) = (top_lo - top_hi) * kInvSqrt2;
        f.at(2 * y + 1, 2 * x, c) = (bot_lo + bot_hi) * kInvSqrt2;
        f.at(2 * y + 1, 2 * x + 1, c) = (bot_lo - bot_hi) * kInvSqrt2;
      }
    }
  }
  return f;
}

Subbands band_filter(Subbands s, BandSet keep) {
  auto zero = [](Tensor& t) {
    for (auto& v : t.data()) v = 0.0;
  };
  if (!keep.contains(Band::LL)) zero(s.ll);
  if (!keep.contains(Band::LH)) zero(s.lh);
  if (!keep.contains(Band::HL)) zero(s.hl);
  if (!keep.contains(Band::HH)) zero(s.hh);
  return s;
}

}  // namespace wavefuse
