#include <doctest.h>

#include <cmath>

#include "support/oracles.hpp"
#include "wavefuse/error.hpp"
#include "wavefuse/wavelet.hpp"

using namespace wavefuse;

namespace {

double band_energy(const Subbands& s) {
  return sum_squares(s.ll) + sum_squares(s.lh) + sum_squares(s.hl) + sum_squares(s.hh);
}

Tensor block_average(const Tensor& x) {
  Tensor out(x.dims());
  for (std::size_t r = 0; r < x.height(); r += 2)
    for (std::size_t c = 0; c < x.width(); c += 2)
      for (std::size_t k = 0; k < x.channels(); ++k) {
        const double m = (x.at(r, c, k) + x.at(r, c + 1, k) + x.at(r + 1, c, k) + x.at(r + 1, c + 1, k)) / 4;
        out.at(r, c, k) = out.at(r, c + 1, k) = out.at(r + 1, c, k) = out.at(r + 1, c + 1, k) = m;
      }
  return out;
}

}  // namespace

TEST_CASE("dwt2 examples") {
  const Subbands flat = dwt2(Tensor({4, 6, 2}, 1.5));
  CHECK(max_abs_diff(flat.ll, Tensor({2, 3, 2}, 3.0)) < 1e-12);
  CHECK(sum_squares(flat.lh) + sum_squares(flat.hl) + sum_squares(flat.hh) < 1e-24);

  const Subbands s = dwt2(Tensor({2, 2, 1}, std::vector<double>{1, 2, 3, 4}));
  CHECK(s.ll[0] == doctest::Approx(5.0));
  CHECK(s.lh[0] == doctest::Approx(-2.0));
  CHECK(s.hl[0] == doctest::Approx(-1.0));
  CHECK(std::abs(s.hh[0]) < 1e-12);

  CHECK_THROWS_AS(dwt2(Tensor({3, 4, 1})), ShapeError);
  CHECK_THROWS_AS(dwt2(Tensor({4, 5, 1})), ShapeError);
}

TEST_CASE("idwt2 examples") {
  Subbands s{Tensor({1, 1, 1}, 5.0), Tensor({1, 1, 1}, -2.0), Tensor({1, 1, 1}, -1.0), Tensor({1, 1, 1}, 0.0)};
  CHECK(max_abs_diff(idwt2(s), Tensor({2, 2, 1}, std::vector<double>{1, 2, 3, 4})) < 1e-12);
  Subbands dc{Tensor({2, 2, 3}, 4.0), Tensor({2, 2, 3}), Tensor({2, 2, 3}), Tensor({2, 2, 3})};
  CHECK(max_abs_diff(idwt2(dc), Tensor({4, 4, 3}, 2.0)) < 1e-12);
  Subbands zero{Tensor({2, 2, 1}), Tensor({2, 2, 1}), Tensor({2, 2, 1}), Tensor({2, 2, 1})};
  CHECK(idwt2(zero) == Tensor({4, 4, 1}));
  zero.hh = Tensor({2, 3, 1});
  CHECK_THROWS_AS(idwt2(zero), ShapeError);
}

TEST_CASE("perfect reconstruction, Parseval and linearity") {
  CounterRng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t h = 2 * (1 + rng.index(6)), w = 2 * (1 + rng.index(6)), c = 1 + rng.index(3);
    const Tensor x = oracle::random_tensor({h, w, c}, rng, -5, 5);
    const Subbands s = dwt2(x);
    REQUIRE(s.ll.dims() == std::vector<std::size_t>{h / 2, w / 2, c});
    REQUIRE(max_abs_diff(idwt2(s), x) < 1e-9);
    REQUIRE(std::abs(band_energy(s) - sum_squares(x)) <= 1e-9 * sum_squares(x));

    const Tensor y = oracle::random_tensor({h, w, c}, rng, -5, 5);
    const double a = rng.uniform(-3, 3);
    const Subbands lhs = dwt2(add(scale(x, a), y)), sy = dwt2(y);
    REQUIRE(max_abs_diff(lhs.ll, add(scale(s.ll, a), sy.ll)) < 1e-9);
    REQUIRE(max_abs_diff(lhs.lh, add(scale(s.lh, a), sy.lh)) < 1e-9);
    REQUIRE(max_abs_diff(lhs.hl, add(scale(s.hl, a), sy.hl)) < 1e-9);
    REQUIRE(max_abs_diff(lhs.hh, add(scale(s.hh, a), sy.hh)) < 1e-9);

    REQUIRE(max_abs_diff(idwt2(band_filter(s, {Band::LL})), block_average(x)) < 1e-9);
  }
}

TEST_CASE("band_filter") {
  CounterRng rng(2);
  const Subbands s = dwt2(oracle::random_tensor({4, 4, 2}, rng));
  const Subbands all = band_filter(s, BandSet::all());
  CHECK(all.ll == s.ll);
  CHECK(all.hh == s.hh);
  const Subbands none = band_filter(s, BandSet::none());
  CHECK(band_energy(none) == 0.0);
  const Subbands flat = dwt2(Tensor({4, 4, 1}, 2.0));
  CHECK(max_abs_diff(idwt2(band_filter(flat, {Band::LL})), Tensor({4, 4, 1}, 2.0)) < 1e-12);
  const Subbands lh_only = band_filter(s, {Band::LH});
  CHECK(sum_squares(lh_only.ll) == 0.0);
  CHECK(lh_only.lh == s.lh);
}

TEST_CASE("keeping LL removes checkerboard noise") {
  CounterRng rng(31);
  // Smooth ramp constant on each 2x2 block, so all of it lives in LL.
  Tensor clean({8, 8, 1});
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < 8; ++c) clean.at(r, c, 0) = static_cast<double>(r / 2) + 0.5 * static_cast<double>(c / 2);
  Tensor noisy = clean;
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < 8; ++c) noisy.at(r, c, 0) += ((r + c) % 2 ? -0.3 : 0.3);
  const Subbands bands = dwt2(noisy);
  CHECK(sum_squares(bands.lh) + sum_squares(bands.hl) < 1e-20);  // a checkerboard is pure HH
  const Tensor denoised = idwt2(band_filter(bands, {Band::LL}));
  CHECK(mean_squared_error(denoised, clean) < mean_squared_error(noisy, clean));
  CHECK(mean_squared_error(denoised, clean) < 1e-20);
}

TEST_CASE("band set names round trip") {
  const BandSet s{Band::LL, Band::HH};
  CHECK(s.to_string() == "LL,HH");
  CHECK(parse_band_set("LL,HH") == s);
  CHECK(parse_band_set(BandSet::all().to_string()) == BandSet::all());
  CHECK_THROWS(parse_band_set("LL,XX"));
}
