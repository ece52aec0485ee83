#include <doctest.h>

#include <cmath>

#include "gf/rng.hpp"
#include "gf/wavelet3.hpp"
#include "test_helpers.hpp"

using namespace gf;

namespace {

template <typename T>
std::vector<T> random_field(std::size_t n, std::uint64_t seed) {
  std::vector<T> v(n);
  Rng rng(seed);
  for (auto& x : v) x = static_cast<T>(rng.normal());
  return v;
}

template <typename T>
double band_energy(const WaveletCoeffs<T>& c) {
  double e = 0.0;
  for (const auto& band : c.bands) {
    for (T x : band) e += static_cast<double>(x) * x;
  }
  return e;
}

}  // namespace

TEST_CASE("constant 2^3 volume concentrates in LLL") {
  // Orthonormal Haar: a constant v over 8 voxels becomes one LLL coefficient
  // v * 2^(3/2); hand-computed from three (a+b)/sqrt(2) passes.
  const double v = 1.7;
  std::vector<double> data(8, v);
  const auto c = dwt3<double>(data, {2, 2, 2}, 1);
  CHECK(c.band(0, LLL)[0] == doctest::Approx(v * std::pow(2.0, 1.5)).epsilon(1e-12));
  for (int s = 1; s < kSubbands; ++s) {
    CHECK(std::abs(c.band(0, s)[0]) < 1e-12);
  }
}

TEST_CASE("zero volume maps to zero coefficients") {
  std::vector<float> data(4 * 4 * 4, 0.0f);
  const auto c = dwt3<float>(data, {4, 4, 4}, 1);
  for (const auto& band : c.bands) {
    for (float x : band) CHECK(x == 0.0f);
  }
}

TEST_CASE("single LLL unit coefficient reconstructs a constant block") {
  WaveletCoeffs<double> c;
  c.source_dims = {2, 2, 2};
  c.channels = 1;
  c.bands.assign(8, std::vector<double>(1, 0.0));
  c.bands[LLL][0] = 1.0;
  const auto back = idwt3(c);
  for (double x : back) {
    CHECK(x == doctest::Approx(std::pow(2.0, -1.5)).epsilon(1e-12));
  }
}

TEST_CASE("perfect reconstruction") {
  SUBCASE("float, random 16^3 multi-channel") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const int channels = 1 + static_cast<int>(seed % 3);
      const auto data = random_field<float>(static_cast<std::size_t>(16 * 16 * 16) * channels, seed);
      const auto back = idwt3(dwt3<float>(data, {16, 16, 16}, channels));
      double max_err = 0.0;
      for (std::size_t i = 0; i < data.size(); ++i) {
        max_err = std::max(max_err, std::abs(static_cast<double>(back[i]) - data[i]));
      }
      CHECK(max_err < 1e-6);
    }
  }

  SUBCASE("double, tighter tolerance") {
    const auto data = random_field<double>(16 * 16 * 16, 99);
    const auto back = idwt3(dwt3<double>(data, {16, 16, 16}, 1));
    double max_err = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      max_err = std::max(max_err, std::abs(back[i] - data[i]));
    }
    CHECK(max_err < 1e-12);
  }

  SUBCASE("non-cubic even dims") {
    const auto data = random_field<double>(4 * 6 * 8, 3);
    const auto back = idwt3(dwt3<double>(data, {4, 6, 8}, 1));
    for (std::size_t i = 0; i < data.size(); ++i) {
      CHECK(back[i] == doctest::Approx(data[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("Parseval energy preservation") {
  const auto data = random_field<double>(8 * 8 * 8, 21);
  double energy_in = 0.0;
  for (double x : data) energy_in += x * x;
  const auto c = dwt3<double>(data, {8, 8, 8}, 1);
  CHECK(band_energy(c) == doctest::Approx(energy_in).epsilon(1e-6));
}

TEST_CASE("linearity") {
  const auto x = random_field<double>(8 * 8 * 8, 1);
  const auto y = random_field<double>(8 * 8 * 8, 2);
  const double a = 1.3, b = -0.7;
  std::vector<double> mix(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) mix[i] = a * x[i] + b * y[i];

  const auto cx = dwt3<double>(x, {8, 8, 8}, 1);
  const auto cy = dwt3<double>(y, {8, 8, 8}, 1);
  const auto cm = dwt3<double>(mix, {8, 8, 8}, 1);
  for (int s = 0; s < kSubbands; ++s) {
    for (std::size_t i = 0; i < cm.band(0, s).size(); ++i) {
      CHECK(cm.band(0, s)[i] == doctest::Approx(a * cx.band(0, s)[i] + b * cy.band(0, s)[i]).epsilon(1e-9));
    }
  }
}

TEST_CASE("odd dims are rejected, as are inconsistent subbands") {
  std::vector<float> data(3 * 4 * 4, 0.0f);
  CHECK_THROWS_AS(dwt3<float>(data, {3, 4, 4}, 1), wavelet_error);

  WaveletCoeffs<float> c;
  c.source_dims = {4, 4, 4};
  c.channels = 1;
  c.bands.assign(8, std::vector<float>(8, 0.0f));
  c.bands[3].resize(7);  // wrong shape
  CHECK_THROWS_AS(idwt3(c), wavelet_error);
}

TEST_CASE("pack/unpack round trip") {
  const auto data = random_field<float>(static_cast<std::size_t>(8 * 8 * 8) * 5, 77);
  const auto c = dwt3<float>(data, {8, 8, 8}, 5);
  const auto packed = pack_coeffs(c);
  CHECK(packed.size() == c.bands.size() * c.band_size());
  const auto c2 = unpack_coeffs(packed, {8, 8, 8}, 5);
  const auto back = idwt3(c2);
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(back[i] == doctest::Approx(data[i]).epsilon(1e-5));
  }
}
