#include <doctest.h>

#include <cmath>

#include "gf/phantom.hpp"
#include "test_helpers.hpp"

using namespace gf;

TEST_CASE("phantom analytic closed forms") {
  TrochleaPhantomSpec spec;
  spec.condyle_half_width = 10.0;
  spec.groove_depth = 10.0;
  CHECK(spec.analytic_sulcus_angle_deg() == doctest::Approx(90.0));

  spec.condyle_half_width = 20.0;
  spec.groove_depth = 3.0;
  CHECK(spec.analytic_sulcus_angle_deg() == doctest::Approx(2.0 * std::atan(20.0 / 3.0) * 180.0 / M_PI));
  CHECK(spec.analytic_sulcus_angle_deg() == doctest::Approx(162.7).epsilon(0.01));

  spec.groove_depth = 0.0;
  CHECK(spec.analytic_sulcus_angle_deg() == doctest::Approx(180.0));
}

TEST_CASE("phantom geometry") {
  auto ph = gft::default_phantom(64, 1.0, 10.0, 5.0);
  ph.labels.validate();
  ph.intensity.validate();

  SUBCASE("contains all expected labels") {
    std::array<std::size_t, kLabelCount> counts{};
    for (auto l : ph.labels.labels) counts[static_cast<std::size_t>(l)]++;
    CHECK(counts[kFemur] > 1000);
    CHECK(counts[kPatella] > 50);
    CHECK(counts[kBackground] > 1000);
    CHECK(counts[kTibia] == 0);
  }

  SUBCASE("groove carved into the anterior surface") {
    // at the groove center the top femur voxel sits d lower than the plateau
    const int kc = 32;
    auto top_femur_y = [&](int i) {
      for (int j = ph.labels.dims[1] - 1; j >= 0; --j) {
        if (ph.labels.at(i, j, kc) == kFemur) return j;
      }
      return -1;
    };
    const int center = 32;
    const int plateau = 32 - 15;  // well outside the groove half-width
    CHECK(top_femur_y(plateau) - top_femur_y(center) == doctest::Approx(5.0).epsilon(0.25));
  }

  SUBCASE("d=0 gives a flat anterior surface") {
    auto flat = gft::default_phantom(48, 1.0, 10.0, 0.0);
    int first_top = -1;
    for (int i = 10; i < 38; ++i) {
      int top = -1;
      for (int j = flat.labels.dims[1] - 1; j >= 0; --j) {
        if (flat.labels.at(i, j, 24) == kFemur) {
          top = j;
          break;
        }
      }
      if (top < 0) continue;
      if (first_top < 0) first_top = top;
      CHECK(top == first_top);
    }
  }

  SUBCASE("same seed is bit-identical, different seed is not") {
    auto a = gft::default_phantom(32, 2.0, 10.0, 5.0, 7);
    auto b = gft::default_phantom(32, 2.0, 10.0, 5.0, 7);
    auto c = gft::default_phantom(32, 2.0, 10.0, 5.0, 8);
    CHECK(a.intensity.data == b.intensity.data);
    CHECK(a.labels.labels == b.labels.labels);
    CHECK(a.intensity.data != c.intensity.data);
  }

  SUBCASE("geometry exceeding the field of view is an error") {
    TrochleaPhantomSpec spec;
    spec.bone_extent = {200.0, 24.0, 40.0};
    CHECK_THROWS_AS(generate_phantom(spec, {32, 32, 32}, {1, 1, 1}), std::invalid_argument);
  }

  SUBCASE("invariant validation") {
    TrochleaPhantomSpec spec;
    spec.groove_depth = spec.condyle_height;  // d < h violated
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec = {};
    spec.condyle_half_width = 0.0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  }
}

TEST_CASE("slab averaging") {
  auto ph = gft::default_phantom(64, 1.0, 10.0, 5.0);
  const Volume& gt = ph.intensity;

  SUBCASE("thickness == spacing is the identity") {
    const Volume out = slab_average(gt, {2, 1.0, {}});
    CHECK(out.dims == gt.dims);
    CHECK(out.data == gt.data);
  }

  SUBCASE("4x slabs equal brute-force slice means") {
    const Volume out = slab_average(gt, {2, 4.0, {}});
    CHECK(out.dims == Index3{64, 64, 16});
    CHECK(out.spacing[2] == doctest::Approx(4.0));
    CHECK(out.origin[2] == doctest::Approx(gt.origin[2] + 1.5));

    for (int k : {0, 3, 7, 15}) {
      for (int j : {0, 13, 63}) {
        for (int i : {5, 31, 60}) {
          double want = 0.0;
          for (int s = 0; s < 4; ++s) want += gt.at(i, j, 4 * k + s);
          want /= 4.0;
          CHECK(out.at(i, j, k) == doctest::Approx(want).epsilon(1e-6));
        }
      }
    }
  }

  SUBCASE("slab means conserve the global mean, bias applies affinely") {
    const AnisotropicSpec spec{0, 4.0, {1.1, 0.05}};
    const Volume out = slab_average(gt, spec);
    double mean_gt = 0.0, mean_out = 0.0;
    for (float v : gt.data) mean_gt += v;
    for (float v : out.data) mean_out += v;
    mean_gt /= static_cast<double>(gt.data.size());
    mean_out /= static_cast<double>(out.data.size());
    CHECK(mean_out == doctest::Approx(1.1 * mean_gt + 0.05).epsilon(1e-6));
  }

  SUBCASE("constant volume stays constant with the bias applied") {
    Volume c({8, 8, 8}, {1, 1, 1}, {0, 0, 0}, 2.5f);
    const Volume out = slab_average(c, {1, 2.0, {0.9, -0.1}});
    for (float v : out.data) CHECK(v == doctest::Approx(0.9 * 2.5 - 0.1));
  }

  SUBCASE("non-integral thickness ratio is an error") {
    CHECK_THROWS_AS(slab_average(gt, {2, 1.5, {}}), std::invalid_argument);
    CHECK_THROWS_AS(slab_average(gt, {2, 3.0, {}}), std::invalid_argument);  // 64 % 3 != 0
  }
}
