#include <doctest.h>

#include <cmath>

#include "gf/inr.hpp"
#include "gf/rng.hpp"
#include "gf/volume_io.hpp"
#include "test_helpers.hpp"

using namespace gf;

namespace {

std::vector<TrainSample> random_batch(std::size_t n, std::uint64_t seed) {
  std::vector<TrainSample> batch(n);
  Rng rng(seed);
  for (auto& s : batch) {
    for (int a = 0; a < 3; ++a) s.coord[a] = static_cast<float>(2.0 * rng.uniform() - 1.0);
    s.value = static_cast<float>(rng.uniform());
    s.scan = static_cast<std::uint8_t>(rng.below(3));
  }
  return batch;
}

// Central finite differences through the full loss.
double fd_gradient(InrModel& m, std::span<const TrainSample> batch, std::size_t param, double eps) {
  const double orig = m.parameters()[param];
  m.parameters()[param] = orig + eps;
  const double up = inr_loss(m, batch);
  m.parameters()[param] = orig - eps;
  const double down = inr_loss(m, batch);
  m.parameters()[param] = orig;
  return (up - down) / (2.0 * eps);
}

}  // namespace

TEST_CASE("gabor activation values and envelope") {
  CHECK(gabor_activation(0.0, 20.0, 10.0) == doctest::Approx(1.0));
  CHECK(gabor_activation(0.0, 3.0, 0.5) == doctest::Approx(1.0));
  CHECK(gabor_activation(1.0, M_PI, 0.0) == doctest::Approx(-1.0));

  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double z = 4.0 * (rng.uniform() - 0.5);
    const double s0 = 3.0 * rng.uniform();
    const double w0 = 30.0 * rng.uniform();
    CHECK(std::abs(gabor_activation(z, w0, s0)) <= std::exp(-(s0 * z) * (s0 * z)) + 1e-12);
  }
}

TEST_CASE("gabor derivative matches finite differences") {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const double z = 2.0 * (rng.uniform() - 0.5);
    const double w0 = 1.0 + 20.0 * rng.uniform();
    const double s0 = 0.2 + 5.0 * rng.uniform();
    const double eps = 1e-6;
    const double fd = (gabor_activation(z + eps, w0, s0) - gabor_activation(z - eps, w0, s0)) / (2 * eps);
    CHECK(gabor_activation_derivative(z, w0, s0) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("forward basics") {
  InrModel m(3, 8, 20.0, 10.0);
  m.init_parameters(1);

  SUBCASE("zeroed head outputs zero") {
    // the head is the last layer; zero its weights and biases
    InrModel z = m;
    const int L = z.layer_count();
    const auto& widths = z.widths();
    const std::size_t nw = static_cast<std::size_t>(widths[L]) * widths[L - 1];
    for (std::size_t i = 0; i < nw; ++i) z.parameters()[z.weight_offset(L - 1) + i] = 0.0;
    for (int i = 0; i < widths[L]; ++i) z.parameters()[z.bias_offset(L - 1) + i] = 0.0;
    const auto y = z.forward({0.3, -0.2, 0.9});
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0);
    CHECK(y[2] == 0.0);
  }

  SUBCASE("deterministic evaluation") {
    const auto y1 = m.forward({0.1, 0.2, 0.3});
    const auto y2 = m.forward({0.1, 0.2, 0.3});
    CHECK(y1 == y2);
  }
}

TEST_CASE("one-layer analytic gradient") {
  // Single linear layer (no activation): y = Wc + b; loss = (y_k - d)^2.
  // d loss / dW[k][i] = 2 (y_k - d) c_i, d loss / db[k] = 2 (y_k - d).
  InrModel m(2, 4, 20.0, 10.0);
  m.init_parameters(3);

  TrainSample s;
  s.coord = {0.25f, -0.5f, 0.75f};
  s.value = 0.4f;
  s.scan = 1;

  std::vector<double> grad;
  inr_loss_and_gradient(m, std::span<const TrainSample>(&s, 1), grad);

  // forward through the 2-layer model by hand
  const auto y = m.forward({s.coord[0], s.coord[1], s.coord[2]});
  const double err = 2.0 * (y[1] - s.value);

  // check the head layer gradient entries (layer 1)
  const int hidden = m.widths()[1];
  // hidden activations
  std::vector<double> h(static_cast<std::size_t>(hidden));
  for (int o = 0; o < hidden; ++o) {
    double acc = m.parameters()[m.bias_offset(0) + o];
    for (int i = 0; i < 3; ++i) {
      acc += m.parameters()[m.weight_offset(0) + static_cast<std::size_t>(o) * 3 + i] * s.coord[i];
    }
    h[static_cast<std::size_t>(o)] = gabor_activation(acc, m.omega0(), m.sigma0());
  }
  for (int i = 0; i < hidden; ++i) {
    const std::size_t idx = m.weight_offset(1) + static_cast<std::size_t>(1) * hidden + i;  // row k=1
    CHECK(grad[idx] == doctest::Approx(err * h[static_cast<std::size_t>(i)]).epsilon(1e-9));
  }
  CHECK(grad[m.bias_offset(1) + 1] == doctest::Approx(err).epsilon(1e-9));
  // untouched output rows have zero gradient
  CHECK(grad[m.bias_offset(1) + 0] == 0.0);
  CHECK(grad[m.bias_offset(1) + 2] == 0.0);
}

TEST_CASE("analytic gradients match central finite differences") {
  // width-8, 5 linear layers; eps 1e-4, rel tol 1e-3 on >= 99% of components
  InrModel m(5, 8, 20.0, 10.0);
  m.init_parameters(17);
  const auto batch = random_batch(16, 23);

  std::vector<double> grad;
  inr_loss_and_gradient(m, batch, grad);

  std::size_t checked = 0, ok = 0;
  Rng pick(5);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t p = static_cast<std::size_t>(pick.below(grad.size()));
    const double fd = fd_gradient(m, batch, p, 1e-4);
    const double an = grad[p];
    const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
    ++checked;
    if (std::abs(fd - an) / denom < 1e-3) ++ok;
  }
  CHECK(static_cast<double>(ok) / static_cast<double>(checked) >= 0.99);
}

TEST_CASE("loss is zero at a perfect fit and batch equals loop") {
  InrModel m(3, 8, 20.0, 10.0);
  m.init_parameters(29);

  SUBCASE("targets equal to outputs give zero loss and zero gradient") {
    auto batch = random_batch(8, 31);
    for (auto& s : batch) {
      const auto y = m.forward({s.coord[0], s.coord[1], s.coord[2]});
      s.value = static_cast<float>(y[s.scan]);
    }
    std::vector<double> grad;
    const double loss = inr_loss_and_gradient(m, batch, grad);
    CHECK(loss < 1e-12);
    double gmax = 0.0;
    for (double g : grad) gmax = std::max(gmax, std::abs(g));
    CHECK(gmax < 1e-6);
  }

  SUBCASE("batched loss equals mean of per-sample losses") {
    const auto batch = random_batch(4096, 37);
    const double batched = inr_loss(m, batch);
    double acc = 0.0;
    for (const auto& s : batch) {
      acc += inr_loss(m, std::span<const TrainSample>(&s, 1));
    }
    CHECK(batched == doctest::Approx(acc / batch.size()).epsilon(1e-9));
  }
}

TEST_CASE("training on constant scans reproduces the constant") {
  const Index3 dims = {12, 12, 12};
  std::array<Volume, 3> scans = {Volume(dims, {1, 1, 1}, {0, 0, 0}, 0.75f),
                                 Volume(dims, {1, 1, 1}, {0, 0, 0}, 0.75f),
                                 Volume(dims, {1, 1, 1}, {0, 0, 0}, 0.75f)};
  InrConfig cfg;
  cfg.hidden_width = 16;
  cfg.layers = 3;
  cfg.epochs = 10;
  cfg.batch = 512;
  cfg.seed = 3;

  const InrTrainResult r = train_inr(scans, cfg);
  const Volume out = sample_inr_volume(r.model, {8, 8, 8}, r.model.world_lo, r.model.world_hi,
                                       ChannelPolicy::single(0));
  for (float v : out.data) {
    CHECK(v == doctest::Approx(0.75f).epsilon(1e-3));
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  auto make_scans = [] {
    auto ph = gft::default_phantom(16, 4.0, 8.0, 4.0, 5);
    return std::array<Volume, 3>{slab_average(ph.intensity, {2, 8.0, {}}),
                                 slab_average(ph.intensity, {0, 8.0, {}}),
                                 slab_average(ph.intensity, {1, 8.0, {}})};
  };
  InrConfig cfg;
  cfg.hidden_width = 8;
  cfg.layers = 3;
  cfg.epochs = 3;
  cfg.batch = 256;
  cfg.seed = 11;
  cfg.max_final_loss = 1.0;

  const auto scans = make_scans();
  const InrTrainResult a = train_inr(scans, cfg);
  const InrTrainResult b = train_inr(scans, cfg);
  CHECK(a.model.parameters() == b.model.parameters());
  CHECK(a.epoch_loss == b.epoch_loss);
}

TEST_CASE("mismatched world frames are rejected") {
  const Index3 dims = {8, 8, 8};
  std::array<Volume, 3> scans = {Volume(dims, {1, 1, 1}, {0, 0, 0}, 0.5f),
                                 Volume(dims, {1, 1, 1}, {1000, 0, 0}, 0.5f),
                                 Volume(dims, {1, 1, 1}, {0, 0, 0}, 0.5f)};
  CHECK_THROWS_AS(build_train_set(scans), inr_error);
}

TEST_CASE("sample ordering matches the x-fastest volume convention") {
  InrModel m(2, 4, 20.0, 10.0);
  m.init_parameters(41);
  m.world_lo = {0, 0, 0};
  m.world_hi = {1, 1, 1};
  for (auto& r : m.scan_range) r = {0.0, 1.0};

  const Volume out = sample_inr_volume(m, {2, 2, 2}, {0, 0, 0}, {1, 1, 1}, ChannelPolicy::single(0));
  REQUIRE(out.data.size() == 8);
  std::size_t n = 0;
  for (int k = 0; k < 2; ++k) {
    for (int j = 0; j < 2; ++j) {
      for (int i = 0; i < 2; ++i, ++n) {
        const Vec3 p = index_to_world(out, {i, j, k});
        const double want = m.denormalize(m.forward(m.normalize_point(p))[0], 0);
        CHECK(out.data[n] == doctest::Approx(want).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("GINR checkpoint round trip") {
  gft::TempDir tmp("ginr");
  InrModel m(3, 8, 22.0, 9.0);
  m.init_parameters(55);
  m.world_lo = {-3, -2, -1};
  m.world_hi = {3, 4, 5};
  m.scan_range = {{{0.0, 1.0}, {0.1, 0.9}, {-0.5, 2.0}}};

  save_inr(m, tmp.file("m.ginr"));
  const InrModel r = load_inr(tmp.file("m.ginr"));
  CHECK(r.widths() == m.widths());
  CHECK(r.omega0() == m.omega0());
  CHECK(r.world_lo == m.world_lo);
  CHECK(r.scan_range == m.scan_range);
  REQUIRE(r.parameters().size() == m.parameters().size());
  for (std::size_t i = 0; i < r.parameters().size(); ++i) {
    CHECK(r.parameters()[i] == doctest::Approx(m.parameters()[i]).epsilon(1e-6));
  }
  // sampling through the checkpoint stays close to the original
  const auto y0 = m.forward({0.2, 0.4, -0.3});
  const auto y1 = r.forward({0.2, 0.4, -0.3});
  for (int c = 0; c < 3; ++c) CHECK(y0[c] == doctest::Approx(y1[c]).epsilon(1e-4));
}
