#include "gf/inr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gf/binio.hpp"
#include "gf/parallel.hpp"
#include "gf/rng.hpp"
#include "gf/volume_io.hpp"

namespace gf {

double gabor_activation(double z, double omega0, double sigma0) {
  const double g = sigma0 * z;
  return std::cos(omega0 * z) * std::exp(-g * g);
}

double gabor_activation_derivative(double z, double omega0, double sigma0) {
  const double g = sigma0 * z;
  const double env = std::exp(-g * g);
  return -env * (omega0 * std::sin(omega0 * z) + 2.0 * sigma0 * sigma0 * z * std::cos(omega0 * z));
}

InrModel::InrModel(int layers, int hidden_width, double omega0, double sigma0)
    : omega0_(omega0), sigma0_(sigma0) {
  if (layers < 2) throw inr_error("InrModel: need at least 2 linear layers");
  if (hidden_width < 1) throw inr_error("InrModel: hidden width must be >= 1");
  widths_.push_back(3);
  for (int l = 0; l < layers - 1; ++l) widths_.push_back(hidden_width);
  widths_.push_back(kInrScans);

  std::size_t off = 0;
  for (int l = 0; l < layer_count(); ++l) {
    w_off_.push_back(off);
    off += static_cast<std::size_t>(widths_[l + 1]) * widths_[l];
    b_off_.push_back(off);
    off += widths_[l + 1];
  }
  params_.assign(off, 0.0);
}

void InrModel::init_parameters(std::uint64_t seed) {
  Rng rng(seed);
  for (int l = 0; l < layer_count(); ++l) {
    const int fan_in = widths_[l];
    const bool head = (l == layer_count() - 1);
    const double bound = std::sqrt(6.0 / fan_in) / (head ? 1.0 : omega0_);
    double* w = params_.data() + w_off_[l];
    const std::size_t nw = static_cast<std::size_t>(widths_[l + 1]) * fan_in;
    for (std::size_t i = 0; i < nw; ++i) w[i] = (2.0 * rng.uniform() - 1.0) * bound;
    // biases stay zero
  }
}

std::array<double, 3> InrModel::normalize_point(const Vec3& p) const {
  std::array<double, 3> c;
  for (int a = 0; a < 3; ++a) {
    const double span = world_hi[a] - world_lo[a];
    c[a] = span > 0 ? 2.0 * (p[a] - world_lo[a]) / span - 1.0 : 0.0;
  }
  return c;
}

double InrModel::denormalize(double y, int scan) const {
  const auto& r = scan_range[scan];
  return y * (r[1] - r[0]) + r[0];
}

std::array<double, kInrScans> InrModel::forward(const std::array<double, 3>& c) const {
  const int L = layer_count();
  std::vector<double> a(c.begin(), c.end()), next;
  for (int l = 0; l < L; ++l) {
    const int nin = widths_[l], nout = widths_[l + 1];
    next.assign(nout, 0.0);
    const double* w = params_.data() + w_off_[l];
    const double* b = params_.data() + b_off_[l];
    for (int o = 0; o < nout; ++o) {
      double acc = b[o];
      const double* wr = w + static_cast<std::size_t>(o) * nin;
      for (int i = 0; i < nin; ++i) acc += wr[i] * a[i];
      next[o] = (l < L - 1) ? gabor_activation(acc, omega0_, sigma0_) : acc;
    }
    a.swap(next);
  }
  return {a[0], a[1], a[2]};
}

namespace {

// Per-worker buffers for one forward/backward pass over a span of samples.
struct Workspace {
  std::vector<std::vector<double>> pre;   // z_l per layer
  std::vector<std::vector<double>> act;   // a_l per layer (act[0] = input)
  std::vector<double> delta, delta_prev;
  std::vector<double> grad;               // parameter-shaped accumulator
  double loss = 0.0;

  void reset(const InrModel& m) {
    const auto& w = m.widths();
    pre.resize(w.size() - 1);
    act.resize(w.size());
    act[0].resize(3);
    for (std::size_t l = 0; l + 1 < w.size(); ++l) {
      pre[l].assign(w[l + 1], 0.0);
      act[l + 1].assign(w[l + 1], 0.0);
    }
    delta.clear();
    delta_prev.clear();
    grad.assign(m.parameters().size(), 0.0);
    loss = 0.0;
  }
};

void accumulate_sample(const InrModel& m, const TrainSample& s, double inv_batch, Workspace& ws) {
  const auto& widths = m.widths();
  const int L = static_cast<int>(widths.size()) - 1;
  const auto& params = m.parameters();
  const double w0 = m.omega0(), s0 = m.sigma0();

  for (int a = 0; a < 3; ++a) ws.act[0][a] = s.coord[a];
  for (int l = 0; l < L; ++l) {
    const int nin = widths[l], nout = widths[l + 1];
    const double* w = params.data() + m.weight_offset(l);
    const double* b = params.data() + m.bias_offset(l);
    const double* in = ws.act[l].data();
    double* z = ws.pre[l].data();
    double* out = ws.act[l + 1].data();
    for (int o = 0; o < nout; ++o) {
      double acc = b[o];
      const double* wr = w + static_cast<std::size_t>(o) * nin;
      for (int i = 0; i < nin; ++i) acc += wr[i] * in[i];
      z[o] = acc;
      out[o] = (l < L - 1) ? gabor_activation(acc, w0, s0) : acc;
    }
  }

  const int k = s.scan;
  const double err = ws.act[L][k] - s.value;
  ws.loss += err * err * inv_batch;

  // Backward. Output layer: only channel k carries gradient.
  ws.delta.assign(widths[L], 0.0);
  ws.delta[k] = 2.0 * err * inv_batch;

  for (int l = L - 1; l >= 0; --l) {
    const int nin = widths[l], nout = widths[l + 1];
    const double* w = params.data() + m.weight_offset(l);
    double* gw = ws.grad.data() + m.weight_offset(l);
    double* gb = ws.grad.data() + m.bias_offset(l);
    const double* in = ws.act[l].data();

    if (l > 0) {
      ws.delta_prev.assign(nin, 0.0);
    }
    for (int o = 0; o < nout; ++o) {
      const double dz = ws.delta[o];
      if (dz == 0.0) continue;
      double* gwr = gw + static_cast<std::size_t>(o) * nin;
      const double* wr = w + static_cast<std::size_t>(o) * nin;
      for (int i = 0; i < nin; ++i) {
        gwr[i] += dz * in[i];
        if (l > 0) ws.delta_prev[i] += dz * wr[i];
      }
      gb[o] += dz;
    }
    if (l > 0) {
      // push through the activation of layer l-1
      const double* z = ws.pre[l - 1].data();
      for (int i = 0; i < nin; ++i) {
        ws.delta_prev[i] *= gabor_activation_derivative(z[i], w0, s0);
      }
      ws.delta.swap(ws.delta_prev);
    }
  }
}

constexpr std::int64_t kInrChunk = 512;

}  // namespace

double inr_loss_and_gradient(const InrModel& m, std::span<const TrainSample> batch, std::vector<double>& gradient) {
  if (batch.empty()) throw inr_error("inr_loss_and_gradient: empty batch");
  gradient.assign(m.parameters().size(), 0.0);
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  const std::int64_t n = static_cast<std::int64_t>(batch.size());
  const std::int64_t n_chunks = (n + kInrChunk - 1) / kInrChunk;
  // One workspace per chunk; reduced in chunk order, so the result does not
  // depend on the worker count.
  std::vector<Workspace> ws(static_cast<std::size_t>(n_chunks));
  parallel_chunks(n, kInrChunk, [&](std::int64_t chunk, std::int64_t b, std::int64_t e) {
    Workspace& w = ws[static_cast<std::size_t>(chunk)];
    w.reset(m);
    for (std::int64_t i = b; i < e; ++i) accumulate_sample(m, batch[static_cast<std::size_t>(i)], inv_batch, w);
  });

  double loss = 0.0;
  for (const auto& w : ws) {
    loss += w.loss;
    for (std::size_t i = 0; i < gradient.size(); ++i) gradient[i] += w.grad[i];
  }
  return loss;
}

double inr_loss(const InrModel& m, std::span<const TrainSample> batch) {
  if (batch.empty()) throw inr_error("inr_loss: empty batch");
  double acc = 0.0;
  for (const auto& s : batch) {
    const auto y = m.forward({s.coord[0], s.coord[1], s.coord[2]});
    const double err = y[s.scan] - s.value;
    acc += err * err;
  }
  return acc / static_cast<double>(batch.size());
}

TrainSet build_train_set(const std::array<Volume, kInrScans>& scans) {
  TrainSet set;
  // Union of the voxel-center boxes; also check the scans overlap at all.
  Vec3 lo = {1e300, 1e300, 1e300}, hi = {-1e300, -1e300, -1e300};
  Vec3 ilo = {-1e300, -1e300, -1e300}, ihi = {1e300, 1e300, 1e300};
  for (const auto& v : scans) {
    const auto [l, h] = center_bounds(v);
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], l[a]);
      hi[a] = std::max(hi[a], h[a]);
      ilo[a] = std::max(ilo[a], l[a]);
      ihi[a] = std::min(ihi[a], h[a]);
    }
  }
  for (int a = 0; a < 3; ++a) {
    if (ihi[a] < ilo[a]) {
      throw inr_error("build_train_set: scans do not overlap in world space (mismatched frames)");
    }
    if (hi[a] <= lo[a]) hi[a] = lo[a] + 1.0;
  }
  set.world_lo = lo;
  set.world_hi = hi;

  std::size_t total = 0;
  for (const auto& v : scans) total += v.voxel_count();
  set.samples.reserve(total);

  for (int s = 0; s < kInrScans; ++s) {
    const Volume& v = scans[s];
    const auto [mn, mx] = std::minmax_element(v.data.begin(), v.data.end());
    const double vmin = *mn, vmax = *mx;
    const double range = vmax - vmin;
    set.scan_range[s] = {vmin, vmax};
    const double inv_range = range > 1e-12 ? 1.0 / range : 0.0;
    for (int k = 0; k < v.dims[2]; ++k) {
      for (int j = 0; j < v.dims[1]; ++j) {
        for (int i = 0; i < v.dims[0]; ++i) {
          const Vec3 p = {v.origin[0] + i * v.spacing[0], v.origin[1] + j * v.spacing[1],
                          v.origin[2] + k * v.spacing[2]};
          TrainSample ts;
          for (int a = 0; a < 3; ++a) {
            ts.coord[a] = static_cast<float>(2.0 * (p[a] - lo[a]) / (hi[a] - lo[a]) - 1.0);
          }
          const double raw = v.at(i, j, k);
          ts.value = static_cast<float>(inv_range > 0 ? (raw - vmin) * inv_range : 0.5);
          ts.scan = static_cast<std::uint8_t>(s);
          set.samples.push_back(ts);
        }
      }
    }
  }
  return set;
}

namespace {

struct Adam {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<double> m, v;
  long t = 0;

  void init(std::size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
    t = 0;
  }

  void step(std::vector<double>& params, const std::vector<double>& grad, double lr) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = grad[i];
      m[i] = beta1 * m[i] + (1.0 - beta1) * g;
      v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
      params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
};

}  // namespace

InrTrainResult train_inr(const std::array<Volume, kInrScans>& scans, const InrConfig& cfg) {
  if (cfg.epochs < 1 || cfg.batch < 1) throw inr_error("train_inr: epochs and batch must be >= 1");
  TrainSet set = build_train_set(scans);

  InrTrainResult result;
  result.model = InrModel(cfg.layers, cfg.hidden_width, cfg.omega0, cfg.sigma0);
  result.model.init_parameters(substream_seed(cfg.seed, "inr_init"));
  result.model.world_lo = set.world_lo;
  result.model.world_hi = set.world_hi;
  result.model.scan_range = set.scan_range;

  InrModel& model = result.model;
  Adam adam;
  adam.init(model.parameters().size());

  Rng shuffle_rng(substream_seed(cfg.seed, "inr_shuffle"));
  std::vector<std::uint32_t> order(set.samples.size());
  std::iota(order.begin(), order.end(), 0u);

  std::vector<TrainSample> batch;
  std::vector<double> grad;
  const double pi = 3.14159265358979323846;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr0 * 0.5 * (1.0 + std::cos(pi * epoch / cfg.epochs));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch);
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(set.samples[order[i]]);
      const double loss = inr_loss_and_gradient(model, batch, grad);
      adam.step(model.parameters(), grad, lr);
      epoch_loss += loss;
      ++n_batches;
    }
    epoch_loss /= static_cast<double>(n_batches);
    if (!std::isfinite(epoch_loss)) {
      throw inr_error("train_inr: non-finite loss at epoch " + std::to_string(epoch));
    }
    result.epoch_loss.push_back(epoch_loss);
    if (cfg.verbose) {
      std::fprintf(stderr, "inr epoch %3d/%d  lr %.3e  loss %.6e\n", epoch + 1, cfg.epochs, lr, epoch_loss);
    }
  }

  if (result.epoch_loss.back() > cfg.max_final_loss) {
    throw inr_error("train_inr: final loss " + std::to_string(result.epoch_loss.back()) +
                    " above convergence ceiling " + std::to_string(cfg.max_final_loss));
  }
  return result;
}

ChannelPolicy ChannelPolicy::from_string(const std::string& s) {
  if (s == "axial") return single(0);
  if (s == "sagittal") return single(1);
  if (s == "coronal") return single(2);
  if (s == "mean") return mean();
  throw inr_error("unknown channel policy: " + s + " (want axial|sagittal|coronal|mean)");
}

std::string ChannelPolicy::to_string() const {
  if (kind == Kind::Mean) return "mean";
  switch (scan) {
    case 0: return "axial";
    case 1: return "sagittal";
    default: return "coronal";
  }
}

Volume sample_inr_volume(const InrModel& m, const Index3& dims, const Vec3& lo, const Vec3& hi,
                         const ChannelPolicy& policy) {
  Vec3 spacing;
  for (int a = 0; a < 3; ++a) {
    spacing[a] = dims[a] > 1 ? (hi[a] - lo[a]) / (dims[a] - 1) : 1.0;
    if (!(spacing[a] > 0)) spacing[a] = 1.0;
  }
  Volume out(dims, spacing, lo);
  const std::int64_t n = static_cast<std::int64_t>(out.voxel_count());
  parallel_for(n, [&](std::int64_t idx) {
    const int i = static_cast<int>(idx % dims[0]);
    const int j = static_cast<int>((idx / dims[0]) % dims[1]);
    const int k = static_cast<int>(idx / (static_cast<std::int64_t>(dims[0]) * dims[1]));
    const Vec3 p = {lo[0] + i * spacing[0], lo[1] + j * spacing[1], lo[2] + k * spacing[2]};
    const auto y = m.forward(m.normalize_point(p));
    double value;
    if (policy.kind == ChannelPolicy::Kind::Single) {
      value = m.denormalize(y[policy.scan], policy.scan);
    } else {
      value = 0.0;
      for (int s = 0; s < kInrScans; ++s) value += m.denormalize(y[s], s);
      value /= kInrScans;
    }
    out.data[static_cast<std::size_t>(idx)] = static_cast<float>(value);
  }, 4096);

  for (float v : out.data) {
    if (!std::isfinite(v)) throw inr_error("sample_inr_volume: non-finite output");
  }
  return out;
}

void save_inr(const InrModel& m, const std::string& path) {
  std::string out;
  out.append("GINR", 4);
  bin::put_le<std::uint32_t>(out, 1);
  bin::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.layer_count()));
  for (int w : m.widths()) bin::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(w));
  bin::put_le<double>(out, m.omega0());
  bin::put_le<double>(out, m.sigma0());
  for (int a = 0; a < 3; ++a) bin::put_le<double>(out, m.world_lo[a]);
  for (int a = 0; a < 3; ++a) bin::put_le<double>(out, m.world_hi[a]);
  for (int s = 0; s < kInrScans; ++s) {
    bin::put_le<double>(out, m.scan_range[s][0]);
    bin::put_le<double>(out, m.scan_range[s][1]);
  }
  for (double p : m.parameters()) bin::put_le<float>(out, static_cast<float>(p));
  bin::write_file_bytes(path, out);
}

InrModel load_inr(const std::string& path) {
  const auto bytes = bin::read_file_bytes(path);
  bin::Reader<io_error> r(bytes, path);
  r.expect_magic("GINR");
  const auto version = r.take<std::uint32_t>();
  if (version != 1) throw io_error(path + ": unsupported GINR version");
  const auto layers = r.take<std::uint32_t>();
  if (layers < 2 || layers > 64) throw io_error(path + ": implausible layer count");
  std::vector<int> widths(layers + 1);
  for (auto& w : widths) {
    w = static_cast<int>(r.take<std::uint32_t>());
    if (w < 1 || w > 65536) throw io_error(path + ": implausible layer width");
  }
  const double omega0 = r.take<double>();
  const double sigma0 = r.take<double>();
  if (widths.front() != 3 || widths.back() != kInrScans) throw io_error(path + ": unexpected in/out widths");

  InrModel m(static_cast<int>(layers), widths[1], omega0, sigma0);
  if (m.widths() != widths) throw io_error(path + ": non-uniform hidden widths are not supported");
  for (int a = 0; a < 3; ++a) m.world_lo[a] = r.take<double>();
  for (int a = 0; a < 3; ++a) m.world_hi[a] = r.take<double>();
  for (int s = 0; s < kInrScans; ++s) {
    m.scan_range[s][0] = r.take<double>();
    m.scan_range[s][1] = r.take<double>();
  }
  for (auto& p : m.parameters()) p = r.take<float>();
  return m;
}

}  // namespace gf
