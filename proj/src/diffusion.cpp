#include "gf/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "gf/binio.hpp"
#include "gf/volume_io.hpp"

namespace gf {

NoiseSchedule build_schedule(int T, double beta1, double betaT) {
  if (T < 1) throw diffusion_error("build_schedule: T must be >= 1");
  if (!(0.0 < beta1) || (T > 1 && !(beta1 < betaT)) || !(betaT < 1.0)) {
    throw diffusion_error("build_schedule: need 0 < beta1 < betaT < 1");
  }
  NoiseSchedule s;
  s.T = T;
  s.beta.resize(T);
  s.alpha.resize(T);
  s.alpha_bar.resize(T);
  s.post_coef_x0.resize(T);
  s.post_coef_xt.resize(T);
  s.post_var.resize(T);

  double abar = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double frac = T > 1 ? static_cast<double>(t - 1) / (T - 1) : 0.0;
    const double b = beta1 + frac * (betaT - beta1);
    const double a = 1.0 - b;
    const double abar_prev = abar;
    abar *= a;
    s.beta[t - 1] = b;
    s.alpha[t - 1] = a;
    s.alpha_bar[t - 1] = abar;
    // posterior q(x_{t-1} | x_t, x0); abar_0 = 1 makes beta_tilde_1 = 0.
    const double denom = 1.0 - abar;
    s.post_coef_x0[t - 1] = std::sqrt(abar_prev) * b / denom;
    s.post_coef_xt[t - 1] = std::sqrt(a) * (1.0 - abar_prev) / denom;
    s.post_var[t - 1] = (1.0 - abar_prev) / denom * b;
  }
  return s;
}

NoiseSchedule default_schedule(int T) {
  // Linear DDPM betas scaled by 1000/T keep the total signal decay roughly
  // constant; clamping keeps very short schedules (oracle tests) valid.
  const double scale = 1000.0 / T;
  const double betaT = std::min(0.02 * scale, 0.98);
  const double beta1 = std::min(1e-4 * scale, 0.5 * betaT);
  return build_schedule(T, beta1, betaT);
}

void forward_noise(const std::vector<float>& x0, int t, const std::vector<float>& eps, const NoiseSchedule& s,
                   std::vector<float>& xt) {
  if (t < 1 || t > s.T) throw diffusion_error("forward_noise: t out of range 1..T");
  if (eps.size() != x0.size()) throw diffusion_error("forward_noise: eps size mismatch");
  const double sa = std::sqrt(s.alpha_bar[t - 1]);
  const double sn = std::sqrt(1.0 - s.alpha_bar[t - 1]);
  xt.resize(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    xt[i] = static_cast<float>(sa * x0[i] + sn * eps[i]);
  }
}

// --- encoding ---------------------------------------------------------------

std::vector<float> encode_labels(const LabelVolume& labels) {
  const std::size_t n = labels.voxel_count();
  std::vector<float> enc(static_cast<std::size_t>(kLabelCount) * n, -1.0f);
  for (std::size_t i = 0; i < n; ++i) {
    const std::int32_t l = labels.labels[i];
    enc[static_cast<std::size_t>(l) * n + i] = 1.0f;
  }
  return enc;
}

LabelVolume decode_labels(const std::vector<float>& enc, const LabelVolume& frame) {
  const std::size_t n = frame.voxel_count();
  if (enc.size() != static_cast<std::size_t>(kLabelCount) * n) {
    throw diffusion_error("decode_labels: encoding size mismatch");
  }
  LabelVolume out(frame.dims, frame.spacing, frame.origin);
  for (std::size_t i = 0; i < n; ++i) {
    int best = 0;
    float best_v = enc[i];
    for (int c = 1; c < kLabelCount; ++c) {
      const float v = enc[static_cast<std::size_t>(c) * n + i];
      if (v > best_v) {
        best_v = v;
        best = c;
      }
    }
    out.labels[i] = best;
  }
  return out;
}

std::vector<float> labels_to_coeffs(const LabelVolume& labels) {
  auto coeffs = dwt3<float>(encode_labels(labels), labels.dims, kLabelCount);
  auto packed = pack_coeffs(coeffs);
  const float inv = static_cast<float>(1.0 / kCoeffScale);
  for (auto& v : packed) v *= inv;
  return packed;
}

LabelVolume coeffs_to_labels(const std::vector<float>& coeffs, const LabelVolume& frame) {
  std::vector<float> scaled(coeffs);
  const float k = static_cast<float>(kCoeffScale);
  for (auto& v : scaled) v *= k;
  auto unpacked = unpack_coeffs(scaled, frame.dims, kLabelCount);
  return decode_labels(idwt3(unpacked), frame);
}

// --- mask --------------------------------------------------------------------

LabelVolume build_mask(const LabelVolume& labels, const MaskOptions& opts) {
  Index3 lo = {labels.dims[0], labels.dims[1], labels.dims[2]};
  Index3 hi = {-1, -1, -1};
  for (int k = 0; k < labels.dims[2]; ++k) {
    for (int j = 0; j < labels.dims[1]; ++j) {
      for (int i = 0; i < labels.dims[0]; ++i) {
        if (labels.at(i, j, k) != kPatella) continue;
        lo = {std::min(lo[0], i), std::min(lo[1], j), std::min(lo[2], k)};
        hi = {std::max(hi[0], i), std::max(hi[1], j), std::max(hi[2], k)};
      }
    }
  }
  if (hi[0] < 0) throw diffusion_error("build_mask: no patella voxels present");

  LabelVolume mask(labels.dims, labels.spacing, labels.origin, 0);
  if (!opts.spherical) {
    Index3 off;
    for (int a = 0; a < 3; ++a) {
      off[a] = static_cast<int>(std::lround(opts.offset_mm / labels.spacing[a]));
      lo[a] = std::max(0, lo[a] - off[a]);
      hi[a] = std::min(labels.dims[a] - 1, hi[a] + off[a]);
    }
    for (int k = lo[2]; k <= hi[2]; ++k) {
      for (int j = lo[1]; j <= hi[1]; ++j) {
        for (int i = lo[0]; i <= hi[0]; ++i) mask.at(i, j, k) = 1;
      }
    }
  } else {
    // Ball dilation of the bbox: voxel is masked if within offset_mm of it.
    const double r2 = opts.offset_mm * opts.offset_mm;
    for (int k = 0; k < labels.dims[2]; ++k) {
      for (int j = 0; j < labels.dims[1]; ++j) {
        for (int i = 0; i < labels.dims[0]; ++i) {
          double d2 = 0.0;
          const int idx[3] = {i, j, k};
          for (int a = 0; a < 3; ++a) {
            double d = 0.0;
            if (idx[a] < lo[a]) d = (lo[a] - idx[a]) * labels.spacing[a];
            else if (idx[a] > hi[a]) d = (idx[a] - hi[a]) * labels.spacing[a];
            d2 += d * d;
          }
          if (d2 <= r2) mask.at(i, j, k) = 1;
        }
      }
    }
  }
  return mask;
}

LabelVolume apply_mask(const LabelVolume& labels, const LabelVolume& mask) {
  if (labels.dims != mask.dims) throw dimension_mismatch_error("apply_mask: dims differ");
  LabelVolume out = labels;
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    if (mask.labels[i] != 0) out.labels[i] = kBackground;
  }
  return out;
}

// --- training ----------------------------------------------------------------

namespace {

nn::Tensor<float> make_input(const std::vector<float>& xt, const std::vector<float>& cond,
                             const Index3& coeff_dims) {
  nn::Tensor<float> in(2 * kCoeffChannels, coeff_dims[2], coeff_dims[1], coeff_dims[0]);
  std::copy(xt.begin(), xt.end(), in.v.begin());
  std::copy(cond.begin(), cond.end(), in.v.begin() + xt.size());
  return in;
}

}  // namespace

WdmTrainer::WdmTrainer(const Index3& label_dims, const WdmConfig& cfg) : cfg_(cfg) {
  for (int a = 0; a < 3; ++a) {
    if (label_dims[a] % 4 != 0) {
      throw diffusion_error("WdmTrainer: label dims must be divisible by 4 (DWT + one pooling level)");
    }
  }
  model_.net.build(2 * kCoeffChannels, kCoeffChannels, cfg.width, substream_seed(cfg.seed, "wdm_init"));
  model_.schedule = default_schedule(cfg.T);
  model_.label_dims = label_dims;
  model_.offset_mm = cfg.offset_mm;
  model_.spherical_mask = cfg.spherical_mask;
  adam_.init(model_.net.parameters().size());
}

TrainStepInfo WdmTrainer::train_step(const LabelVolume& y0, Rng& rng) {
  if (y0.dims != model_.label_dims) throw diffusion_error("train_step: case dims differ from model dims");
  const Index3 cd = {y0.dims[0] / 2, y0.dims[1] / 2, y0.dims[2] / 2};

  const std::vector<float> x0 = labels_to_coeffs(y0);
  const LabelVolume mask = build_mask(y0, {model_.offset_mm, model_.spherical_mask});
  const std::vector<float> cond = labels_to_coeffs(apply_mask(y0, mask));

  const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(model_.schedule.T)));
  std::vector<float> eps(x0.size());
  for (auto& e : eps) e = static_cast<float>(rng.normal());
  std::vector<float> xt;
  forward_noise(x0, t, eps, model_.schedule, xt);

  nn::Tensor<float> input = make_input(xt, cond, cd);
  const auto& pred = model_.net.forward(input, t);

  // MSE between predicted and true x0, mean over elements.
  const std::size_t n = x0.size();
  nn::Tensor<float> gy(pred.c, pred.d, pred.h, pred.w);
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double err = static_cast<double>(pred.v[i]) - x0[i];
    loss += err * err * inv_n;
    gy.v[i] = static_cast<float>(2.0 * err * inv_n);
  }
  if (!std::isfinite(loss)) throw diffusion_error("train_step: non-finite loss");

  model_.net.zero_gradients();
  model_.net.backward(gy);
  adam_.step(model_.net.parameters(), model_.net.gradients(), cfg_.lr);
  return {loss, t};
}

WdmModel train_wdm(const std::vector<const LabelVolume*>& corpus, const WdmConfig& cfg) {
  if (corpus.empty()) throw diffusion_error("train_wdm: empty corpus");
  WdmTrainer trainer(corpus.front()->dims, cfg);
  Rng rng(substream_seed(cfg.seed, "wdm_train"));

  std::ofstream log;
  if (!cfg.log_path.empty()) {
    log.open(cfg.log_path, std::ios::trunc);
    if (!log) throw io_error("train_wdm: cannot open log " + cfg.log_path);
  }

  double running = 0.0;
  for (long it = 0; it < cfg.iterations; ++it) {
    const std::size_t pick = static_cast<std::size_t>(rng.below(corpus.size()));
    const TrainStepInfo step = trainer.train_step(*corpus[pick], rng);
    running += step.loss;
    if (log.is_open()) {
      log << "{\"iteration\":" << it << ",\"t\":" << step.t << ",\"loss\":" << step.loss << "}\n";
    }
    if (cfg.verbose && (it + 1) % 100 == 0) {
      std::fprintf(stderr, "wdm iter %ld/%ld  mean loss %.6f\n", it + 1, cfg.iterations, running / 100.0);
      running = 0.0;
    }
  }
  return trainer.take_model();
}

// --- checkpoint ---------------------------------------------------------------

void save_wdm(const WdmModel& m, const std::string& path) {
  std::string out;
  out.append("GWDM", 4);
  bin::put_le<std::uint32_t>(out, 1);
  bin::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.schedule.T));
  bin::put_le<double>(out, m.schedule.beta.front());
  bin::put_le<double>(out, m.schedule.beta.back());
  bin::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.net.width()));
  bin::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.net.in_channels()));
  bin::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.net.out_channels()));
  for (int a = 0; a < 3; ++a) bin::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.label_dims[a]));
  bin::put_le<double>(out, m.offset_mm);
  bin::put_le<std::uint8_t>(out, m.spherical_mask ? 1 : 0);
  for (float p : m.net.parameters()) bin::put_le<float>(out, p);
  bin::write_file_bytes(path, out);
}

WdmModel load_wdm(const std::string& path) {
  const auto bytes = bin::read_file_bytes(path);
  bin::Reader<io_error> r(bytes, path);
  r.expect_magic("GWDM");
  if (r.take<std::uint32_t>() != 1) throw io_error(path + ": unsupported GWDM version");
  const int T = static_cast<int>(r.take<std::uint32_t>());
  const double beta1 = r.take<double>();
  const double betaT = r.take<double>();
  const int width = static_cast<int>(r.take<std::uint32_t>());
  const int in_ch = static_cast<int>(r.take<std::uint32_t>());
  const int out_ch = static_cast<int>(r.take<std::uint32_t>());
  if (T < 1 || T > 100000 || width < 1 || width > 4096) throw io_error(path + ": implausible GWDM header");
  WdmModel m;
  for (int a = 0; a < 3; ++a) m.label_dims[a] = static_cast<int>(r.take<std::uint32_t>());
  m.offset_mm = r.take<double>();
  m.spherical_mask = r.take<std::uint8_t>() != 0;
  m.net.build(in_ch, out_ch, width, 0);
  m.schedule = build_schedule(T, beta1, betaT);
  for (auto& p : m.net.parameters()) p = r.take<float>();
  return m;
}

// --- sampling ----------------------------------------------------------------

std::vector<float> ConvDenoiser::predict_x0(const std::vector<float>& xt, const std::vector<float>& cond,
                                            const Index3& coeff_dims, int t) {
  nn::Tensor<float> input = make_input(xt, cond, coeff_dims);
  const auto& y = model_.net.forward(input, t);
  return y.v;
}

InpaintResult inpaint_labels(DenoiserBase& denoiser, const LabelVolume& original, const NoiseSchedule& schedule,
                             const MaskOptions& opts, Rng& rng) {
  for (int a = 0; a < 3; ++a) {
    if (original.dims[a] % 2 != 0) throw diffusion_error("inpaint_labels: label dims must be even");
  }
  const Index3 cd = {original.dims[0] / 2, original.dims[1] / 2, original.dims[2] / 2};

  const LabelVolume mask = build_mask(original, opts);
  const std::vector<float> cond = labels_to_coeffs(apply_mask(original, mask));
  const std::size_t n = cond.size();

  std::vector<float> x(n);
  for (auto& v : x) v = static_cast<float>(rng.normal());

  std::vector<float> x0_hat;
  for (int t = schedule.T; t >= 1; --t) {
    x0_hat = denoiser.predict_x0(x, cond, cd, t);
    if (x0_hat.size() != n) throw diffusion_error("inpaint_labels: denoiser output size mismatch");
    for (auto& v : x0_hat) {
      if (!std::isfinite(v)) {
        throw diffusion_error("inpaint_labels: non-finite state at step t=" + std::to_string(t));
      }
      v = std::clamp(v, -1.0f, 1.0f);
    }
    if (t > 1) {
      const double c0 = schedule.post_coef_x0[t - 1];
      const double ct = schedule.post_coef_xt[t - 1];
      const double sd = std::sqrt(schedule.post_var[t - 1]);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = static_cast<float>(c0 * x0_hat[i] + ct * x[i] + sd * rng.normal());
      }
    }
    // at t=1 the posterior mean equals x0_hat (abar_0 = 1), so we keep it
  }

  InpaintResult result;
  result.raw = coeffs_to_labels(x0_hat, original);
  result.mask = mask;
  result.composited = original;
  for (std::size_t i = 0; i < result.composited.labels.size(); ++i) {
    if (mask.labels[i] != 0) result.composited.labels[i] = result.raw.labels[i];
  }
  return result;
}

}  // namespace gf
