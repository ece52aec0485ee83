// Acceptance suite: one pass/fail line per criterion, exit 0 only if every
// requested criterion passes. Run all criteria with no arguments or a single
// one with `acceptance --only N`.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gf/diffusion.hpp"
#include "gf/inr.hpp"
#include "gf/mesh.hpp"
#include "gf/morphometrics.hpp"
#include "gf/phantom.hpp"
#include "gf/pipeline.hpp"
#include "gf/rng.hpp"
#include "gf/volume_io.hpp"
#include "gf/wavelet3.hpp"

namespace fs = std::filesystem;
using namespace gf;

namespace {

struct Check {
  bool ok = true;
  std::string detail;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string scratch_dir(const std::string& tag) {
  const auto dir = fs::temp_directory_path() / ("grooveforge_acceptance_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

// --- criterion 1: wavelet perfect reconstruction ------------------------------

Check criterion_wavelet() {
  Check c;
  double worst_recon = 0.0, worst_energy = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int channels = 1 + trial % 5;
    Rng rng(1000 + static_cast<std::uint64_t>(trial));
    std::vector<float> data(static_cast<std::size_t>(16 * 16 * 16) * channels);
    for (auto& x : data) x = static_cast<float>(rng.normal());

    const auto coeffs = dwt3<float>(data, {16, 16, 16}, channels);
    const auto back = idwt3(coeffs);

    double energy_in = 0.0, energy_coeff = 0.0;
    for (float x : data) energy_in += static_cast<double>(x) * x;
    for (const auto& band : coeffs.bands) {
      for (float x : band) energy_coeff += static_cast<double>(x) * x;
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
      worst_recon = std::max(worst_recon, std::abs(static_cast<double>(back[i]) - data[i]));
    }
    worst_energy = std::max(worst_energy, std::abs(energy_coeff - energy_in) / energy_in);
  }
  c.expect(worst_recon < 1e-6, "max reconstruction error " + std::to_string(worst_recon));
  c.expect(worst_energy < 1e-6, "max relative energy error " + std::to_string(worst_energy));
  c.note("recon err " + std::to_string(worst_recon) + ", energy err " + std::to_string(worst_energy));
  return c;
}

// --- criterion 2: INR gradient correctness -------------------------------------

Check criterion_inr_gradients() {
  Check c;
  std::size_t ok = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    InrModel m(5, 8, 20.0, 10.0);
    m.init_parameters(900 + seed);

    Rng rng(50 + seed);
    std::vector<TrainSample> batch(8);
    for (auto& s : batch) {
      for (int a = 0; a < 3; ++a) s.coord[a] = static_cast<float>(2.0 * rng.uniform() - 1.0);
      s.value = static_cast<float>(rng.uniform());
      s.scan = static_cast<std::uint8_t>(rng.below(3));
    }

    std::vector<double> grad;
    inr_loss_and_gradient(m, batch, grad);

    for (std::size_t p = 0; p < grad.size(); ++p) {
      const double orig = m.parameters()[p];
      const double eps = 1e-4;
      m.parameters()[p] = orig + eps;
      const double up = inr_loss(m, batch);
      m.parameters()[p] = orig - eps;
      const double down = inr_loss(m, batch);
      m.parameters()[p] = orig;
      const double fd = (up - down) / (2 * eps);
      const double denom = std::max({std::abs(fd), std::abs(grad[p]), 1e-8});
      ++total;
      if (std::abs(fd - grad[p]) / denom < 1e-3) ++ok;
    }
  }
  const double frac = static_cast<double>(ok) / static_cast<double>(total);
  c.expect(frac >= 0.99, "only " + std::to_string(100.0 * frac) + "% of components matched");
  c.note(std::to_string(100.0 * frac) + "% of " + std::to_string(total) + " components within 1e-3");
  return c;
}

// --- criterion 3: fusion beats trilinear upsampling ----------------------------

Check criterion_fusion() {
  Check c;
  TrochleaPhantomSpec spec;
  spec.seed = 31;
  const auto ph = generate_phantom(spec, {64, 64, 64}, {1, 1, 1});
  const std::array<AnisotropicSpec, 3> scan_specs = {AnisotropicSpec{2, 4.0, {}}, AnisotropicSpec{0, 4.0, {}},
                                                     AnisotropicSpec{1, 4.0, {}}};
  const auto scans = simulate_anisotropic_scans(ph.intensity, scan_specs);

  double best_upsampled = -1e300;
  for (const auto& scan : scans) {
    const Volume up = resample_trilinear(scan, ph.intensity.dims, ph.intensity.spacing, ph.intensity.origin);
    best_upsampled = std::max(best_upsampled, psnr(up, ph.intensity));
  }

  InrConfig cfg;
  cfg.hidden_width = 64;
  cfg.layers = 5;
  cfg.epochs = 48;
  cfg.batch = 1024;
  cfg.lr0 = 2e-3;
  cfg.seed = 7;
  cfg.max_final_loss = 0.05;
  const InrTrainResult trained = train_inr({scans[0], scans[1], scans[2]}, cfg);
  const auto [lo, hi] = center_bounds(ph.intensity);
  const Volume fused = sample_inr_volume(trained.model, ph.intensity.dims, lo, hi, ChannelPolicy::single(0));
  const double fused_psnr = psnr(fused, ph.intensity);

  c.expect(fused_psnr >= best_upsampled + 0.5,
           "fused " + std::to_string(fused_psnr) + " dB vs best upsampled " + std::to_string(best_upsampled));
  c.note("fused " + std::to_string(fused_psnr) + " dB, best upsampled " + std::to_string(best_upsampled) +
         " dB");

  // loss curve: epoch means non-increasing over 10-epoch windows in the back half
  const auto& curve = trained.epoch_loss;
  for (std::size_t i = curve.size() / 2; i + 11 < curve.size(); ++i) {
    double w0 = 0.0, w1 = 0.0;
    for (std::size_t k = 0; k < 10; ++k) {
      w0 += curve[i + k];
      w1 += curve[i + k + 1];
    }
    c.expect(w1 <= w0 * (1.0 + 1e-6), "loss window mean increased at epoch " + std::to_string(i));
  }
  return c;
}

// --- criterion 4: forward-process statistics ------------------------------------

Check criterion_forward_stats() {
  Check c;
  const int T = 100;
  const NoiseSchedule s = default_schedule(T);

  // schedule identities to 1e-10
  double worst_identity = 0.0;
  for (int t = 1; t <= T; ++t) {
    worst_identity = std::max(worst_identity, std::abs(s.alpha_bar[t - 1] - s.abar(t - 1) * s.alpha[t - 1]));
    const double mu = s.post_coef_x0[t - 1] + s.post_coef_xt[t - 1] * std::sqrt(s.alpha_bar[t - 1]);
    worst_identity = std::max(worst_identity, std::abs(mu - std::sqrt(s.abar(t - 1))));
  }
  c.expect(worst_identity < 1e-10, "schedule identity error " + std::to_string(worst_identity));

  const std::size_t n = 100000;
  std::vector<float> x0(n, 1.0f), eps(n), xt;
  Rng rng(4242);
  for (int t : {1, T / 2, T}) {
    for (auto& e : eps) e = static_cast<float>(rng.normal());
    forward_noise(x0, t, eps, s, xt);
    double mean = 0.0;
    for (float v : xt) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (float v : xt) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);

    const double want_mean = std::sqrt(s.alpha_bar[t - 1]);
    const double want_var = 1.0 - s.alpha_bar[t - 1];
    c.expect(std::abs(mean - want_mean) <= 0.02,
             "t=" + std::to_string(t) + " mean " + std::to_string(mean) + " vs " + std::to_string(want_mean));
    c.expect(std::abs(var - want_var) <= 0.02 * want_var + 1e-9,
             "t=" + std::to_string(t) + " var " + std::to_string(var) + " vs " + std::to_string(want_var));
  }
  return c;
}

// --- criterion 5: inpainting beats the majority baseline ------------------------

LabelVolume corpus_phantom(std::uint64_t seed) {
  Rng rng(seed);
  TrochleaPhantomSpec spec;
  spec.condyle_half_width = 8.0 + 8.0 * rng.uniform();
  spec.groove_depth = 1.5 + 7.0 * rng.uniform();
  spec.condyle_height = 22.0;
  spec.bone_extent = {44.0, 24.0, 36.0};
  spec.patella_radius = 5.0;
  spec.patella_gap = 8.0;
  spec.groove_center_offset = 8.0 * (rng.uniform() - 0.5);
  spec.seed = seed;
  return generate_phantom(spec, {32, 32, 32}, {2, 2, 2}).labels;
}

Check criterion_inpainting() {
  Check c;
  const double offset_mm = 6.0;

  std::vector<LabelVolume> train_cases, held_out;
  for (int i = 0; i < 180; ++i) train_cases.push_back(corpus_phantom(10000 + static_cast<std::uint64_t>(i)));
  for (int i = 0; i < 20; ++i) held_out.push_back(corpus_phantom(20000 + static_cast<std::uint64_t>(i)));

  // majority label per voxel over the training set
  LabelVolume majority = train_cases.front();
  {
    const std::size_t nvox = majority.voxel_count();
    std::vector<std::array<std::uint16_t, kLabelCount>> counts(nvox);
    for (const auto& lv : train_cases) {
      for (std::size_t i = 0; i < nvox; ++i) counts[i][static_cast<std::size_t>(lv.labels[i])]++;
    }
    for (std::size_t i = 0; i < nvox; ++i) {
      int best = 0;
      for (int l = 1; l < kLabelCount; ++l) {
        if (counts[i][static_cast<std::size_t>(l)] > counts[i][static_cast<std::size_t>(best)]) best = l;
      }
      majority.labels[i] = best;
    }
  }

  WdmConfig cfg;
  cfg.T = 100;
  cfg.width = 16;
  cfg.lr = 3e-4;
  cfg.iterations = 3500;
  cfg.offset_mm = offset_mm;
  cfg.seed = 99;
  std::vector<const LabelVolume*> ptrs;
  for (const auto& lv : train_cases) ptrs.push_back(&lv);
  WdmModel model = train_wdm(ptrs, cfg);

  std::size_t model_bad = 0, baseline_bad = 0, mask_total = 0;
  ConvDenoiser denoiser(model);
  Rng rng(1234);
  for (const auto& gt : held_out) {
    const InpaintResult r = inpaint_labels(denoiser, gt, model.schedule, {offset_mm, false}, rng);
    for (std::size_t i = 0; i < gt.labels.size(); ++i) {
      if (!r.mask.labels[i]) continue;
      ++mask_total;
      if (r.composited.labels[i] != gt.labels[i]) ++model_bad;
      if (majority.labels[i] != gt.labels[i]) ++baseline_bad;
    }
  }

  const double model_rate = static_cast<double>(model_bad) / static_cast<double>(mask_total);
  const double base_rate = static_cast<double>(baseline_bad) / static_cast<double>(mask_total);
  c.expect(model_bad <= 0.8 * static_cast<double>(baseline_bad),
           "model disagreement " + std::to_string(model_rate) + " not <= 0.8x baseline " +
               std::to_string(base_rate));
  c.note("model " + std::to_string(model_rate) + ", baseline " + std::to_string(base_rate) + " over " +
         std::to_string(mask_total) + " masked voxels");
  return c;
}

// --- criteria 6 and 9: oracle end-to-end pipeline --------------------------------

PipelineConfig oracle_pipeline_config(const std::string& dir, double w, double d_input, double d_healthy,
                                      const std::string& oracle_path) {
  TrochleaPhantomSpec healthy;
  healthy.condyle_half_width = w;
  healthy.groove_depth = d_healthy;
  healthy.seed = 7;
  const auto ph = generate_phantom(healthy, {128, 128, 128}, {0.5, 0.5, 0.5});
  write_volume(ph.labels, oracle_path);

  const std::string cfg_text = R"({
    "output_dir": ")" + dir + R"(",
    "phantom": {"enabled": true, "dims": 128, "spacing_mm": 0.5,
                "condyle_half_width_mm": )" + std::to_string(w) + R"(,
                "groove_depth_mm": )" + std::to_string(d_input) + R"(,
                "phantom_seed": 7},
    "inr": {"enabled": false},
    "schedule": {"T": 1},
    "denoiser": {"oracle_labels": ")" + oracle_path + R"("},
    "mask": {"offset_mm": 30.0}
  })";
  return PipelineConfig::from_json_text(cfg_text);
}

Check criterion_oracle_end_to_end() {
  Check c;
  const std::string base = scratch_dir("crit6");
  int combo = 0;
  for (double w : {5.0, 10.0, 20.0}) {
    for (double d : {2.0, 5.0, 10.0}) {
      const std::string dir = base + "/combo" + std::to_string(combo);
      const double d_input = d == 2.0 ? 5.0 : 2.0;  // any different depth
      const PipelineConfig cfg =
          oracle_pipeline_config(dir, w, d_input, d, base + "/oracle" + std::to_string(combo) + ".gvol");
      const RunManifest m = run_pipeline(cfg);

      TrochleaPhantomSpec healthy;
      healthy.condyle_half_width = w;
      healthy.groove_depth = d;
      const double want_sa = healthy.analytic_sulcus_angle_deg();

      c.expect(m.measurements.after.valid,
               "combo w=" + std::to_string(w) + " d=" + std::to_string(d) + ": invalid measurement");
      if (m.measurements.after.valid) {
        const double sa_err = std::abs(m.measurements.after.sulcus_angle_deg - want_sa);
        const double tgd_err = std::abs(m.measurements.after.groove_depth_mm - d);
        c.expect(sa_err <= 2.0, "w=" + std::to_string(w) + " d=" + std::to_string(d) + ": SA err " +
                                    std::to_string(sa_err));
        c.expect(tgd_err <= 0.5, "w=" + std::to_string(w) + " d=" + std::to_string(d) + ": TGD err " +
                                     std::to_string(tgd_err));
      }
      ++combo;
    }
  }
  return c;
}

Check criterion_directional() {
  Check c;
  const std::string base = scratch_dir("crit9");
  // dysplastic input: w=20, d=3 -> SA ~ 162.7 deg; healthy target deepens to d=8
  const PipelineConfig cfg = oracle_pipeline_config(base + "/run", 20.0, 3.0, 8.0, base + "/oracle.gvol");
  const RunManifest m = run_pipeline(cfg);

  c.expect(m.measurements.before.valid && m.measurements.after.valid, "invalid measurements");
  if (m.measurements.before.valid && m.measurements.after.valid) {
    TrochleaPhantomSpec dysplastic;
    dysplastic.condyle_half_width = 20.0;
    dysplastic.groove_depth = 3.0;
    c.expect(std::abs(m.measurements.before.sulcus_angle_deg - dysplastic.analytic_sulcus_angle_deg()) <= 2.0,
             "input SA " + std::to_string(m.measurements.before.sulcus_angle_deg) + " not in dysplastic range");
    c.expect(m.measurements.after.sulcus_angle_deg < m.measurements.before.sulcus_angle_deg,
             "SA did not decrease");
    c.expect(m.measurements.after.groove_depth_mm > m.measurements.before.groove_depth_mm,
             "TGD did not increase");
    c.note("SA " + std::to_string(m.measurements.before.sulcus_angle_deg) + " -> " +
           std::to_string(m.measurements.after.sulcus_angle_deg) + ", TGD " +
           std::to_string(m.measurements.before.groove_depth_mm) + " -> " +
           std::to_string(m.measurements.after.groove_depth_mm));
  }
  return c;
}

// --- criterion 7: marching cubes geometry ----------------------------------------

Check criterion_marching_cubes() {
  Check c;
  const double radius = 10.0;
  Volume field({64, 64, 64}, {0.5, 0.5, 0.5}, {0, 0, 0});
  const double center = 0.5 * 0.5 * 63.0;
  for (int k = 0; k < 64; ++k) {
    for (int j = 0; j < 64; ++j) {
      for (int i = 0; i < 64; ++i) {
        const double dx = i * 0.5 - center, dy = j * 0.5 - center, dz = k * 0.5 - center;
        field.at(i, j, k) = static_cast<float>(radius - std::sqrt(dx * dx + dy * dy + dz * dz));
      }
    }
  }
  const Mesh sphere = marching_cubes(field, 0.0);
  const double area = mesh_area(sphere);
  const double volume = mesh_signed_volume(sphere);
  const double want_area = 4.0 * M_PI * radius * radius;
  const double want_volume = 4.0 / 3.0 * M_PI * radius * radius * radius;

  c.expect(!sphere.triangles.empty(), "empty sphere mesh");
  c.expect(is_watertight(sphere), "sphere mesh not watertight");
  c.expect(std::abs(area - want_area) / want_area < 0.02,
           "area " + std::to_string(area) + " vs " + std::to_string(want_area));
  c.expect(std::abs(volume - want_volume) / want_volume < 0.02,
           "volume " + std::to_string(volume) + " vs " + std::to_string(want_volume));

  // closed indicator fields from labels are watertight as well
  TrochleaPhantomSpec spec;
  const auto ph = generate_phantom(spec, {64, 64, 64}, {1, 1, 1});
  const Mesh femur = mesh_label(ph.labels, kFemur);
  c.expect(is_watertight(femur), "femur label mesh not watertight");
  c.note("area err " + std::to_string(100.0 * std::abs(area - want_area) / want_area) + "%, volume err " +
         std::to_string(100.0 * std::abs(volume - want_volume) / want_volume) + "%");
  return c;
}

// --- criterion 8: morphometrics oracle -------------------------------------------

Check criterion_morphometrics() {
  Check c;
  for (double w : {5.0, 10.0, 20.0}) {
    for (double d : {2.0, 5.0, 10.0}) {
      TrochleaPhantomSpec spec;
      spec.condyle_half_width = w;
      spec.groove_depth = d;
      const auto ph = generate_phantom(spec, {128, 128, 128}, {0.5, 0.5, 0.5});
      const SulcusMeasurement m = measure_sulcus(ph.labels);
      c.expect(m.valid, "w=" + std::to_string(w) + " d=" + std::to_string(d) + ": invalid");
      if (!m.valid) continue;
      const double want_sa = spec.analytic_sulcus_angle_deg();
      const double voxel_diag = std::sqrt(3.0) * 0.5;
      c.expect(std::abs(m.sulcus_angle_deg - want_sa) <= 2.0,
               "w=" + std::to_string(w) + " d=" + std::to_string(d) + ": SA " +
                   std::to_string(m.sulcus_angle_deg) + " vs " + std::to_string(want_sa));
      c.expect(std::abs(m.groove_depth_mm - d) <= voxel_diag,
               "w=" + std::to_string(w) + " d=" + std::to_string(d) + ": TGD " +
                   std::to_string(m.groove_depth_mm));
    }
  }

  // exact Wilcoxon equals the enumeration oracle
  Rng rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 5 + static_cast<int>(rng.below(6));
    std::vector<double> before(static_cast<std::size_t>(n), 0.0), after(static_cast<std::size_t>(n));
    for (auto& v : after) {
      v = std::round(6.0 * (rng.uniform() - 0.5));
      if (v == 0.0) v = -1.0;
    }
    const WilcoxonResult r = wilcoxon_signed_rank(before, after);

    // enumeration over all sign assignments
    std::vector<double> diffs(after);
    std::vector<int> order(diffs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return std::abs(diffs[static_cast<std::size_t>(a)]) < std::abs(diffs[static_cast<std::size_t>(b)]); });
    std::vector<double> rank(diffs.size());
    for (std::size_t i = 0; i < order.size();) {
      std::size_t j = i;
      while (j < order.size() &&
             std::abs(diffs[static_cast<std::size_t>(order[j])]) == std::abs(diffs[static_cast<std::size_t>(order[i])])) {
        ++j;
      }
      const double avg = 0.5 * static_cast<double>(i + 1 + j);
      for (std::size_t k = i; k < j; ++k) rank[static_cast<std::size_t>(order[k])] = avg;
      i = j;
    }
    double w_plus = 0.0, total = 0.0;
    for (std::size_t i = 0; i < diffs.size(); ++i) {
      total += rank[i];
      if (diffs[i] > 0) w_plus += rank[i];
    }
    const double w_min = std::min(w_plus, total - w_plus);
    long extreme = 0;
    for (long bits = 0; bits < (1L << n); ++bits) {
      double wsum = 0.0;
      for (int i = 0; i < n; ++i) {
        if (bits & (1L << i)) wsum += rank[static_cast<std::size_t>(i)];
      }
      if (wsum <= w_min + 1e-12 || wsum >= total - w_min - 1e-12) ++extreme;
    }
    const double want_p = std::min(1.0, static_cast<double>(extreme) / static_cast<double>(1L << n));
    c.expect(std::abs(r.p_value - want_p) < 1e-12,
             "trial " + std::to_string(trial) + ": p " + std::to_string(r.p_value) + " vs enumeration " +
                 std::to_string(want_p));
  }

  // the n=6 uniform-shift case reproduces p = 0.03125 exactly
  const WilcoxonResult r6 = wilcoxon_signed_rank({0, 0, 0, 0, 0, 0}, {1, 2, 3, 4, 5, 6});
  c.expect(r6.p_value == 0.03125, "n=6 case gave p=" + std::to_string(r6.p_value));
  return c;
}

// --- criterion 10: run determinism ------------------------------------------------

Check criterion_determinism() {
  Check c;
  setenv("GROOVEFORGE_THREADS", "1", 1);
  const std::string base = scratch_dir("crit10");

  auto config_for = [&](const std::string& sub) {
    return oracle_pipeline_config(base + "/" + sub, 12.0, 3.0, 7.0, base + "/oracle_" + sub + ".gvol");
  };
  const RunManifest a = run_pipeline(config_for("a"));
  const RunManifest b = run_pipeline(config_for("b"));
  c.expect(a.outputs_digest == b.outputs_digest,
           "digests differ: " + a.outputs_digest + " vs " + b.outputs_digest);
  c.expect(a.measurements.after.sulcus_angle_deg == b.measurements.after.sulcus_angle_deg,
           "SA values differ across runs");
  c.note("digest " + a.outputs_digest);
  unsetenv("GROOVEFORGE_THREADS");
  return c;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Check()> fn;
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[i + 1]);
  }

  const std::vector<Criterion> criteria = {
      {1, "wavelet perfect reconstruction (200 x 16^3, tol 1e-6)", criterion_wavelet},
      {2, "INR analytic vs finite-difference gradients (20 seeds, >=99% within 1e-3)", criterion_inr_gradients},
      {3, "fusion PSNR beats best trilinear upsampling by >= 0.5 dB", criterion_fusion},
      {4, "diffusion forward-process statistics within 2%", criterion_forward_stats},
      {5, "inpainting beats majority baseline (<= 0.8x disagreement)", criterion_inpainting},
      {6, "oracle end-to-end: SA within 2 deg, TGD within 0.5 mm over 9 combos", criterion_oracle_end_to_end},
      {7, "marching cubes sphere area/volume within 2%, watertight", criterion_marching_cubes},
      {8, "morphometrics oracle grid + exact Wilcoxon enumeration", criterion_morphometrics},
      {9, "directional sanity: oracle pipeline decreases SA, increases TGD", criterion_directional},
      {10, "determinism: identical manifest digests across runs", criterion_determinism},
  };

  bool all_ok = true;
  for (const auto& crit : criteria) {
    if (only != 0 && crit.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Check result;
    try {
      result = crit.fn();
    } catch (const std::exception& e) {
      result.ok = false;
      result.detail = std::string("exception: ") + e.what();
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %2d: %s (%.1fs)%s%s\n", result.ok ? "PASS" : "FAIL", crit.id, crit.name,
                seconds, result.detail.empty() ? "" : " -- ", result.detail.c_str());
    std::fflush(stdout);
    all_ok = all_ok && result.ok;
  }
  return all_ok ? 0 : 1;
}
