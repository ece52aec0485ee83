#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gf/denoiser.hpp"
#include "gf/rng.hpp"
#include "gf/volume.hpp"
#include "gf/wavelet3.hpp"

// Wavelet-domain conditional diffusion for label inpainting.
//
// State space: labels are one-hot encoded over 5 channels scaled to {-1,+1},
// Haar-transformed (level 1) and divided by 2^(3/2). The scaling maps every
// coefficient of a +/-1 field into [-1,1], so the per-step clipping of the
// predicted x0 cannot distort an exact prediction. The denoiser sees the
// noisy coefficients concatenated with the transformed masked condition
// (2*40 channels in, 40 out) and predicts x0 directly; sampling walks the
// posterior q(x_{t-1} | x_t, x0_hat) from t=T down to 1.

namespace gf {

class diffusion_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- noise schedule ---------------------------------------------------------

struct NoiseSchedule {
  int T = 0;
  // All indexed by t-1 for t in 1..T.
  std::vector<double> beta, alpha, alpha_bar;
  std::vector<double> post_coef_x0;   // sqrt(abar_{t-1}) * beta_t / (1 - abar_t)
  std::vector<double> post_coef_xt;   // sqrt(alpha_t) * (1 - abar_{t-1}) / (1 - abar_t)
  std::vector<double> post_var;       // beta_tilde_t

  double abar(int t) const { return t == 0 ? 1.0 : alpha_bar[t - 1]; }
};

NoiseSchedule build_schedule(int T, double beta1, double betaT);

// Linear 1e-4..0.02 at T=1000; betas scale by 1000/T otherwise so the total
// signal decay stays comparable.
NoiseSchedule default_schedule(int T);

// x_t = sqrt(abar_t) x0 + sqrt(1-abar_t) eps, elementwise.
void forward_noise(const std::vector<float>& x0, int t, const std::vector<float>& eps, const NoiseSchedule& s,
                   std::vector<float>& xt);

// --- label <-> coefficient encoding -----------------------------------------

inline constexpr int kCoeffChannels = kLabelCount * kSubbands;  // 40
inline constexpr double kCoeffScale = 2.8284271247461903;       // 2^(3/2)

std::vector<float> encode_labels(const LabelVolume& labels);  // 5ch, +/-1
LabelVolume decode_labels(const std::vector<float>& enc, const LabelVolume& frame);

// Packed 40-channel coefficient tensor at half resolution.
std::vector<float> labels_to_coeffs(const LabelVolume& labels);
LabelVolume coeffs_to_labels(const std::vector<float>& coeffs, const LabelVolume& frame);

// --- trochlear mask ----------------------------------------------------------

struct MaskOptions {
  double offset_mm = 30.0;
  bool spherical = false;  // dilate with a ball instead of box-growing the bbox
};

// Mask = patella bounding box dilated by offset_mm (voxels {0,1}).
LabelVolume build_mask(const LabelVolume& labels, const MaskOptions& opts = {});
LabelVolume apply_mask(const LabelVolume& labels, const LabelVolume& mask);  // masked -> background

// --- model -------------------------------------------------------------------

struct WdmConfig {
  int T = 100;
  int width = 16;
  double lr = 3e-4;
  long iterations = 4000;
  double offset_mm = 30.0;
  bool spherical_mask = false;
  std::uint64_t seed = 11;
  std::string log_path;  // line-delimited records (iteration, t, loss)
  bool verbose = false;
};

struct WdmModel {
  DenoiserNet<float> net;
  NoiseSchedule schedule;
  Index3 label_dims{0, 0, 0};
  double offset_mm = 30.0;
  bool spherical_mask = false;
};

struct TrainStepInfo {
  double loss = 0.0;
  int t = 0;
};

// Owns the net + Adam state; one optimization step per call.
class WdmTrainer {
 public:
  WdmTrainer(const Index3& label_dims, const WdmConfig& cfg);

  TrainStepInfo train_step(const LabelVolume& y0, Rng& rng);
  WdmModel&& take_model() { return std::move(model_); }
  WdmModel& model() { return model_; }

 private:
  WdmModel model_;
  WdmConfig cfg_;
  nn::AdamOpt<float> adam_;
};

WdmModel train_wdm(const std::vector<const LabelVolume*>& corpus, const WdmConfig& cfg);

void save_wdm(const WdmModel& m, const std::string& path);
WdmModel load_wdm(const std::string& path);

// --- sampling ----------------------------------------------------------------

// Predicts x0 coefficients from (x_t, cond) at step t. The conv denoiser and
// the test oracle (which returns known ground-truth coefficients) both
// implement this.
class DenoiserBase {
 public:
  virtual ~DenoiserBase() = default;
  virtual std::vector<float> predict_x0(const std::vector<float>& xt, const std::vector<float>& cond,
                                        const Index3& coeff_dims, int t) = 0;
};

class ConvDenoiser : public DenoiserBase {
 public:
  explicit ConvDenoiser(WdmModel& model) : model_(model) {}
  std::vector<float> predict_x0(const std::vector<float>& xt, const std::vector<float>& cond,
                                const Index3& coeff_dims, int t) override;

 private:
  WdmModel& model_;
};

class OracleDenoiser : public DenoiserBase {
 public:
  explicit OracleDenoiser(const LabelVolume& target) : x0_(labels_to_coeffs(target)) {}
  std::vector<float> predict_x0(const std::vector<float>&, const std::vector<float>&, const Index3&,
                                int) override {
    return x0_;
  }

 private:
  std::vector<float> x0_;
};

struct InpaintResult {
  LabelVolume composited;  // original outside mask, generated inside
  LabelVolume raw;         // full decoded generation
  LabelVolume mask;
};

InpaintResult inpaint_labels(DenoiserBase& denoiser, const LabelVolume& original, const NoiseSchedule& schedule,
                             const MaskOptions& opts, Rng& rng);

}  // namespace gf
