#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gf/volume.hpp"

// Implicit neural representation for multi-scan fusion: one MLP maps a
// spatial coordinate (normalized to [-1,1]^3 over the union of the scan
// bounding boxes) to one intensity channel per input scan. Hidden layers use
// a real-valued Gabor wavelet activation; the head is linear. Training
// minimizes the per-sample squared error on the channel belonging to the
// sample's source scan. All arithmetic is double precision so analytic
// gradients can be validated against central finite differences.

namespace gf {

class inr_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kInrScans = 3;

// cos(w0*z) * exp(-(s0*z)^2)
double gabor_activation(double z, double omega0, double sigma0);
double gabor_activation_derivative(double z, double omega0, double sigma0);

struct InrConfig {
  int hidden_width = 128;
  int layers = 5;  // number of linear layers; hidden activations between them
  double omega0 = 20.0;
  double sigma0 = 10.0;
  double lr0 = 4e-4;
  int epochs = 100;
  int batch = 4096;
  double max_final_loss = 0.05;  // convergence ceiling, normalized units
  std::uint64_t seed = 7;
  bool verbose = false;
};

struct TrainSample {
  std::array<float, 3> coord;  // normalized to [-1,1]^3
  float value;                 // normalized to [0,1]
  std::uint8_t scan;           // source scan index, selects the supervised channel
};

struct TrainSet {
  std::vector<TrainSample> samples;
  Vec3 world_lo{0, 0, 0}, world_hi{1, 1, 1};
  std::array<std::array<double, 2>, kInrScans> scan_range{};  // per-scan {min,max}
};

TrainSet build_train_set(const std::array<Volume, kInrScans>& scans);

class InrModel {
 public:
  InrModel() = default;
  InrModel(int layers, int hidden_width, double omega0, double sigma0);

  void init_parameters(std::uint64_t seed);

  int layer_count() const { return static_cast<int>(widths_.size()) - 1; }
  const std::vector<int>& widths() const { return widths_; }
  double omega0() const { return omega0_; }
  double sigma0() const { return sigma0_; }

  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }

  std::size_t weight_offset(int layer) const { return w_off_[layer]; }
  std::size_t bias_offset(int layer) const { return b_off_[layer]; }

  // Single-coordinate evaluation (normalized input, normalized outputs).
  std::array<double, kInrScans> forward(const std::array<double, 3>& c) const;

  // Normalization metadata, filled in by train_inr / load_inr.
  Vec3 world_lo{0, 0, 0}, world_hi{1, 1, 1};
  std::array<std::array<double, 2>, kInrScans> scan_range{};

  std::array<double, 3> normalize_point(const Vec3& p) const;
  double denormalize(double y, int scan) const;

 private:
  std::vector<int> widths_;
  std::vector<double> params_;
  std::vector<std::size_t> w_off_, b_off_;
  double omega0_ = 20.0, sigma0_ = 10.0;

  friend double inr_loss_and_gradient(const InrModel&, std::span<const TrainSample>, std::vector<double>&);
};

// Mean over the batch of the squared error on each sample's source channel;
// fills `gradient` (same layout as parameters). Returns the loss.
double inr_loss_and_gradient(const InrModel& m, std::span<const TrainSample> batch, std::vector<double>& gradient);
double inr_loss(const InrModel& m, std::span<const TrainSample> batch);

struct ChannelPolicy {
  enum class Kind { Single, Mean };
  Kind kind = Kind::Single;
  int scan = 0;  // axial=0, sagittal=1, coronal=2

  static ChannelPolicy single(int scan) { return {Kind::Single, scan}; }
  static ChannelPolicy mean() { return {Kind::Mean, 0}; }
  static ChannelPolicy from_string(const std::string& s);  // axial|sagittal|coronal|mean
  std::string to_string() const;
};

struct InrTrainResult {
  InrModel model;
  std::vector<double> epoch_loss;
};

InrTrainResult train_inr(const std::array<Volume, kInrScans>& scans, const InrConfig& cfg);

// Evaluates the model over a regular grid spanning [lo,hi] (voxel centers at
// the box corners) and reduces the channels per the policy.
Volume sample_inr_volume(const InrModel& m, const Index3& dims, const Vec3& lo, const Vec3& hi,
                         const ChannelPolicy& policy);

void save_inr(const InrModel& m, const std::string& path);
InrModel load_inr(const std::string& path);

}  // namespace gf
