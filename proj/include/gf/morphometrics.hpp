#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gf/volume.hpp"

// Sulcus angle / trochlear groove depth measurements on an axial slice plus
// the paired Wilcoxon signed-rank test for before/after comparisons.
//
// Slice geometry: on axial slice z, the anterior profile maps each lateral
// column x to the most anterior femur voxel center (larger y = more
// anterior). The trough is the profile minimum between the two condyle
// peaks; SA is the interior angle at the trough between the rays to the
// peaks, TGD the perpendicular distance from the trough to the peak-to-peak
// chord. Landmarks are refined to sub-voxel positions by fitting lines to
// the two groove walls; without that the voxel quantization dominates the
// angle error on fine grids.

namespace gf {

class morphometry_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProfilePoint {
  double lateral_mm = 0.0;   // x (world)
  double anterior_mm = 0.0;  // y of the most anterior femur voxel center
  bool present = false;      // false where the column has no femur
};

// Throws morphometry_error if the slice has no femur at all.
std::vector<ProfilePoint> anterior_profile(const LabelVolume& labels, int z);

enum class SulcusInvalidReason { None, NoFemur, TooFewPeaks, NoTrough };

struct SulcusMeasurement {
  bool valid = false;
  SulcusInvalidReason reason = SulcusInvalidReason::None;
  int slice = -1;
  std::array<double, 2> lateral_peak{0, 0};  // (x, y) mm, smaller-x peak
  std::array<double, 2> medial_peak{0, 0};
  std::array<double, 2> trough{0, 0};
  double sulcus_angle_deg = 0.0;
  double groove_depth_mm = 0.0;
};

struct SulcusOptions {
  double min_peak_separation_mm = 5.0;
  double min_prominence_mm = 1.0;     // trough must sit this far below both peaks
  double slice_halfrange_mm = 15.0;   // around the patella centroid z
  bool refine_subvoxel = true;
};

// Single-slice measurement, exposed for tests.
SulcusMeasurement measure_sulcus_slice(const LabelVolume& labels, int z, const SulcusOptions& opts = {});

// Picks the slice with maximal groove depth within the patella-adjacent
// range (all slices when no patella is present).
SulcusMeasurement measure_sulcus(const LabelVolume& labels, const SulcusOptions& opts = {});

const char* sulcus_reason_name(SulcusInvalidReason r);

// --- Wilcoxon signed-rank -----------------------------------------------------

enum class ShiftDirection { None, AfterGreater, BeforeGreater };

struct WilcoxonResult {
  double w_statistic = 0.0;  // min(W+, W-)
  double p_value = 1.0;      // two-sided
  int n = 0;                 // pairs after dropping zero differences
  bool exact = true;         // exact distribution (n <= 25) vs normal approx
  ShiftDirection direction = ShiftDirection::None;
};

// Two-sided test on paired samples. Zero differences are dropped; ties get
// average ranks. Exact p for n <= 25 (distribution over all sign
// assignments), normal approximation with tie correction beyond.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& before, const std::vector<double>& after);

}  // namespace gf
