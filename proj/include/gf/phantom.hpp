#pragma once

#include <array>
#include <cstdint>

#include "gf/volume.hpp"

// Parametric trochlea-like phantom with closed-form sulcus angle and groove
// depth. Geometry, in world mm (x lateral, y anterior, z axial):
//
//  - The "femur" is a box whose anterior face carries two plateaus at height
//    condyle_height above the bone base, flanking a V-groove of depth
//    groove_depth and half-width condyle_half_width.
//  - The "patella" is a sphere centered patella_gap anterior of the groove
//    trough, clipped against the femur (femur wins on overlap).
//  - Analytic targets: SA = 2*atan(w/d), TGD = d.

namespace gf {

struct TrochleaPhantomSpec {
  double condyle_half_width = 10.0;  // w [mm]
  double groove_depth = 5.0;         // d [mm]
  double condyle_height = 22.0;      // h [mm]
  Vec3 bone_extent{46.0, 24.0, 40.0};
  double patella_radius = 6.0;
  double patella_gap = 9.0;
  double groove_center_offset = 0.0;  // lateral shift of groove+patella [mm]
  double noise_sigma = 0.02;          // additive Gaussian noise, intensity units
  std::uint64_t seed = 1;

  double analytic_sulcus_angle_deg() const;  // 180 at d=0 (flat, degenerate)
  double analytic_groove_depth() const { return groove_depth; }

  void validate() const;  // throws invalid_argument
};

struct PhantomVolumes {
  Volume intensity;
  LabelVolume labels;
};

PhantomVolumes generate_phantom(const TrochleaPhantomSpec& spec, const Index3& dims, const Vec3& spacing,
                                const Vec3& origin = {0.0, 0.0, 0.0});

struct ScanBias {
  double gain = 1.0;
  double offset = 0.0;
};

struct AnisotropicSpec {
  int axis = 2;                     // 0=x, 1=y, 2=z
  double slice_thickness_mm = 4.0;  // must be an integer multiple of gt spacing
  ScanBias bias;
};

// Thick-slice acquisition model: slab mean along one axis, in-plane untouched,
// then v -> gain*v + offset.
Volume slab_average(const Volume& gt, const AnisotropicSpec& spec);

std::array<Volume, 3> simulate_anisotropic_scans(const Volume& gt, const std::array<AnisotropicSpec, 3>& specs);

}  // namespace gf
