#include "gf/phantom.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "gf/rng.hpp"

namespace gf {

double TrochleaPhantomSpec::analytic_sulcus_angle_deg() const {
  if (groove_depth <= 0.0) return 180.0;
  return 2.0 * std::atan(condyle_half_width / groove_depth) * 180.0 / 3.14159265358979323846;
}

void TrochleaPhantomSpec::validate() const {
  if (!(condyle_half_width > 0.0)) throw std::invalid_argument("phantom: condyle_half_width must be > 0");
  if (groove_depth < 0.0) throw std::invalid_argument("phantom: groove_depth must be >= 0");
  if (!(groove_depth < condyle_height)) throw std::invalid_argument("phantom: groove_depth must be < condyle_height");
  if (!(condyle_height <= bone_extent[1])) {
    throw std::invalid_argument("phantom: condyle_height must fit in bone_extent.y");
  }
  if (!(patella_gap > 0.0)) throw std::invalid_argument("phantom: patella_gap must be > 0");
  if (!(patella_radius > 0.0)) throw std::invalid_argument("phantom: patella_radius must be > 0");
  for (int a = 0; a < 3; ++a) {
    if (!(bone_extent[a] > 0.0)) throw std::invalid_argument("phantom: bone_extent must be positive");
  }
  if (noise_sigma < 0.0) throw std::invalid_argument("phantom: noise_sigma must be >= 0");
}

PhantomVolumes generate_phantom(const TrochleaPhantomSpec& spec, const Index3& dims, const Vec3& spacing,
                                const Vec3& origin) {
  spec.validate();

  Volume vol(dims, spacing, origin);
  LabelVolume lab(dims, spacing, origin);

  const Vec3 fov = {(dims[0] - 1) * spacing[0], (dims[1] - 1) * spacing[1], (dims[2] - 1) * spacing[2]};
  const double cx = origin[0] + 0.5 * fov[0];
  const double cz = origin[2] + 0.5 * fov[2];
  const double y_base = origin[1] + 0.08 * fov[1];
  const double groove_x = cx + spec.groove_center_offset;

  const double w = spec.condyle_half_width;
  const double d = spec.groove_depth;
  const double h = spec.condyle_height;
  const double half_bx = 0.5 * spec.bone_extent[0];
  const double half_bz = 0.5 * spec.bone_extent[2];
  const double trough_y = y_base + h - d;
  const double pat_cy = trough_y + spec.patella_gap;
  const double pat_r = spec.patella_radius;

  // Everything must sit inside the voxel-center bounding box.
  const auto [lo, hi] = center_bounds(vol);
  const bool fits = cx - half_bx >= lo[0] && cx + half_bx <= hi[0] && cz - half_bz >= lo[2] &&
                    cz + half_bz <= hi[2] && y_base >= lo[1] && pat_cy + pat_r <= hi[1] &&
                    groove_x - w >= lo[0] && groove_x + w <= hi[0] && y_base + h <= hi[1];
  if (!fits) {
    throw std::invalid_argument("phantom: geometry exceeds the field of view");
  }

  const double inv_fy = 1.0 / (fov[1] > 0 ? fov[1] : 1.0);
  std::size_t n = 0;
  for (int k = 0; k < dims[2]; ++k) {
    const double z = origin[2] + k * spacing[2];
    for (int j = 0; j < dims[1]; ++j) {
      const double y = origin[1] + j * spacing[1];
      for (int i = 0; i < dims[0]; ++i, ++n) {
        const double x = origin[0] + i * spacing[0];

        // Anterior surface height above the base at this lateral position.
        const double u = std::abs(x - groove_x);
        const double carve = (u < w) ? d * (1.0 - u / w) : 0.0;
        const double surface = y_base + h - carve;

        const bool in_femur = std::abs(x - cx) <= half_bx && std::abs(z - cz) <= half_bz && y >= y_base &&
                              y <= surface;
        bool in_patella = false;
        if (!in_femur) {
          const double dx = x - groove_x, dy = y - pat_cy, dz = z - cz;
          in_patella = dx * dx + dy * dy + dz * dz <= pat_r * pat_r;
        }

        double value;
        if (in_femur || in_patella) {
          value = 0.40 + 0.50 * (y - origin[1]) * inv_fy;
          lab.labels[n] = in_femur ? kFemur : kPatella;
        } else {
          value = 0.08;
        }
        if (spec.noise_sigma > 0.0) {
          value += spec.noise_sigma * counter_gaussian(spec.seed, n);
        }
        vol.data[n] = static_cast<float>(value);
      }
    }
  }
  return {std::move(vol), std::move(lab)};
}

Volume slab_average(const Volume& gt, const AnisotropicSpec& spec) {
  if (spec.axis < 0 || spec.axis > 2) throw std::invalid_argument("slab_average: axis must be 0, 1, or 2");
  const double ratio = spec.slice_thickness_mm / gt.spacing[spec.axis];
  const int factor = static_cast<int>(std::lround(ratio));
  if (factor < 1 || std::abs(ratio - factor) > 1e-9 * ratio + 1e-12) {
    throw std::invalid_argument("slab_average: slice thickness is not an integer multiple of gt spacing");
  }
  if (gt.dims[spec.axis] % factor != 0) {
    throw std::invalid_argument("slab_average: dims[" + std::to_string(spec.axis) +
                                "] not divisible by thickness factor " + std::to_string(factor));
  }

  Index3 dims = gt.dims;
  dims[spec.axis] /= factor;
  Vec3 spacing = gt.spacing;
  spacing[spec.axis] = spec.slice_thickness_mm;
  Vec3 origin = gt.origin;
  // Slab center = mean position of the covered source voxel centers.
  origin[spec.axis] += 0.5 * (factor - 1) * gt.spacing[spec.axis];

  Volume out(dims, spacing, origin);
  const double inv = 1.0 / factor;
  for (int k = 0; k < dims[2]; ++k) {
    for (int j = 0; j < dims[1]; ++j) {
      for (int i = 0; i < dims[0]; ++i) {
        Index3 src = {i, j, k};
        src[spec.axis] *= factor;
        double acc = 0.0;
        for (int s = 0; s < factor; ++s) {
          Index3 at = src;
          at[spec.axis] += s;
          acc += gt.at(at[0], at[1], at[2]);
        }
        out.at(i, j, k) = static_cast<float>(spec.bias.gain * (acc * inv) + spec.bias.offset);
      }
    }
  }
  return out;
}

std::array<Volume, 3> simulate_anisotropic_scans(const Volume& gt, const std::array<AnisotropicSpec, 3>& specs) {
  return {slab_average(gt, specs[0]), slab_average(gt, specs[1]), slab_average(gt, specs[2])};
}

}  // namespace gf
