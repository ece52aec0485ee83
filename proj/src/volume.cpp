#include "gf/volume.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gf {

namespace detail {

void validate_grid(const Index3& dims, const Vec3& spacing) {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] <= 0) throw invariant_error("grid dimension must be positive");
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
      throw invariant_error("grid spacing must be positive and finite");
    }
  }
}

}  // namespace detail

void Volume::validate() const {
  detail::validate_grid(dims, spacing);
  if (data.size() != voxel_count()) throw invariant_error("volume data length != nx*ny*nz");
  for (float v : data) {
    if (!std::isfinite(v)) throw invariant_error("volume contains non-finite values");
  }
}

void LabelVolume::validate() const {
  detail::validate_grid(dims, spacing);
  if (labels.size() != voxel_count()) throw invariant_error("label data length != nx*ny*nz");
  for (std::int32_t l : labels) {
    if (l < 0 || l >= kLabelCount) throw invariant_error("label value outside {0..4}");
  }
}

const char* label_name(std::int32_t label) {
  switch (label) {
    case kBackground: return "background";
    case kFemur: return "femur";
    case kTibia: return "tibia";
    case kPatella: return "patella";
    case kFibula: return "fibula";
    default: return "invalid";
  }
}

std::int32_t label_from_name(const std::string& name) {
  for (std::int32_t l = 0; l < kLabelCount; ++l) {
    if (name == label_name(l)) return l;
  }
  throw std::invalid_argument("unknown label name: " + name);
}

double trilinear_sample(const Volume& v, const Vec3& p, BoundaryPolicy policy) {
  // Continuous voxel coordinates; voxel centers sit at integers.
  double u[3];
  for (int a = 0; a < 3; ++a) {
    u[a] = (p[a] - v.origin[a]) / v.spacing[a];
    const double hi = static_cast<double>(v.dims[a] - 1);
    if (u[a] < 0.0 || u[a] > hi) {
      if (policy == BoundaryPolicy::Error) {
        throw bounds_error("trilinear_sample: point outside volume bounding box");
      }
      u[a] = std::clamp(u[a], 0.0, hi);
    }
  }

  int i0[3], i1[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    i0[a] = static_cast<int>(std::floor(u[a]));
    i0[a] = std::clamp(i0[a], 0, v.dims[a] - 1);
    i1[a] = std::min(i0[a] + 1, v.dims[a] - 1);
    f[a] = u[a] - i0[a];
  }

  auto c = [&](int ix, int iy, int iz) -> double { return v.at(ix, iy, iz); };
  const double c00 = c(i0[0], i0[1], i0[2]) * (1 - f[0]) + c(i1[0], i0[1], i0[2]) * f[0];
  const double c10 = c(i0[0], i1[1], i0[2]) * (1 - f[0]) + c(i1[0], i1[1], i0[2]) * f[0];
  const double c01 = c(i0[0], i0[1], i1[2]) * (1 - f[0]) + c(i1[0], i0[1], i1[2]) * f[0];
  const double c11 = c(i0[0], i1[1], i1[2]) * (1 - f[0]) + c(i1[0], i1[1], i1[2]) * f[0];
  const double c0 = c00 * (1 - f[1]) + c10 * f[1];
  const double c1 = c01 * (1 - f[1]) + c11 * f[1];
  return c0 * (1 - f[2]) + c1 * f[2];
}

Volume resample_trilinear(const Volume& src, const Index3& dims, const Vec3& spacing, const Vec3& origin) {
  Volume out(dims, spacing, origin);
  std::size_t n = 0;
  for (int k = 0; k < dims[2]; ++k) {
    for (int j = 0; j < dims[1]; ++j) {
      for (int i = 0; i < dims[0]; ++i, ++n) {
        const Vec3 p = {origin[0] + i * spacing[0], origin[1] + j * spacing[1], origin[2] + k * spacing[2]};
        out.data[n] = static_cast<float>(trilinear_sample(src, p));
      }
    }
  }
  return out;
}

double dice_score(const LabelVolume& a, const LabelVolume& b, std::int32_t label) {
  if (a.dims != b.dims) throw dimension_mismatch_error("dice_score: volumes differ in dims");
  std::size_t na = 0, nb = 0, ni = 0;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    const bool ia = a.labels[i] == label;
    const bool ib = b.labels[i] == label;
    na += ia;
    nb += ib;
    ni += ia && ib;
  }
  if (na + nb == 0) return 1.0;  // label absent from both: perfect agreement
  return 2.0 * static_cast<double>(ni) / static_cast<double>(na + nb);
}

double mean_squared_error(const Volume& a, const Volume& b) {
  if (a.dims != b.dims) throw dimension_mismatch_error("mean_squared_error: volumes differ in dims");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.data.size());
}

double psnr(const Volume& x, const Volume& reference) {
  const double err = mean_squared_error(x, reference);
  const auto [lo, hi] = std::minmax_element(reference.data.begin(), reference.data.end());
  const double range = static_cast<double>(*hi) - static_cast<double>(*lo);
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  if (range == 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(range * range / err);
}

}  // namespace gf
