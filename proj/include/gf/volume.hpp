#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

// Voxel-grid data model shared by the whole pipeline.
//
// Conventions (fixed project-wide):
//  - data is stored x-fastest: offset = i + nx*(j + ny*k).
//  - the world frame is axis-aligned with the grid; world position of voxel
//    (i,j,k) center = origin + (i,j,k) * spacing, all in mm.
//  - anatomical reading of the axes: x = lateral, y = anterior, z = axial
//    slice direction.

namespace gf {

using Index3 = std::array<int, 3>;
using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
inline Vec3 operator*(double s, const Vec3& a) { return a * s; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

class bounds_error : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class dimension_mismatch_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class invariant_error : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class BoundaryPolicy { Clamp, Error };

namespace detail {
void validate_grid(const Index3& dims, const Vec3& spacing);
}

struct Volume {
  Index3 dims{0, 0, 0};
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{0.0, 0.0, 0.0};
  std::vector<float> data;

  Volume() = default;
  Volume(const Index3& d, const Vec3& sp, const Vec3& org, float fill = 0.0f)
      : dims(d), spacing(sp), origin(org) {
    detail::validate_grid(dims, spacing);
    data.assign(voxel_count(), fill);
  }

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t offset(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * k);
  }
  float at(int i, int j, int k) const { return data[offset(i, j, k)]; }
  float& at(int i, int j, int k) { return data[offset(i, j, k)]; }

  bool in_range(const Index3& idx) const {
    return idx[0] >= 0 && idx[0] < dims[0] && idx[1] >= 0 && idx[1] < dims[1] && idx[2] >= 0 && idx[2] < dims[2];
  }

  // Throws invariant_error on broken dims/spacing, size or non-finite data.
  void validate() const;
};

// Label alphabet used by every segmentation-carrying volume.
enum Label : std::int32_t {
  kBackground = 0,
  kFemur = 1,
  kTibia = 2,
  kPatella = 3,
  kFibula = 4,
};
inline constexpr int kLabelCount = 5;

const char* label_name(std::int32_t label);
std::int32_t label_from_name(const std::string& name);  // throws invalid_argument

struct LabelVolume {
  Index3 dims{0, 0, 0};
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{0.0, 0.0, 0.0};
  std::vector<std::int32_t> labels;

  LabelVolume() = default;
  LabelVolume(const Index3& d, const Vec3& sp, const Vec3& org, std::int32_t fill = kBackground)
      : dims(d), spacing(sp), origin(org) {
    detail::validate_grid(dims, spacing);
    labels.assign(voxel_count(), fill);
  }

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t offset(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * k);
  }
  std::int32_t at(int i, int j, int k) const { return labels[offset(i, j, k)]; }
  std::int32_t& at(int i, int j, int k) { return labels[offset(i, j, k)]; }

  bool in_range(const Index3& idx) const {
    return idx[0] >= 0 && idx[0] < dims[0] && idx[1] >= 0 && idx[1] < dims[1] && idx[2] >= 0 && idx[2] < dims[2];
  }

  void validate() const;
};

struct Mesh {
  std::vector<Vec3> vertices;   // world mm
  std::vector<std::array<int, 3>> triangles;
};

// index <-> world transforms. Templated so Volume and LabelVolume share them.
template <class Grid>
Vec3 index_to_world(const Grid& g, const Index3& idx) {
  if (!g.in_range(idx)) {
    throw bounds_error("index_to_world: index (" + std::to_string(idx[0]) + "," + std::to_string(idx[1]) + "," +
                       std::to_string(idx[2]) + ") out of range");
  }
  return {g.origin[0] + idx[0] * g.spacing[0], g.origin[1] + idx[1] * g.spacing[1],
          g.origin[2] + idx[2] * g.spacing[2]};
}

template <class Grid>
Index3 world_to_index(const Grid& g, const Vec3& p) {
  Index3 idx;
  for (int a = 0; a < 3; ++a) {
    idx[a] = static_cast<int>(std::lround((p[a] - g.origin[a]) / g.spacing[a]));
  }
  if (!g.in_range(idx)) {
    throw bounds_error("world_to_index: point outside grid");
  }
  return idx;
}

// World-space box spanned by the voxel centers.
template <class Grid>
std::pair<Vec3, Vec3> center_bounds(const Grid& g) {
  Vec3 lo = g.origin;
  Vec3 hi = {g.origin[0] + (g.dims[0] - 1) * g.spacing[0], g.origin[1] + (g.dims[1] - 1) * g.spacing[1],
             g.origin[2] + (g.dims[2] - 1) * g.spacing[2]};
  return {lo, hi};
}

double trilinear_sample(const Volume& v, const Vec3& p, BoundaryPolicy policy = BoundaryPolicy::Clamp);

// Evaluates src on a new regular grid via trilinear interpolation (clamped).
Volume resample_trilinear(const Volume& src, const Index3& dims, const Vec3& spacing, const Vec3& origin);

// 2|A^B| / (|A|+|B|) over voxels equal to `label`. Both sets empty -> 1.0.
double dice_score(const LabelVolume& a, const LabelVolume& b, std::int32_t label);

double mean_squared_error(const Volume& a, const Volume& b);

// 10*log10(range(reference)^2 / MSE); +inf when identical.
double psnr(const Volume& x, const Volume& reference);

}  // namespace gf
