#pragma once

#include <vector>

#include "gf/mesh.hpp"
#include "gf/volume.hpp"

// Per-vertex surface-to-surface distances (the anomaly heatmap of the
// before/after comparison): for each vertex of `a`, the exact distance to the
// closest triangle of `b`. A uniform spatial grid over b's triangles prunes
// candidates; the result is identical to testing every triangle.

namespace gf {

struct DistanceMap {
  std::vector<double> distance;  // per vertex of `a`, mm (signed if requested)
  double mean = 0.0;
  double max = 0.0;
  double p95 = 0.0;
};

// Exact distance from p to triangle (a,b,c), including edge/vertex regions.
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

struct SurfaceDistanceOptions {
  bool signed_distance = false;  // sign from the nearest triangle's normal
};

DistanceMap surface_distance(const Mesh& a, const Mesh& b, const SurfaceDistanceOptions& opts = {});

// max(directional a->b, directional b->a) over the unsigned distances.
double hausdorff_distance(const Mesh& a, const Mesh& b);

}  // namespace gf
