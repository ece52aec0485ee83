#include "gf/mesh_distance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gf/parallel.hpp"

namespace gf {

// Ericson, "Real-Time Collision Detection": closest point on triangle via
// barycentric region tests.
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;

  const double d1 = dot(ab, ap);
  const double d2 = dot(ac, ap);
  if (d1 <= 0.0 && d2 <= 0.0) return norm(p - a);

  const Vec3 bp = p - b;
  const double d3 = dot(ab, bp);
  const double d4 = dot(ac, bp);
  if (d3 >= 0.0 && d4 <= d3) return norm(p - b);

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return norm(p - (a + ab * v));
  }

  const Vec3 cp = p - c;
  const double d5 = dot(ab, cp);
  const double d6 = dot(ac, cp);
  if (d6 >= 0.0 && d5 <= d6) return norm(p - c);

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return norm(p - (a + ac * w));
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return norm(p - (b + (c - b) * w));
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom;
  const double w = vc * denom;
  return norm(p - (a + ab * v + ac * w));
}

namespace {

struct TriGrid {
  Vec3 lo{0, 0, 0};
  double cell = 1.0;
  Index3 dims{1, 1, 1};
  std::vector<std::vector<int>> cells;
  const Mesh* mesh = nullptr;

  void build(const Mesh& b) {
    mesh = &b;
    Vec3 hi = {-1e300, -1e300, -1e300};
    lo = {1e300, 1e300, 1e300};
    for (const auto& v : b.vertices) {
      for (int a = 0; a < 3; ++a) {
        lo[a] = std::min(lo[a], v[a]);
        hi[a] = std::max(hi[a], v[a]);
      }
    }
    const double extent = std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2], 1e-9});
    // ~16^3 occupied region; coarse but keeps ring scans cheap.
    const double target = extent / 16.0;
    double mean_tri = 0.0;
    for (const auto& t : b.triangles) {
      Vec3 tlo = b.vertices[t[0]], thi = b.vertices[t[0]];
      for (int e = 1; e < 3; ++e) {
        for (int a = 0; a < 3; ++a) {
          tlo[a] = std::min(tlo[a], b.vertices[t[e]][a]);
          thi[a] = std::max(thi[a], b.vertices[t[e]][a]);
        }
      }
      mean_tri += std::max({thi[0] - tlo[0], thi[1] - tlo[1], thi[2] - tlo[2]});
    }
    mean_tri = b.triangles.empty() ? target : mean_tri / b.triangles.size();
    cell = std::max(target, mean_tri);
    for (int a = 0; a < 3; ++a) {
      dims[a] = std::max(1, static_cast<int>(std::ceil((hi[a] - lo[a]) / cell)) + 1);
    }
    cells.assign(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], {});

    for (int ti = 0; ti < static_cast<int>(b.triangles.size()); ++ti) {
      const auto& t = b.triangles[ti];
      Vec3 tlo = b.vertices[t[0]], thi = b.vertices[t[0]];
      for (int e = 1; e < 3; ++e) {
        for (int a = 0; a < 3; ++a) {
          tlo[a] = std::min(tlo[a], b.vertices[t[e]][a]);
          thi[a] = std::max(thi[a], b.vertices[t[e]][a]);
        }
      }
      Index3 clo = cell_of(tlo), chi = cell_of(thi);
      for (int k = clo[2]; k <= chi[2]; ++k) {
        for (int j = clo[1]; j <= chi[1]; ++j) {
          for (int i = clo[0]; i <= chi[0]; ++i) {
            cells[offset(i, j, k)].push_back(ti);
          }
        }
      }
    }
  }

  Index3 cell_of(const Vec3& p) const {
    Index3 c;
    for (int a = 0; a < 3; ++a) {
      c[a] = std::clamp(static_cast<int>(std::floor((p[a] - lo[a]) / cell)), 0, dims[a] - 1);
    }
    return c;
  }

  std::size_t offset(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(dims[0]) * (j + static_cast<std::size_t>(dims[1]) * k);
  }

  // Nearest triangle search: scan rings of cells outward until the best
  // distance found cannot be beaten by anything outside the scanned box.
  std::pair<double, int> nearest(const Vec3& p) const {
    const Index3 home = cell_of(p);
    double best = std::numeric_limits<double>::infinity();
    int best_tri = -1;
    const int max_ring = std::max({dims[0], dims[1], dims[2]});

    for (int r = 0; r <= max_ring; ++r) {
      bool any_cell = false;
      for (int k = home[2] - r; k <= home[2] + r; ++k) {
        if (k < 0 || k >= dims[2]) continue;
        for (int j = home[1] - r; j <= home[1] + r; ++j) {
          if (j < 0 || j >= dims[1]) continue;
          for (int i = home[0] - r; i <= home[0] + r; ++i) {
            if (i < 0 || i >= dims[0]) continue;
            // only the shell of the ring
            if (r > 0 && std::abs(i - home[0]) != r && std::abs(j - home[1]) != r && std::abs(k - home[2]) != r) {
              continue;
            }
            any_cell = true;
            for (int ti : cells[offset(i, j, k)]) {
              const auto& t = mesh->triangles[ti];
              const double d = point_triangle_distance(p, mesh->vertices[t[0]], mesh->vertices[t[1]],
                                                       mesh->vertices[t[2]]);
              if (d < best) {
                best = d;
                best_tri = ti;
              }
            }
          }
        }
      }
      if (best_tri >= 0) {
        // Distance from p to the boundary of the scanned box; anything beyond
        // ring r is at least this far away.
        double guard = std::numeric_limits<double>::infinity();
        for (int a = 0; a < 3; ++a) {
          const double box_lo = lo[a] + (home[a] - r) * cell;
          const double box_hi = lo[a] + (home[a] + r + 1) * cell;
          guard = std::min({guard, p[a] - box_lo, box_hi - p[a]});
        }
        if (best <= guard) break;
      }
      if (!any_cell && r > 0 && best_tri >= 0) break;
    }
    return {best, best_tri};
  }
};

void fill_stats(DistanceMap& m) {
  if (m.distance.empty()) return;
  std::vector<double> mags(m.distance.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < m.distance.size(); ++i) {
    mags[i] = std::abs(m.distance[i]);
    acc += mags[i];
  }
  m.mean = acc / static_cast<double>(mags.size());
  m.max = *std::max_element(mags.begin(), mags.end());
  const std::size_t k = static_cast<std::size_t>(std::ceil(0.95 * mags.size())) - 1;
  std::nth_element(mags.begin(), mags.begin() + k, mags.end());
  m.p95 = mags[k];
}

}  // namespace

DistanceMap surface_distance(const Mesh& a, const Mesh& b, const SurfaceDistanceOptions& opts) {
  if (a.vertices.empty() || b.triangles.empty()) {
    throw mesh_error("surface_distance: empty input mesh");
  }
  TriGrid grid;
  grid.build(b);

  DistanceMap map;
  map.distance.resize(a.vertices.size());
  parallel_for(static_cast<std::int64_t>(a.vertices.size()), [&](std::int64_t vi) {
    const auto [d, ti] = grid.nearest(a.vertices[static_cast<std::size_t>(vi)]);
    double value = d;
    if (opts.signed_distance && ti >= 0) {
      const auto& t = b.triangles[ti];
      const Vec3 n = cross(b.vertices[t[1]] - b.vertices[t[0]], b.vertices[t[2]] - b.vertices[t[0]]);
      const Vec3 dir = a.vertices[static_cast<std::size_t>(vi)] - b.vertices[t[0]];
      if (dot(n, dir) < 0) value = -value;
    }
    map.distance[static_cast<std::size_t>(vi)] = value;
  }, 256);

  fill_stats(map);
  return map;
}

double hausdorff_distance(const Mesh& a, const Mesh& b) {
  const DistanceMap ab = surface_distance(a, b);
  const DistanceMap ba = surface_distance(b, a);
  return std::max(ab.max, ba.max);
}

}  // namespace gf
