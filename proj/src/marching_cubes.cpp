#include <cmath>
#include <unordered_map>

#include "gf/mc_tables.hpp"
#include "gf/mesh.hpp"

namespace gf {

namespace {

// Canonical edge key: owning grid point index * 3 + axis. Each cube edge runs
// from its lower grid point along +axis, so neighbouring cells agree on the
// key and the interpolated vertex is shared exactly.
std::uint64_t edge_key(const Volume& v, int i, int j, int k, int corner_a, int corner_b) {
  const int* oa = mc::kMcCornerOffset[corner_a];
  const int* ob = mc::kMcCornerOffset[corner_b];
  int axis = -1;
  int pa[3], pb[3];
  for (int a = 0; a < 3; ++a) {
    pa[a] = (a == 0 ? i : a == 1 ? j : k) + oa[a];
    pb[a] = (a == 0 ? i : a == 1 ? j : k) + ob[a];
    if (pa[a] != pb[a]) axis = a;
  }
  const int* lo = pa;
  if (pb[axis] < pa[axis]) lo = pb;
  const std::uint64_t point = static_cast<std::uint64_t>(lo[0]) +
                              static_cast<std::uint64_t>(v.dims[0]) *
                                  (static_cast<std::uint64_t>(lo[1]) +
                                   static_cast<std::uint64_t>(v.dims[1]) * static_cast<std::uint64_t>(lo[2]));
  return point * 3 + static_cast<std::uint64_t>(axis);
}

}  // namespace

Mesh marching_cubes(const Volume& field, double isolevel) {
  for (int a = 0; a < 3; ++a) {
    if (field.dims[a] < 2) throw mesh_error("marching_cubes: need at least 2 voxels per axis");
  }

  Mesh mesh;
  std::unordered_map<std::uint64_t, int> edge_vertex;
  edge_vertex.reserve(1024);

  const Index3& dims = field.dims;
  double corner_val[8];
  Vec3 corner_pos[8];
  int edge_idx[12];

  for (int k = 0; k + 1 < dims[2]; ++k) {
    for (int j = 0; j + 1 < dims[1]; ++j) {
      for (int i = 0; i + 1 < dims[0]; ++i) {
        int cube = 0;
        for (int c = 0; c < 8; ++c) {
          const int ci = i + mc::kMcCornerOffset[c][0];
          const int cj = j + mc::kMcCornerOffset[c][1];
          const int ck = k + mc::kMcCornerOffset[c][2];
          corner_val[c] = field.at(ci, cj, ck);
          corner_pos[c] = {field.origin[0] + ci * field.spacing[0], field.origin[1] + cj * field.spacing[1],
                           field.origin[2] + ck * field.spacing[2]};
          if (corner_val[c] < isolevel) cube |= 1 << c;
        }
        const int edges = mc::kEdgeTable[cube];
        if (edges == 0) continue;

        for (int e = 0; e < 12; ++e) {
          if (!(edges & (1 << e))) continue;
          const std::uint64_t key = edge_key(field, i, j, k, mc::kMcEdgeCorners[e][0], mc::kMcEdgeCorners[e][1]);
          auto it = edge_vertex.find(key);
          if (it == edge_vertex.end()) {
            const int a = mc::kMcEdgeCorners[e][0], b = mc::kMcEdgeCorners[e][1];
            const double va = corner_val[a], vb = corner_val[b];
            // One endpoint is < isolevel and the other >= by construction,
            // so the denominator cannot vanish.
            const double frac = (isolevel - va) / (vb - va);
            const Vec3 p = corner_pos[a] + (corner_pos[b] - corner_pos[a]) * frac;
            it = edge_vertex.emplace(key, static_cast<int>(mesh.vertices.size())).first;
            mesh.vertices.push_back(p);
          }
          edge_idx[e] = it->second;
        }

        const int* tri = mc::kTriTable[cube];
        for (int n = 0; tri[n] != -1; n += 3) {
          const int a = edge_idx[tri[n]];
          const int b = edge_idx[tri[n + 1]];
          const int c = edge_idx[tri[n + 2]];
          if (a == b || b == c || a == c) continue;  // collapsed on a shared vertex
          mesh.triangles.push_back({a, b, c});
        }
      }
    }
  }

  // Cleanup: drop zero-area triangles (interpolated vertices can coincide when
  // the isolevel brushes a grid value).
  std::vector<std::array<int, 3>> kept;
  kept.reserve(mesh.triangles.size());
  for (const auto& t : mesh.triangles) {
    const Vec3 ab = mesh.vertices[t[1]] - mesh.vertices[t[0]];
    const Vec3 ac = mesh.vertices[t[2]] - mesh.vertices[t[0]];
    if (norm(cross(ab, ac)) > 1e-14) kept.push_back(t);
  }
  mesh.triangles.swap(kept);
  return mesh;
}

Volume label_indicator(const LabelVolume& labels, std::int32_t label) {
  Volume out(labels.dims, labels.spacing, labels.origin);
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    out.data[i] = labels.labels[i] == label ? 1.0f : 0.0f;
  }
  return out;
}

Volume box_smooth(const Volume& v) {
  Volume out(v.dims, v.spacing, v.origin);
  const Index3& d = v.dims;
  for (int k = 0; k < d[2]; ++k) {
    for (int j = 0; j < d[1]; ++j) {
      for (int i = 0; i < d[0]; ++i) {
        double acc = 0.0;
        for (int dk = -1; dk <= 1; ++dk) {
          for (int dj = -1; dj <= 1; ++dj) {
            for (int di = -1; di <= 1; ++di) {
              const int ii = i + di, jj = j + dj, kk = k + dk;
              if (ii < 0 || jj < 0 || kk < 0 || ii >= d[0] || jj >= d[1] || kk >= d[2]) continue;
              acc += v.at(ii, jj, kk);
            }
          }
        }
        out.at(i, j, k) = static_cast<float>(acc / 27.0);
      }
    }
  }
  return out;
}

Mesh mesh_label(const LabelVolume& labels, std::int32_t label) {
  return marching_cubes(box_smooth(label_indicator(labels, label)), 0.5);
}

double mesh_area(const Mesh& m) {
  double acc = 0.0;
  for (const auto& t : m.triangles) {
    const Vec3 ab = m.vertices[t[1]] - m.vertices[t[0]];
    const Vec3 ac = m.vertices[t[2]] - m.vertices[t[0]];
    acc += 0.5 * norm(cross(ab, ac));
  }
  return acc;
}

double mesh_signed_volume(const Mesh& m) {
  double acc = 0.0;
  for (const auto& t : m.triangles) {
    acc += dot(m.vertices[t[0]], cross(m.vertices[t[1]], m.vertices[t[2]])) / 6.0;
  }
  return acc;
}

bool is_watertight(const Mesh& m) {
  if (m.triangles.empty()) return false;
  std::unordered_map<std::uint64_t, int> edge_count;
  edge_count.reserve(m.triangles.size() * 3);
  for (const auto& t : m.triangles) {
    for (int e = 0; e < 3; ++e) {
      const int a = t[e], b = t[(e + 1) % 3];
      const std::uint64_t key = (static_cast<std::uint64_t>(std::min(a, b)) << 32) | static_cast<std::uint32_t>(std::max(a, b));
      ++edge_count[key];
    }
  }
  for (const auto& [key, count] : edge_count) {
    if (count != 2) return false;
  }
  return true;
}

long euler_characteristic(const Mesh& m) {
  std::unordered_map<std::uint64_t, int> edges;
  for (const auto& t : m.triangles) {
    for (int e = 0; e < 3; ++e) {
      const int a = t[e], b = t[(e + 1) % 3];
      const std::uint64_t key = (static_cast<std::uint64_t>(std::min(a, b)) << 32) | static_cast<std::uint32_t>(std::max(a, b));
      edges[key] = 1;
    }
  }
  return static_cast<long>(m.vertices.size()) - static_cast<long>(edges.size()) +
         static_cast<long>(m.triangles.size());
}

}  // namespace gf
