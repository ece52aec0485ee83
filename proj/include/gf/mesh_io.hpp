#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gf/mesh.hpp"

// Mesh export/import: ASCII PLY (with an optional per-vertex scalar
// `distance` property) and binary STL (write-only).

namespace gf {

void write_ply(const Mesh& m, const std::string& path,
               const std::vector<double>* vertex_distance = nullptr);

struct PlyData {
  Mesh mesh;
  std::optional<std::vector<double>> vertex_distance;
};

PlyData read_ply(const std::string& path);

void write_stl(const Mesh& m, const std::string& path);

}  // namespace gf
