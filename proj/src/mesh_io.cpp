#include "gf/mesh_io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "gf/binio.hpp"
#include "gf/volume_io.hpp"

namespace gf {

void write_ply(const Mesh& m, const std::string& path, const std::vector<double>* vertex_distance) {
  if (vertex_distance && vertex_distance->size() != m.vertices.size()) {
    throw mesh_error("write_ply: distance attribute size mismatch");
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("write_ply: cannot open " + path);
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << m.vertices.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  if (vertex_distance) out << "property float distance\n";
  out << "element face " << m.triangles.size() << "\n";
  out << "property list uchar int vertex_indices\n";
  out << "end_header\n";
  out.precision(9);
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    const auto& v = m.vertices[i];
    out << v[0] << " " << v[1] << " " << v[2];
    if (vertex_distance) out << " " << (*vertex_distance)[i];
    out << "\n";
  }
  for (const auto& t : m.triangles) {
    out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
  }
  if (!out) throw io_error("write_ply: write failed for " + path);
}

PlyData read_ply(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("read_ply: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "ply") throw malformed_header_error(path + ": not a PLY file");
  if (!std::getline(in, line) || line.rfind("format ascii", 0) != 0) {
    throw unsupported_format_error(path + ": only ascii PLY is supported");
  }

  std::size_t n_vertices = 0, n_faces = 0;
  std::vector<std::string> vertex_props;
  std::string current_element;
  while (std::getline(in, line)) {
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "comment") continue;
    if (word == "element") {
      std::string name;
      std::size_t count;
      ls >> name >> count;
      current_element = name;
      if (name == "vertex") n_vertices = count;
      else if (name == "face") n_faces = count;
    } else if (word == "property" && current_element == "vertex") {
      std::string type, name;
      ls >> type >> name;
      vertex_props.push_back(name);
    }
  }
  if (vertex_props.size() < 3 || vertex_props[0] != "x" || vertex_props[1] != "y" || vertex_props[2] != "z") {
    throw unsupported_format_error(path + ": vertex properties must start with x y z");
  }
  int distance_idx = -1;
  for (std::size_t i = 3; i < vertex_props.size(); ++i) {
    if (vertex_props[i] == "distance") distance_idx = static_cast<int>(i);
  }

  PlyData data;
  data.mesh.vertices.reserve(n_vertices);
  if (distance_idx >= 0) data.vertex_distance.emplace();
  for (std::size_t i = 0; i < n_vertices; ++i) {
    if (!std::getline(in, line)) throw truncated_payload_error(path + ": vertex list truncated");
    std::istringstream ls(line);
    std::vector<double> fields(vertex_props.size());
    for (auto& f : fields) {
      if (!(ls >> f)) throw malformed_header_error(path + ": bad vertex line");
    }
    data.mesh.vertices.push_back({fields[0], fields[1], fields[2]});
    if (distance_idx >= 0) data.vertex_distance->push_back(fields[distance_idx]);
  }
  data.mesh.triangles.reserve(n_faces);
  for (std::size_t i = 0; i < n_faces; ++i) {
    if (!std::getline(in, line)) throw truncated_payload_error(path + ": face list truncated");
    std::istringstream ls(line);
    int n = 0;
    if (!(ls >> n) || n != 3) throw unsupported_format_error(path + ": only triangle faces are supported");
    std::array<int, 3> t{};
    for (int e = 0; e < 3; ++e) {
      if (!(ls >> t[e]) || t[e] < 0 || static_cast<std::size_t>(t[e]) >= data.mesh.vertices.size()) {
        throw malformed_header_error(path + ": face index out of range");
      }
    }
    data.mesh.triangles.push_back(t);
  }
  return data;
}

void write_stl(const Mesh& m, const std::string& path) {
  std::string out;
  out.assign(80, '\0');  // header
  bin::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.triangles.size()));
  for (const auto& t : m.triangles) {
    const Vec3& a = m.vertices[t[0]];
    const Vec3& b = m.vertices[t[1]];
    const Vec3& c = m.vertices[t[2]];
    Vec3 n = cross(b - a, c - a);
    const double len = norm(n);
    if (len > 0) n = n * (1.0 / len);
    for (int i = 0; i < 3; ++i) bin::put_le<float>(out, static_cast<float>(n[i]));
    for (const Vec3* v : {&a, &b, &c}) {
      for (int i = 0; i < 3; ++i) bin::put_le<float>(out, static_cast<float>((*v)[i]));
    }
    bin::put_le<std::uint16_t>(out, 0);
  }
  bin::write_file_bytes(path, out);
}

}  // namespace gf
