#include <doctest.h>

#include <cmath>
#include <fstream>

#include "gf/binio.hpp"
#include "gf/mesh.hpp"
#include "gf/mesh_distance.hpp"
#include "gf/mesh_io.hpp"
#include "gf/volume_io.hpp"
#include "test_helpers.hpp"

using namespace gf;

namespace {

// Independent O(V*F) reference for the accelerated query.
DistanceMap brute_force_distance(const Mesh& a, const Mesh& b) {
  DistanceMap map;
  map.distance.resize(a.vertices.size());
  for (std::size_t vi = 0; vi < a.vertices.size(); ++vi) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& t : b.triangles) {
      best = std::min(best, point_triangle_distance(a.vertices[vi], b.vertices[t[0]], b.vertices[t[1]],
                                                    b.vertices[t[2]]));
    }
    map.distance[vi] = best;
  }
  return map;
}

Volume sphere_sdf(int dims, double spacing, double radius) {
  Volume v({dims, dims, dims}, {spacing, spacing, spacing}, {0, 0, 0});
  const double c = 0.5 * spacing * (dims - 1);
  for (int k = 0; k < dims; ++k) {
    for (int j = 0; j < dims; ++j) {
      for (int i = 0; i < dims; ++i) {
        const double dx = i * spacing - c, dy = j * spacing - c, dz = k * spacing - c;
        v.at(i, j, k) = static_cast<float>(radius - std::sqrt(dx * dx + dy * dy + dz * dz));
      }
    }
  }
  return v;
}

Mesh translated(const Mesh& m, const Vec3& d) {
  Mesh out = m;
  for (auto& v : out.vertices) v = v + d;
  return out;
}

}  // namespace

TEST_CASE("marching cubes basics") {
  SUBCASE("empty mesh for fields with no crossing") {
    Volume v({4, 4, 4}, {1, 1, 1}, {0, 0, 0}, 0.0f);
    CHECK(marching_cubes(v, 0.5).triangles.empty());
    Volume w({4, 4, 4}, {1, 1, 1}, {0, 0, 0}, 1.0f);
    CHECK(marching_cubes(w, 0.5).triangles.empty());
  }

  SUBCASE("tiny grids are rejected") {
    Volume v({1, 4, 4}, {1, 1, 1}, {0, 0, 0});
    CHECK_THROWS_AS(marching_cubes(v, 0.5), mesh_error);
  }

  SUBCASE("single voxel above threshold gives a closed surface with Euler characteristic 2") {
    Volume v({5, 5, 5}, {1, 1, 1}, {0, 0, 0}, 0.0f);
    v.at(2, 2, 2) = 1.0f;
    const Mesh m = marching_cubes(v, 0.5);
    REQUIRE(!m.triangles.empty());
    CHECK(is_watertight(m));
    CHECK(euler_characteristic(m) == 2);
    CHECK(mesh_signed_volume(m) > 0.0);  // outward orientation
  }

  SUBCASE("sphere area and volume within 2% of analytic") {
    const double radius = 10.0;
    const Mesh m = marching_cubes(sphere_sdf(64, 0.5, radius), 0.0);
    REQUIRE(!m.triangles.empty());
    CHECK(is_watertight(m));
    const double area = mesh_area(m);
    const double volume = mesh_signed_volume(m);
    CHECK(std::abs(area - 4.0 * M_PI * radius * radius) / (4.0 * M_PI * radius * radius) < 0.02);
    CHECK(std::abs(volume - 4.0 / 3.0 * M_PI * std::pow(radius, 3)) / (4.0 / 3.0 * M_PI * std::pow(radius, 3)) <
          0.02);
  }

  SUBCASE("vertices stay inside the volume bounding box") {
    const Volume field = sphere_sdf(24, 1.0, 8.0);
    const Mesh m = marching_cubes(field, 0.0);
    const auto [lo, hi] = center_bounds(field);
    for (const auto& v : m.vertices) {
      for (int a = 0; a < 3; ++a) {
        CHECK(v[a] >= lo[a] - 1e-9);
        CHECK(v[a] <= hi[a] + 1e-9);
      }
    }
  }
}

TEST_CASE("label meshing is watertight on the phantom") {
  auto ph = gft::default_phantom(48, 1.5, 10.0, 5.0);
  const Mesh femur = mesh_label(ph.labels, kFemur);
  REQUIRE(!femur.triangles.empty());
  CHECK(is_watertight(femur));
  CHECK(mesh_signed_volume(femur) > 0.0);

  const Mesh patella = mesh_label(ph.labels, kPatella);
  REQUIRE(!patella.triangles.empty());
  CHECK(is_watertight(patella));
}

TEST_CASE("point-triangle distance") {
  const Vec3 a{0, 0, 0}, b{2, 0, 0}, c{0, 2, 0};

  CHECK(point_triangle_distance({0.5, 0.5, 0}, a, b, c) == doctest::Approx(0.0));
  CHECK(point_triangle_distance({0.5, 0.5, 3.0}, a, b, c) == doctest::Approx(3.0));  // face region
  CHECK(point_triangle_distance({-1, -1, 0}, a, b, c) == doctest::Approx(std::sqrt(2.0)));  // vertex region
  CHECK(point_triangle_distance({1.0, -2.0, 0}, a, b, c) == doctest::Approx(2.0));  // edge region
  CHECK(point_triangle_distance({3.0, 3.0, 0}, a, b, c) ==
        doctest::Approx(std::sqrt(2.0) * 2.0));  // beyond the hypotenuse
}

TEST_CASE("surface distance") {
  SUBCASE("identical meshes give zero everywhere") {
    const Mesh m = marching_cubes(sphere_sdf(24, 1.0, 8.0), 0.0);
    const DistanceMap map = surface_distance(m, m);
    for (double d : map.distance) CHECK(d == doctest::Approx(0.0));
    CHECK(map.mean == doctest::Approx(0.0));
    CHECK(map.max == doctest::Approx(0.0));
  }

  SUBCASE("two parallel unit quads 3mm apart") {
    Mesh quad;
    quad.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    quad.triangles = {{0, 1, 2}, {0, 2, 3}};
    const Mesh other = translated(quad, {0, 0, 3.0});
    const DistanceMap map = surface_distance(quad, other);
    for (double d : map.distance) CHECK(d == doctest::Approx(3.0));
    CHECK(map.mean == doctest::Approx(3.0));
    CHECK(map.p95 == doctest::Approx(3.0));
  }

  SUBCASE("accelerated result equals brute force exactly") {
    const Mesh a = marching_cubes(sphere_sdf(20, 1.0, 7.0), 0.0);
    auto ph = gft::default_phantom(24, 2.0, 8.0, 4.0);
    const Mesh b = mesh_label(ph.labels, kFemur);
    REQUIRE(!a.triangles.empty());
    REQUIRE(!b.triangles.empty());

    const DistanceMap fast = surface_distance(a, b);
    const DistanceMap brute = brute_force_distance(a, b);
    REQUIRE(fast.distance.size() == brute.distance.size());
    for (std::size_t i = 0; i < fast.distance.size(); ++i) {
      CHECK(fast.distance[i] == brute.distance[i]);  // bitwise equal
    }
  }

  SUBCASE("translation invariance") {
    const Mesh a = marching_cubes(sphere_sdf(16, 1.0, 5.0), 0.0);
    auto ph = gft::default_phantom(24, 2.0, 8.0, 4.0);
    const Mesh b = mesh_label(ph.labels, kPatella);
    const Vec3 shift{12.5, -3.25, 8.0};
    const DistanceMap d0 = surface_distance(a, b);
    const DistanceMap d1 = surface_distance(translated(a, shift), translated(b, shift));
    for (std::size_t i = 0; i < d0.distance.size(); ++i) {
      CHECK(d1.distance[i] == doctest::Approx(d0.distance[i]).epsilon(1e-9));
    }
  }

  SUBCASE("signed distances flip across the surface") {
    const Mesh sphere = marching_cubes(sphere_sdf(32, 0.5, 6.0), 0.0);
    Mesh probes;
    probes.vertices = {{7.75, 7.75, 7.75}, {7.75, 7.75, 14.5}};  // center and outside
    probes.triangles = {};
    const DistanceMap map = surface_distance(probes, sphere, {true});
    CHECK(map.distance[0] * map.distance[1] < 0.0);
  }

  SUBCASE("empty meshes are rejected") {
    Mesh empty;
    const Mesh m = marching_cubes(sphere_sdf(16, 1.0, 5.0), 0.0);
    CHECK_THROWS_AS(surface_distance(empty, m), mesh_error);
    CHECK_THROWS_AS(surface_distance(m, empty), mesh_error);
  }

  SUBCASE("hausdorff is symmetric by construction") {
    const Mesh a = marching_cubes(sphere_sdf(16, 1.0, 5.0), 0.0);
    const Mesh b = translated(a, {1.0, 0, 0});
    CHECK(hausdorff_distance(a, b) == doctest::Approx(hausdorff_distance(b, a)));
    CHECK(hausdorff_distance(a, b) >= 0.99);
  }
}

TEST_CASE("mesh io") {
  gft::TempDir tmp("meshio");
  const Mesh m = marching_cubes(sphere_sdf(16, 1.0, 5.0), 0.0);

  SUBCASE("ply round trip with distance attribute") {
    std::vector<double> dist(m.vertices.size());
    for (std::size_t i = 0; i < dist.size(); ++i) dist[i] = 0.25 * static_cast<double>(i % 7);
    write_ply(m, tmp.file("m.ply"), &dist);
    const PlyData r = read_ply(tmp.file("m.ply"));
    REQUIRE(r.mesh.vertices.size() == m.vertices.size());
    REQUIRE(r.mesh.triangles.size() == m.triangles.size());
    REQUIRE(r.vertex_distance.has_value());
    for (std::size_t i = 0; i < m.vertices.size(); ++i) {
      for (int a = 0; a < 3; ++a) {
        CHECK(r.mesh.vertices[i][a] == doctest::Approx(m.vertices[i][a]).epsilon(1e-6));
      }
      CHECK((*r.vertex_distance)[i] == doctest::Approx(dist[i]).epsilon(1e-6));
    }
    CHECK(r.mesh.triangles == m.triangles);
  }

  SUBCASE("stl has the right triangle count") {
    write_stl(m, tmp.file("m.stl"));
    const auto bytes = gf::bin::read_file_bytes(tmp.file("m.stl"));
    REQUIRE(bytes.size() == 84 + 50 * m.triangles.size());
  }

  SUBCASE("ply parse errors") {
    std::ofstream(tmp.file("bad.ply")) << "not a ply\n";
    CHECK_THROWS_AS(read_ply(tmp.file("bad.ply")), malformed_header_error);
  }
}
