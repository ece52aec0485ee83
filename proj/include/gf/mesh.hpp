#pragma once

#include <cstdint>

#include "gf/volume.hpp"

// Isosurface extraction and mesh measures.

namespace gf {

class mesh_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Classic marching cubes with linear edge interpolation. Vertices are emitted
// in world mm and welded along shared cell edges, so closed isosurfaces come
// out watertight. Triangles are wound so normals point toward lower field
// values (outward for inside>isolevel indicator fields). A constant field
// yields an empty mesh.
Mesh marching_cubes(const Volume& field, double isolevel);

// 1 inside the label, 0 elsewhere.
Volume label_indicator(const LabelVolume& labels, std::int32_t label);

// One 3x3x3 box-filter pass (zero-padded at the borders).
Volume box_smooth(const Volume& v);

// indicator -> one smoothing pass -> marching cubes at 0.5.
Mesh mesh_label(const LabelVolume& labels, std::int32_t label);

double mesh_area(const Mesh& m);
// Signed volume via divergence theorem; positive for outward orientation.
double mesh_signed_volume(const Mesh& m);

// Every edge shared by exactly two triangles.
bool is_watertight(const Mesh& m);
// V - E + F (assumes welded vertices).
long euler_characteristic(const Mesh& m);

}  // namespace gf
