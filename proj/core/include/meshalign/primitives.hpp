#pragma once

#include "meshalign/mesh.hpp"

namespace meshalign {

/// Regular icosahedron inscribed in the unit sphere.
TriangleMesh make_icosahedron();

/// Icosahedron with `levels` rounds of 1:4 subdivision projected onto the
/// unit sphere: 10 * 4^levels + 2 vertices.
TriangleMesh make_icosphere(int levels);

/// 1:4 midpoint subdivision of every face (no projection), UVs included.
TriangleMesh subdivide_midpoint(const TriangleMesh& mesh);

/// Regular grid over [0,1]^2 at z = 0 with (nx+1)(ny+1) vertices and UV = xy.
TriangleMesh make_grid(int nx, int ny);

/// Planar UVs u = (x+1)/2, v = (y+1)/2 with one UV per vertex (no seams).
void assign_planar_uvs(TriangleMesh& mesh);

/// Spherical longitude/latitude grid with cylindrical band chart and two
/// polar cap charts. `rings` latitude rings (excluding poles), `segments`
/// vertices per ring. Vertices lie on the unit sphere.
TriangleMesh make_capped_cylinder_sphere(int rings, int segments);

} // namespace meshalign
