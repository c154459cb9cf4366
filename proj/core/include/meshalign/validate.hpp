#pragma once

#include <string>
#include <vector>

#include "meshalign/mesh.hpp"

namespace meshalign {

struct ValidationReport {
  int vertex_count = 0;
  int edge_count = 0;
  int face_count = 0;
  int euler_characteristic = 0;
  int boundary_edges = 0;
  int non_manifold_edges = 0;
  int non_manifold_vertices = 0;
  int degenerate_faces = 0;
  int out_of_range_indices = 0;
  int isolated_vertices = 0;
  int self_intersections = 0;
  bool orientable = true;
  // Adjacent faces traverse their shared edge in opposite directions.
  bool consistently_oriented = true;
  bool uv_complete = true;

  [[nodiscard]] bool manifold() const {
    return non_manifold_edges == 0 && non_manifold_vertices == 0;
  }
  [[nodiscard]] bool closed() const { return boundary_edges == 0; }
  [[nodiscard]] bool ok() const {
    return manifold() && orientable && consistently_oriented && degenerate_faces == 0 &&
           out_of_range_indices == 0 && self_intersections == 0 && uv_complete;
  }
  [[nodiscard]] std::string summary() const;
};

struct ValidateOptions {
  bool check_self_intersections = true;
};

ValidationReport validate(const TriangleMesh& mesh, const ValidateOptions& options = {});

/// Brute-force count of non-adjacent intersecting triangle pairs.
int count_self_intersections(const TriangleMesh& mesh);

/// Triangle/triangle overlap test (Moller); shared-vertex pairs are the
/// caller's responsibility.
bool triangles_intersect(const Vec3& a0, const Vec3& a1, const Vec3& a2, const Vec3& b0,
                         const Vec3& b1, const Vec3& b2);

} // namespace meshalign
