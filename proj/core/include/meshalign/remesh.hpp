#pragma once

#include "meshalign/mesh.hpp"

namespace meshalign {

/// Vertices appended by a refinement, in order, as midpoints of earlier ones.
struct RefinementMap {
  int base_vertices = 0;
  std::vector<Edge> parents;
};

/// Refines by batched longest-edge midpoint splits until the average edge
/// length is at most `target_edge_factor` times the input average. Existing
/// vertices never move; new vertices and UVs sit at exact edge midpoints, with
/// separate UV midpoints on each side of a seam. Requires factor in (0, 1).
TriangleMesh remesh_refine(const TriangleMesh& mesh, double target_edge_factor,
                           RefinementMap* map = nullptr);

/// Replays a recorded refinement on other positions of the input mesh, so
/// a deformed copy gets exactly the connectivity of the refined rest shape.
std::vector<Vec3> apply_refinement(const RefinementMap& map, const std::vector<Vec3>& positions);

struct DecimateOptions {
  // Faces whose normal would rotate by more than this (cosine) are rejected.
  double min_normal_cosine = 0.2;
};

/// Quadric-error half-edge collapse down to at most `target_vertex_count`
/// vertices. UV seam edges are never collapsed and seam vertices never move,
/// so every surviving corner UV comes from the input pool; the texture pointer
/// is carried over unchanged. Throws GeometryError with the achievable minimum
/// when the target cannot be reached.
TriangleMesh decimate_preserve_uv(const TriangleMesh& mesh, int target_vertex_count,
                                  const DecimateOptions& options = {});

} // namespace meshalign
