#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "meshalign/image.hpp"

namespace meshalign {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Tri = std::array<int, 3>;

// n x 3 row-major view over a vertex array.
using RowMatrixX3d = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Indexed triangle mesh with a per-corner UV pool. Corners of different faces
/// may reference different UV entries for the same vertex (texture seams).
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Tri> faces;
  std::vector<Vec2> uvs;
  // Per face corner indices into `uvs`; empty when the mesh is untextured.
  std::vector<Tri> face_uvs;
  std::shared_ptr<const TextureImage> texture;

  [[nodiscard]] int vertex_count() const { return static_cast<int>(vertices.size()); }
  [[nodiscard]] int face_count() const { return static_cast<int>(faces.size()); }
  [[nodiscard]] bool has_uvs() const { return !face_uvs.empty(); }

  [[nodiscard]] const Vec2& corner_uv(int face, int corner) const {
    return uvs[face_uvs[face][corner]];
  }

  Eigen::Map<RowMatrixX3d> positions() {
    return {vertices.empty() ? nullptr : vertices.front().data(), vertex_count(), 3};
  }
  Eigen::Map<const RowMatrixX3d> positions() const {
    return {vertices.empty() ? nullptr : vertices.front().data(), vertex_count(), 3};
  }
};

static_assert(sizeof(Vec3) == 3 * sizeof(double), "Vec3 must be tightly packed");

/// Undirected edge with endpoints stored as (min, max).
struct Edge {
  int a = 0;
  int b = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

inline Edge make_edge(int i, int j) { return i < j ? Edge{i, j} : Edge{j, i}; }

/// Edge/face adjacency. Edge k of a face joins corners k and (k + 1) % 3.
struct MeshTopology {
  std::vector<Edge> edges;
  // Faces incident to each edge (one or two for manifold meshes).
  std::vector<std::vector<int>> edge_faces;
  // For each face and local edge: global edge index.
  std::vector<std::array<int, 3>> face_edges;
  // For each face and local edge: neighboring face, or -1 on a boundary.
  std::vector<std::array<int, 3>> face_neighbors;
  // Number of faces incident to each vertex.
  std::vector<int> vertex_valence;
};

MeshTopology build_topology(const TriangleMesh& mesh);

// True when the two faces across `edge` disagree on either endpoint's UV.
bool is_uv_seam(const TriangleMesh& mesh, const MeshTopology& topo, int edge);

Vec3 face_cross(const TriangleMesh& mesh, int face);
double face_area(const TriangleMesh& mesh, int face);
double average_edge_length(const TriangleMesh& mesh);
double bounding_box_diagonal(const TriangleMesh& mesh);
std::pair<Vec3, Vec3> bounding_box(const TriangleMesh& mesh);

/// Area-weighted unit vertex normals. Throws GeometryError when a vertex has
/// no incident face or a zero accumulated normal.
std::vector<Vec3> vertex_normals(const TriangleMesh& mesh);

/// Same accumulation without the isolated-vertex check; such vertices get a
/// zero normal. Used by the renderer.
std::vector<Vec3> vertex_normals_unchecked(const TriangleMesh& mesh);

/// Chain rule through vertex_normals: maps dL/dnormal to dL/dposition.
std::vector<Vec3> vertex_normals_backward(const TriangleMesh& mesh, std::span<const Vec3> grad_normals);

/// Flips every face's winding (and its corner UVs with it).
TriangleMesh flip_orientation(const TriangleMesh& mesh);

} // namespace meshalign
