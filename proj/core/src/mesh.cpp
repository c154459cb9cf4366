#include "meshalign/mesh.hpp"

#include <cmath>
#include <limits>
#include <unordered_map>

#include <fmt/format.h>

#include "meshalign/error.hpp"

namespace meshalign {

namespace {

std::uint64_t edge_key(const Edge& e) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(e.a)) << 32) |
         static_cast<std::uint32_t>(e.b);
}

} // namespace

MeshTopology build_topology(const TriangleMesh& mesh) {
  MeshTopology topo;
  const int nf = mesh.face_count();
  topo.face_edges.resize(nf);
  topo.face_neighbors.assign(nf, {-1, -1, -1});
  topo.vertex_valence.assign(mesh.vertex_count(), 0);

  std::unordered_map<std::uint64_t, int> index;
  index.reserve(static_cast<std::size_t>(nf) * 2);
  for (int f = 0; f < nf; ++f) {
    const Tri& t = mesh.faces[f];
    for (int k = 0; k < 3; ++k) {
      if (t[k] >= 0 && t[k] < mesh.vertex_count()) {
        ++topo.vertex_valence[t[k]];
      }
      const Edge e = make_edge(t[k], t[(k + 1) % 3]);
      auto [it, inserted] = index.try_emplace(edge_key(e), static_cast<int>(topo.edges.size()));
      if (inserted) {
        topo.edges.push_back(e);
        topo.edge_faces.emplace_back();
      }
      topo.face_edges[f][k] = it->second;
      topo.edge_faces[it->second].push_back(f);
    }
  }
  for (int f = 0; f < nf; ++f) {
    for (int k = 0; k < 3; ++k) {
      const auto& adj = topo.edge_faces[topo.face_edges[f][k]];
      if (adj.size() == 2) {
        topo.face_neighbors[f][k] = adj[0] == f ? adj[1] : adj[0];
      }
    }
  }
  return topo;
}

bool is_uv_seam(const TriangleMesh& mesh, const MeshTopology& topo, int edge) {
  if (!mesh.has_uvs()) {
    return false;
  }
  const auto& adj = topo.edge_faces[edge];
  if (adj.size() != 2) {
    return false;
  }
  const Edge e = topo.edges[edge];
  auto uv_of = [&](int face, int vertex) {
    const Tri& t = mesh.faces[face];
    for (int k = 0; k < 3; ++k) {
      if (t[k] == vertex) {
        return mesh.face_uvs[face][k];
      }
    }
    return -1;
  };
  return uv_of(adj[0], e.a) != uv_of(adj[1], e.a) || uv_of(adj[0], e.b) != uv_of(adj[1], e.b);
}

Vec3 face_cross(const TriangleMesh& mesh, int face) {
  const Tri& t = mesh.faces[face];
  const Vec3& p0 = mesh.vertices[t[0]];
  return (mesh.vertices[t[1]] - p0).cross(mesh.vertices[t[2]] - p0);
}

double face_area(const TriangleMesh& mesh, int face) { return 0.5 * face_cross(mesh, face).norm(); }

double average_edge_length(const TriangleMesh& mesh) {
  const MeshTopology topo = build_topology(mesh);
  if (topo.edges.empty()) {
    return 0.0;
  }
  double total = 0.0;
  for (const Edge& e : topo.edges) {
    total += (mesh.vertices[e.a] - mesh.vertices[e.b]).norm();
  }
  return total / static_cast<double>(topo.edges.size());
}

std::pair<Vec3, Vec3> bounding_box(const TriangleMesh& mesh) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const Vec3& p : mesh.vertices) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return {lo, hi};
}

double bounding_box_diagonal(const TriangleMesh& mesh) {
  if (mesh.vertices.empty()) {
    return 0.0;
  }
  const auto [lo, hi] = bounding_box(mesh);
  return (hi - lo).norm();
}

std::vector<Vec3> vertex_normals_unchecked(const TriangleMesh& mesh) {
  std::vector<Vec3> acc(mesh.vertices.size(), Vec3::Zero());
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Vec3 c = face_cross(mesh, f);
    for (int v : mesh.faces[f]) {
      acc[v] += c;
    }
  }
  for (Vec3& n : acc) {
    const double len = n.norm();
    n = len > 0.0 ? Vec3(n / len) : Vec3::Zero();
  }
  return acc;
}

std::vector<Vec3> vertex_normals(const TriangleMesh& mesh) {
  std::vector<Vec3> acc(mesh.vertices.size(), Vec3::Zero());
  std::vector<int> valence(mesh.vertices.size(), 0);
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Vec3 c = face_cross(mesh, f);
    if (c.squaredNorm() == 0.0) {
      throw GeometryError(fmt::format("vertex_normals: face {} is degenerate", f));
    }
    for (int v : mesh.faces[f]) {
      acc[v] += c;
      ++valence[v];
    }
  }
  for (std::size_t v = 0; v < acc.size(); ++v) {
    const double len = acc[v].norm();
    if (valence[v] == 0 || len == 0.0) {
      throw GeometryError(fmt::format("vertex_normals: vertex {} has no defined normal{}", v,
                                      valence[v] == 0 ? " (isolated)" : ""));
    }
    acc[v] /= len;
  }
  return acc;
}

std::vector<Vec3> vertex_normals_backward(const TriangleMesh& mesh,
                                          std::span<const Vec3> grad_normals) {
  const int n = mesh.vertex_count();
  std::vector<Vec3> acc(n, Vec3::Zero());
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Vec3 c = face_cross(mesh, f);
    for (int v : mesh.faces[f]) {
      acc[v] += c;
    }
  }
  // dL/dm for the unnormalized accumulated normal m.
  std::vector<Vec3> grad_m(n, Vec3::Zero());
  for (int v = 0; v < n; ++v) {
    const double len = acc[v].norm();
    if (len == 0.0) {
      continue;
    }
    const Vec3 nv = acc[v] / len;
    const Vec3& g = grad_normals[v];
    grad_m[v] = (g - nv * nv.dot(g)) / len;
  }
  std::vector<Vec3> grad(n, Vec3::Zero());
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Tri& t = mesh.faces[f];
    const Vec3 gc = grad_m[t[0]] + grad_m[t[1]] + grad_m[t[2]];
    const Vec3 e1 = mesh.vertices[t[1]] - mesh.vertices[t[0]];
    const Vec3 e2 = mesh.vertices[t[2]] - mesh.vertices[t[0]];
    const Vec3 g1 = e2.cross(gc);
    const Vec3 g2 = gc.cross(e1);
    grad[t[1]] += g1;
    grad[t[2]] += g2;
    grad[t[0]] -= g1 + g2;
  }
  return grad;
}

TriangleMesh flip_orientation(const TriangleMesh& mesh) {
  TriangleMesh out = mesh;
  for (Tri& t : out.faces) {
    std::swap(t[1], t[2]);
  }
  for (Tri& t : out.face_uvs) {
    std::swap(t[1], t[2]);
  }
  return out;
}

} // namespace meshalign
