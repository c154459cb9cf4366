#include "meshalign/laplacian.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "meshalign/error.hpp"

namespace meshalign {

SparseLaplacian cotangent_laplacian(const TriangleMesh& mesh) {
  const int n = mesh.vertex_count();
  std::map<Edge, double> half_cot;
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Tri& t = mesh.faces[f];
    const double area2 = face_cross(mesh, f).norm();
    if (!(area2 > 0.0)) {
      throw GeometryError(fmt::format("cotangent_laplacian: face {} ({}, {}, {}) has zero area", f,
                                      t[0], t[1], t[2]));
    }
    for (int k = 0; k < 3; ++k) {
      const int i = t[(k + 1) % 3];
      const int j = t[(k + 2) % 3];
      const Vec3 a = mesh.vertices[i] - mesh.vertices[t[k]];
      const Vec3 b = mesh.vertices[j] - mesh.vertices[t[k]];
      half_cot[make_edge(i, j)] += 0.5 * a.dot(b) / area2;
    }
  }

  SparseLaplacian out;
  out.weights.reserve(half_cot.size());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(half_cot.size() * 4);
  std::vector<double> diagonal(n, 0.0);
  for (const auto& [edge, raw] : half_cot) {
    const double w = std::max(raw, 0.0);
    out.weights.push_back({edge, w});
    if (w == 0.0) {
      continue;
    }
    triplets.emplace_back(edge.a, edge.b, -w);
    triplets.emplace_back(edge.b, edge.a, -w);
    diagonal[edge.a] += w;
    diagonal[edge.b] += w;
  }
  for (int i = 0; i < n; ++i) {
    triplets.emplace_back(i, i, diagonal[i]);
  }
  out.matrix.resize(n, n);
  out.matrix.setFromTriplets(triplets.begin(), triplets.end());
  out.matrix.makeCompressed();
  return out;
}

} // namespace meshalign
