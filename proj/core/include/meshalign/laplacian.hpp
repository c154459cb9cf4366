#pragma once

#include <vector>

#include <Eigen/SparseCore>

#include "meshalign/mesh.hpp"

namespace meshalign {

struct EdgeWeight {
  Edge edge;
  double weight = 0.0;
};

/// L_ij = -w_ij on edges, L_ii = sum_k w_ik, where
/// w_ij = (cot alpha_ij + cot beta_ij) / 2 over the faces opposite the edge.
/// Negative weights are clamped to zero so I + lambda L stays an M-matrix.
struct SparseLaplacian {
  Eigen::SparseMatrix<double> matrix;
  std::vector<EdgeWeight> weights;
};

/// Throws GeometryError naming the first zero-area face.
SparseLaplacian cotangent_laplacian(const TriangleMesh& mesh);

} // namespace meshalign
