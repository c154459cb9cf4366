#pragma once

#include <string>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "meshalign/laplacian.hpp"
#include "meshalign/mesh.hpp"

namespace meshalign {

/// Factorized A = I + lambda L, reused for every solve at one scale.
class LaplacianPrecond {
 public:
  LaplacianPrecond(const SparseLaplacian& laplacian, double lambda);

  [[nodiscard]] double lambda() const { return lambda_; }
  [[nodiscard]] int size() const { return static_cast<int>(a_.rows()); }
  [[nodiscard]] const Eigen::SparseMatrix<double>& matrix() const { return a_; }

  /// A^{-1} b, column by column.
  [[nodiscard]] RowMatrixX3d solve(const RowMatrixX3d& b) const;
  /// A x.
  [[nodiscard]] RowMatrixX3d apply(const RowMatrixX3d& x) const;

 private:
  double lambda_;
  Eigen::SparseMatrix<double> a_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> solver_;
};

/// Optimizer state; mu = A x is kept in sync after every update.
struct OptState {
  TriangleMesh mesh;
  RowMatrixX3d mu;
  int iteration = 0;
  int phase = 0;
  double eta = 0.0;
};

/// Initializes mu = A x for the current mesh.
void reset_latent(OptState& state, const LaplacianPrecond& precond);

/// Throws NumericError naming the iteration and constraint if any entry of
/// `grad` is not finite.
void require_finite_gradient(const RowMatrixX3d& grad, int iteration, const std::string& constraint);

/// x <- x - eta A^{-2} g via two solves; mu is then set to A x.
void step(OptState& state, const LaplacianPrecond& precond, const RowMatrixX3d& grad,
          const std::string& constraint = "gradient");

/// Same update expressed on the latent variable: mu <- mu - eta A^{-1} g,
/// x <- A^{-1} mu.
void step_latent(OptState& state, const LaplacianPrecond& precond, const RowMatrixX3d& grad,
                 const std::string& constraint = "gradient");

/// eta = fraction x bounding-box diagonal.
double set_eta(const TriangleMesh& mesh, double fraction);

RowMatrixX3d to_matrix(const std::vector<Vec3>& v);

} // namespace meshalign
