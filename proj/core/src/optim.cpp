#include "meshalign/optim.hpp"

#include <cmath>

#include <fmt/format.h>

#include "meshalign/error.hpp"

namespace meshalign {

LaplacianPrecond::LaplacianPrecond(const SparseLaplacian& laplacian, double lambda) : lambda_(lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ConfigError(fmt::format("preconditioner weight must be finite and non-negative, got {}", lambda));
  }
  const Eigen::SparseMatrix<double>& L = laplacian.matrix;
  if (L.rows() != L.cols()) {
    throw ConfigError("Laplacian must be square");
  }
  const Eigen::SparseMatrix<double> asym = L - Eigen::SparseMatrix<double>(L.transpose());
  double scale = 0.0;
  for (int k = 0; k < L.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(L, k); it; ++it) {
      scale = std::max(scale, std::abs(it.value()));
    }
  }
  for (int k = 0; k < asym.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(asym, k); it; ++it) {
      if (std::abs(it.value()) > 1e-12 * scale) {
        throw ConfigError("Laplacian is not symmetric");
      }
    }
  }
  Eigen::SparseMatrix<double> id(L.rows(), L.cols());
  id.setIdentity();
  a_ = id + lambda * L;
  a_.makeCompressed();
  solver_.compute(a_);
  if (solver_.info() != Eigen::Success) {
    throw NumericError("sparse Cholesky factorization of I + lambda L failed");
  }
}

RowMatrixX3d LaplacianPrecond::solve(const RowMatrixX3d& b) const {
  if (b.rows() != a_.rows()) {
    throw ConfigError(fmt::format("solve: right-hand side has {} rows, expected {}", b.rows(), a_.rows()));
  }
  RowMatrixX3d out(b.rows(), 3);
  for (int c = 0; c < 3; ++c) {
    const Eigen::VectorXd col = b.col(c);
    out.col(c) = solver_.solve(col);
  }
  return out;
}

RowMatrixX3d LaplacianPrecond::apply(const RowMatrixX3d& x) const {
  RowMatrixX3d out(x.rows(), 3);
  for (int c = 0; c < 3; ++c) {
    const Eigen::VectorXd col = x.col(c);
    out.col(c) = a_ * col;
  }
  return out;
}

void reset_latent(OptState& state, const LaplacianPrecond& precond) {
  state.mu = precond.apply(state.mesh.positions());
}

void require_finite_gradient(const RowMatrixX3d& grad, int iteration, const std::string& constraint) {
  if (grad.allFinite()) {
    return;
  }
  double max_abs = 0.0;
  int bad = 0;
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    const double v = grad.data()[i];
    if (std::isfinite(v)) {
      max_abs = std::max(max_abs, std::abs(v));
    } else {
      ++bad;
    }
  }
  throw NumericError(fmt::format("non-finite gradient at iteration {} ({} constraint): {} bad entries, max |g| "
                                 "among finite entries {}",
                                 iteration, constraint, bad, max_abs));
}

namespace {

void check_shape(const OptState& state, const LaplacianPrecond& precond, const RowMatrixX3d& grad) {
  if (grad.rows() != state.mesh.vertex_count() || precond.size() != state.mesh.vertex_count()) {
    throw ConfigError(fmt::format("step: gradient has {} rows, mesh {} vertices, preconditioner size {}",
                                  grad.rows(), state.mesh.vertex_count(), precond.size()));
  }
}

} // namespace

void step(OptState& state, const LaplacianPrecond& precond, const RowMatrixX3d& grad,
          const std::string& constraint) {
  check_shape(state, precond, grad);
  require_finite_gradient(grad, state.iteration, constraint);
  const RowMatrixX3d d = precond.solve(precond.solve(grad));
  state.mesh.positions() -= state.eta * d;
  state.mu = precond.apply(state.mesh.positions());
  ++state.iteration;
}

void step_latent(OptState& state, const LaplacianPrecond& precond, const RowMatrixX3d& grad,
                 const std::string& constraint) {
  check_shape(state, precond, grad);
  require_finite_gradient(grad, state.iteration, constraint);
  state.mu -= state.eta * precond.solve(grad);
  state.mesh.positions() = precond.solve(state.mu);
  ++state.iteration;
}

double set_eta(const TriangleMesh& mesh, double fraction) {
  if (!(fraction > 0.0)) {
    throw ConfigError("step-size fraction must be positive");
  }
  const double diag = mesh.vertices.empty() ? 0.0 : bounding_box_diagonal(mesh);
  if (!(diag > 0.0)) {
    throw GeometryError("cannot derive a step size from a mesh with zero extent");
  }
  return fraction * diag;
}

RowMatrixX3d to_matrix(const std::vector<Vec3>& v) {
  RowMatrixX3d m(static_cast<Eigen::Index>(v.size()), 3);
  for (std::size_t i = 0; i < v.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
  }
  return m;
}

} // namespace meshalign
