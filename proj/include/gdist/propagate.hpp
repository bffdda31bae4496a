#pragma once

// Graph Laplacian smoothing: truncated power series and the exact solve it approximates.

#include <Eigen/SparseCholesky>

#include "gdist/graph.hpp"

namespace gdist {

struct PropagationConfig {
  double alpha = 0.8;
  Index T = 5;

  void validate() const {
    require(alpha >= 0.0 && alpha < 1.0, "propagation alpha must lie in [0, 1)");
    require(T >= 0, "propagation depth T must be nonnegative");
  }
};

// sum_{t=0}^{T} (1-alpha) alpha^t Op^t X for any linear operator `apply`
// (sparse or dense). Terms are accumulated in order t = 0, 1, ..., T.
template <class ApplyOp>
Matrix propagate_series(ApplyOp&& apply, const Matrix& x, const PropagationConfig& cfg) {
  cfg.validate();
  Matrix power = x;
  Matrix z = (1.0 - cfg.alpha) * x;
  double coeff = 1.0 - cfg.alpha;
  for (Index t = 1; t <= cfg.T; ++t) {
    power = apply(power);
    coeff *= cfg.alpha;
    z.noalias() += coeff * power;
  }
  return z;
}

inline Matrix gls_propagate(const SparseGraph& a_norm, const Matrix& x, const PropagationConfig& cfg) {
  require(a_norm.num_nodes() == x.rows(), "gls_propagate: feature rows must equal node count");
  return propagate_series([&](const Matrix& m) { return spmm(a_norm, m); }, x, cfg);
}

inline Matrix gls_propagate_dense(const Matrix& a, const Matrix& x, const PropagationConfig& cfg) {
  require(a.rows() == a.cols() && a.cols() == x.rows(), "gls_propagate_dense: shape mismatch");
  return propagate_series([&](const Matrix& m) -> Matrix { return a * m; }, x, cfg);
}

// Dense propagation operator S = sum_t (1-alpha) alpha^t A^t, so that the series
// applied to any X equals S X. Used where the same small operator is applied
// repeatedly and its transpose is needed for backpropagation.
inline Matrix propagation_operator(const Matrix& a, const PropagationConfig& cfg) {
  return gls_propagate_dense(a, Matrix::Identity(a.rows(), a.cols()), cfg);
}

// Solves (I - alpha A) Z = (1 - alpha) X with a sparse Cholesky factorization.
// Throws when the relative residual exceeds `max_residual`.
inline Matrix gls_solve_exact(const SparseGraph& a_norm, const Matrix& x, double alpha, double max_residual = 1e-10) {
  require(alpha >= 0.0 && alpha < 1.0, "gls_solve_exact: alpha must lie in [0, 1)");
  require(a_norm.num_nodes() == x.rows(), "gls_solve_exact: feature rows must equal node count");
  using SpMat = Eigen::SparseMatrix<double>;
  SpMat identity(x.rows(), x.rows());
  identity.setIdentity();
  const SpMat system = identity - alpha * SpMat(a_norm.to_eigen());

  Eigen::SimplicialLDLT<SpMat> solver(system);
  if (solver.info() != Eigen::Success) throw Error("gls_solve_exact: factorization failed");
  const Eigen::MatrixXd rhs = (1.0 - alpha) * Eigen::MatrixXd(x);
  const Eigen::MatrixXd sol = solver.solve(rhs);

  const double rhs_norm = rhs.norm();
  const double residual = (system * sol - rhs).norm() / (rhs_norm > 0.0 ? rhs_norm : 1.0);
  if (!(residual <= max_residual))
    throw Error("gls_solve_exact: solver did not converge, residual " + std::to_string(residual));
  return Matrix(sol);
}

}  // namespace gdist
