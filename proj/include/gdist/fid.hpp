#pragma once

// Frechet distance between Gaussian fits of two representation sets, and the
// cluster-size / WCSS bounds on its two terms.

#include <Eigen/Eigenvalues>

#include "gdist/cluster.hpp"

namespace gdist {

inline constexpr double kPsdTolerance = 1e-8;

struct GaussianStats {
  Vector mu;
  Matrix sigma;  // biased (1/N) covariance
};

inline GaussianStats gaussian_stats(const Matrix& h, bool normalize_rows = true) {
  if (h.rows() < 2) throw ShapeError("gaussian_stats: need at least two rows");
  const Matrix x = normalize_rows ? row_normalized(h) : h;
  GaussianStats s;
  s.mu = x.colwise().mean().transpose();
  const Matrix centered = x.rowwise() - s.mu.transpose();
  s.sigma = (centered.transpose() * centered) / static_cast<double>(x.rows());
  s.sigma = 0.5 * (s.sigma + s.sigma.transpose());
  return s;
}

namespace detail {

inline Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> checked_eigen(const Matrix& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(0.5 * (m + m.transpose())));
  if (es.info() != Eigen::Success) throw Error(std::string(what) + ": eigendecomposition failed");
  if (es.eigenvalues().size() > 0 && es.eigenvalues().minCoeff() < -kPsdTolerance)
    throw Error("covariance not PSD within tolerance");
  return es;
}

}  // namespace detail

// tr((A B)^{1/2}) = sum_i sqrt(lambda_i(A^{1/2} B A^{1/2})).
inline double trace_sqrt_product(const Matrix& sigma_a, const Matrix& sigma_b) {
  require(sigma_a.rows() == sigma_a.cols() && sigma_b.rows() == sigma_b.cols() && sigma_a.rows() == sigma_b.rows(),
          "trace_sqrt_product: covariance shapes differ");
  detail::checked_eigen(sigma_b, "trace_sqrt_product");
  const auto ea = detail::checked_eigen(sigma_a, "trace_sqrt_product");
  const Eigen::VectorXd root = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd sqrt_a = ea.eigenvectors() * root.asDiagonal() * ea.eigenvectors().transpose();
  const Matrix inner = sqrt_a * Eigen::MatrixXd(sigma_b) * sqrt_a;
  const auto ei = detail::checked_eigen(inner, "trace_sqrt_product");
  return ei.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

// ||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a S_b)^{1/2}), clamped to 0 within tolerance.
inline double fid(const GaussianStats& a, const GaussianStats& b) {
  require(a.mu.size() == b.mu.size() && a.sigma.rows() == b.sigma.rows(), "fid: dimension mismatch");
  const double value =
      (a.mu - b.mu).squaredNorm() + a.sigma.trace() + b.sigma.trace() - 2.0 * trace_sqrt_product(a.sigma, b.sigma);
  if (value < 0.0 && value >= -kPsdTolerance) return 0.0;
  return value;
}

// Covariance part of the Frechet distance alone.
inline double fid_covariance_term(const GaussianStats& a, const GaussianStats& b) {
  return a.sigma.trace() + b.sigma.trace() - 2.0 * trace_sqrt_product(a.sigma, b.sigma);
}

// (1/N^2) sum_i (N/n - |C_i|)^2: bound on the mean shift for unit-norm rows.
inline double theorem1_bound(const Clustering& clustering) {
  const double N = static_cast<double>(clustering.num_points());
  const double n = static_cast<double>(clustering.n);
  double total = 0.0;
  for (Index s : clustering.sizes) {
    const double diff = N / n - static_cast<double>(s);
    total += diff * diff;
  }
  return total / (N * N);
}

// (1/N) sum_i sum_{j in C_i} ||H_j - H'_i||^2 + (n c_max / N) * mean_shift_sq
//   + (c_max / c_min + N / (n c_min)) * tr(Sigma_org).
// Upper-bounds fid_covariance_term(stats_org, stats_syn) when H'_i are the cluster means of H.
inline double theorem2_bound(const Matrix& h, const Matrix& h_prime, const Clustering& clustering,
                             const GaussianStats& stats_org, double mean_shift_sq) {
  clustering.validate();
  require(h.rows() == clustering.num_points() && h_prime.rows() == clustering.n && h.cols() == h_prime.cols(),
          "theorem2_bound: shape mismatch");
  const double N = static_cast<double>(clustering.num_points());
  const double n = static_cast<double>(clustering.n);
  const double c_max = static_cast<double>(clustering.max_size());
  const double c_min = static_cast<double>(clustering.min_size());
  double within = 0.0;
  for (Index j = 0; j < h.rows(); ++j)
    within += (h.row(j) - h_prime.row(clustering.assignment[static_cast<std::size_t>(j)])).squaredNorm();
  return within / N + (n * c_max / N) * mean_shift_sq + (c_max / c_min + N / (n * c_min)) * stats_org.sigma.trace();
}

}  // namespace gdist
