#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gdist {

using Index = std::int64_t;

// Row-major so that per-node rows are contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// All recoverable failures surface as this type; `what()` carries the message.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape-mismatch and invalid-argument failures.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Training or solver divergence, tagged with the step at which it happened.
class DivergedError : public Error {
 public:
  DivergedError(const std::string& what, Index step) : Error(what + " (epoch " + std::to_string(step) + ")"), step_(step) {}
  Index step() const noexcept { return step_; }

 private:
  Index step_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

// Single seeded source of randomness threaded through every stage of a run.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double normal(double mean = 0.0, double stddev = 1.0) { return std::normal_distribution<double>(mean, stddev)(engine_); }
  // Uniform integer in [0, n).
  Index index(Index n) { return std::uniform_int_distribution<Index>(0, n - 1)(engine_); }
  bool bernoulli(double p) { return uniform() < p; }

  // Derive an independent child stream; keeps stage outputs stable when an
  // earlier stage changes how many draws it makes.
  Rng fork(std::uint64_t salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(engine_()), static_cast<std::uint32_t>(salt),
                      static_cast<std::uint32_t>(salt >> 32)};
    Rng child;
    child.engine_.seed(seq);
    return child;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// Copy of `m` with every nonzero row scaled to unit L2 norm; zero rows stay zero.
inline Matrix row_normalized(const Matrix& m) {
  Matrix out = m;
  for (Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (norm > 0.0) out.row(i) /= norm;
  }
  return out;
}

// Lowest index of the row maximum.
inline Index row_argmax(const Eigen::Ref<const RowVector>& row) {
  Index best = 0;
  for (Index j = 1; j < row.size(); ++j)
    if (row(j) > row(best)) best = j;
  return best;
}

inline std::vector<Index> argmax_rows(const Matrix& m) {
  std::vector<Index> out(static_cast<std::size_t>(m.rows()));
  for (Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = row_argmax(m.row(i));
  return out;
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace gdist
