#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "rfx/rng.hpp"

namespace rfx {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Result of maximizing phi^T eta over the ellipsoid ||eta||_Sigma <= sqrt(sigma).
struct Bonus {
  double value = 0.0;
  Vector maximizer;
};

/// Regularized design matrix lambda*I + sum phi phi^T.
///
/// All Sigma^{-1} products go through triangular solves against a cached
/// Cholesky factor; the factor is rebuilt lazily after updates. Not safe for
/// concurrent use of a single instance (const reads may refresh the cache).
class CovarianceAccumulator {
 public:
  explicit CovarianceAccumulator(int dim, double lambda = 1.0);

  /// Adds phi phi^T. Throws rfx::Error on dimension mismatch.
  void update(const Vector& phi);

  /// ||x||_{Sigma^{-1}}
  double norm_inv(const Vector& x) const;
  /// ||x||_Sigma
  double norm_fwd(const Vector& x) const;
  /// x^T Sigma^{-1} x without the square root.
  double quad_inv(const Vector& x) const;

  double min_eigenvalue() const;
  double log_det() const;

  /// Solves Sigma theta = rhs.
  Vector solve(const Vector& rhs) const;

  /// sqrt(sigma) ||phi||_{Sigma^{-1}} and its maximizer sqrt(sigma) Sigma^{-1} phi / ||phi||_{Sigma^{-1}}.
  Bonus bonus(double sigma, const Vector& phi) const;

  /// Draws xi ~ N(0, sigma Sigma^{-1}) as sqrt(sigma) L^{-T} z with Sigma = L L^T.
  Vector sample_gaussian_inv(double sigma, Rng& rng) const;

  int dim() const { return dim_; }
  double lambda() const { return lambda_; }
  long sample_count() const { return count_; }
  const Matrix& matrix() const { return matrix_; }

 private:
  const Eigen::LLT<Matrix>& factor() const;
  void check_dim(const Vector& x, const char* what) const;

  int dim_;
  double lambda_;
  long count_ = 0;
  Matrix matrix_;
  mutable Eigen::LLT<Matrix> llt_;
  mutable bool stale_ = true;
};

}  // namespace rfx
