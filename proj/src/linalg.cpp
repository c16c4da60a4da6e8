#include "rfx/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>

#include "rfx/error.hpp"

namespace rfx {

CovarianceAccumulator::CovarianceAccumulator(int dim, double lambda)
    : dim_(dim), lambda_(lambda), matrix_(Matrix::Identity(dim, dim) * lambda) {
  require(dim >= 1, "covariance dimension must be positive");
  require(lambda > 0.0, "ridge regularizer must be positive");
}

void CovarianceAccumulator::check_dim(const Vector& x, const char* what) const {
  if (x.size() != dim_) {
    fail(ErrorKind::kInvalidInput, std::string(what) + ": expected length " + std::to_string(dim_) +
                                       ", got " + std::to_string(x.size()));
  }
}

void CovarianceAccumulator::update(const Vector& phi) {
  check_dim(phi, "cov_update");
  matrix_.selfadjointView<Eigen::Lower>().rankUpdate(phi);
  matrix_.triangularView<Eigen::StrictlyUpper>() = matrix_.transpose();
  ++count_;
  stale_ = true;
}

const Eigen::LLT<Matrix>& CovarianceAccumulator::factor() const {
  if (stale_) {
    llt_.compute(matrix_);
    stale_ = false;
  }
  return llt_;
}

double CovarianceAccumulator::quad_inv(const Vector& x) const {
  check_dim(x, "norm_inv");
  // ||L^{-1} x||^2 = x^T Sigma^{-1} x
  const Vector y = factor().matrixL().solve(x);
  return y.squaredNorm();
}

double CovarianceAccumulator::norm_inv(const Vector& x) const { return std::sqrt(quad_inv(x)); }

double CovarianceAccumulator::norm_fwd(const Vector& x) const {
  check_dim(x, "norm_fwd");
  return std::sqrt(std::max(0.0, x.dot(matrix_ * x)));
}

double CovarianceAccumulator::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Matrix> es(matrix_, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double CovarianceAccumulator::log_det() const {
  const auto& l = factor().matrixLLT();
  double acc = 0.0;
  for (int i = 0; i < dim_; ++i) acc += std::log(l(i, i));
  return 2.0 * acc;
}

Vector CovarianceAccumulator::solve(const Vector& rhs) const {
  check_dim(rhs, "ridge_solve");
  return factor().solve(rhs);
}

Bonus CovarianceAccumulator::bonus(double sigma, const Vector& phi) const {
  require(sigma > 0.0, "bonus: sigma must be positive");
  check_dim(phi, "bonus");
  const double n = norm_inv(phi);
  if (n == 0.0) return {0.0, Vector::Zero(dim_)};
  const double s = std::sqrt(sigma);
  return {s * n, s * solve(phi) / n};
}

Vector CovarianceAccumulator::sample_gaussian_inv(double sigma, Rng& rng) const {
  require(sigma > 0.0, "sample_gaussian_inv: sigma must be positive");
  Vector z(dim_);
  for (int i = 0; i < dim_; ++i) z(i) = rng.normal();
  // Cov(L^{-T} z) = L^{-T} L^{-1} = Sigma^{-1}
  return std::sqrt(sigma) * factor().matrixU().solve(z);
}

}  // namespace rfx
