#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "rfx/error.hpp"
#include "rfx/linalg.hpp"
#include "rfx/theory.hpp"

using namespace rfx;

namespace {

Vector random_vector(int d, Rng& rng) {
  Vector v(d);
  for (int i = 0; i < d; ++i) v(i) = rng.normal();
  return v;
}

Vector random_unit(int d, Rng& rng) {
  Vector v = random_vector(d, rng);
  return v / v.norm();
}

CovarianceAccumulator diag_acc(double a, double b) {
  // lambda = 1 plus (a - 1) e1 e1^T + (b - 1) e2 e2^T
  CovarianceAccumulator acc(2, 1.0);
  if (a > 1.0) acc.update(Vector::Unit(2, 0) * std::sqrt(a - 1.0));
  if (b > 1.0) acc.update(Vector::Unit(2, 1) * std::sqrt(b - 1.0));
  return acc;
}

CovarianceAccumulator random_acc(int d, int n, Rng& rng) {
  CovarianceAccumulator acc(d, 1.0);
  for (int i = 0; i < n; ++i) acc.update(random_vector(d, rng));
  return acc;
}

// Euclidean projection onto {x : x^T S x <= c} by bisection on the multiplier.
Vector project_ellipsoid(const Eigen::SelfAdjointEigenSolver<Matrix>& es, double c, const Vector& y) {
  const Vector& lam = es.eigenvalues();
  const Vector z = es.eigenvectors().transpose() * y;
  auto shrink = [&](double mu) { return Vector(z.array() / (1.0 + mu * lam.array())); };
  auto norm2 = [&](const Vector& w) { return (w.array().square() * lam.array()).sum(); };
  if (norm2(z) <= c) return y;
  double lo = 0.0, hi = 1.0;
  while (norm2(shrink(hi)) > c) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (norm2(shrink(mid)) > c ? lo : hi) = mid;
  }
  return es.eigenvectors() * shrink(hi);
}

// Projected gradient ascent of phi^T eta over {eta : ||eta||_S <= sqrt(sigma)}.
double constrained_max(const Matrix& s, double sigma, const Vector& phi) {
  const Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  Vector eta = Vector::Zero(phi.size());
  for (int it = 0; it < 5000; ++it) eta = project_ellipsoid(es, sigma, eta + phi);
  return phi.dot(eta);
}

}  // namespace

TEST(Covariance, RankOneUpdateOnIdentity) {
  CovarianceAccumulator acc(2);
  acc.update(Vector::Unit(2, 0));
  Matrix want(2, 2);
  want << 2, 0, 0, 1;
  EXPECT_TRUE(acc.matrix().isApprox(want, 0.0));
  EXPECT_EQ(acc.sample_count(), 1);
}

TEST(Covariance, RepeatedUpdates) {
  CovarianceAccumulator acc(2);
  for (int i = 0; i < 3; ++i) acc.update(Vector::Unit(2, 0));
  Matrix want(2, 2);
  want << 4, 0, 0, 1;
  EXPECT_EQ(acc.matrix(), want);
  EXPECT_EQ(acc.sample_count(), 3);
}

TEST(Covariance, IncrementalMatchesBatchRebuild) {
  Rng rng(11);
  for (int d : {1, 3, 8, 16}) {
    CovarianceAccumulator acc(d, 0.5);
    Matrix batch = 0.5 * Matrix::Identity(d, d);
    for (int i = 0; i < 1000; ++i) {
      const Vector phi = random_unit(d, rng);
      acc.update(phi);
      batch += phi * phi.transpose();
      if (i % 97 == 0) (void)acc.norm_inv(phi);  // interleave cache refreshes
    }
    EXPECT_LE((acc.matrix() - batch).norm() / batch.norm(), 1e-10) << "d=" << d;
  }
}

TEST(Covariance, DimensionMismatchRejected) {
  CovarianceAccumulator acc(3);
  try {
    acc.update(Vector::Ones(2));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidInput);
  }
  EXPECT_THROW(acc.norm_inv(Vector::Ones(4)), Error);
  EXPECT_THROW(CovarianceAccumulator(0), Error);
  EXPECT_THROW(CovarianceAccumulator(2, 0.0), Error);
}

TEST(Covariance, NormInvExamples) {
  CovarianceAccumulator fresh(3);
  EXPECT_DOUBLE_EQ(fresh.norm_inv(Vector::Unit(3, 0)), 1.0);
  const CovarianceAccumulator d41 = diag_acc(4, 1);
  EXPECT_NEAR(d41.norm_inv(Vector::Unit(2, 0)), 0.5, 1e-15);
}

TEST(Covariance, NormFwdExamples) {
  CovarianceAccumulator fresh(2);
  Vector x(2);
  x << 3, 4;
  EXPECT_NEAR(fresh.norm_fwd(x), 5.0, 1e-15);
  EXPECT_NEAR(diag_acc(4, 1).norm_fwd(Vector::Unit(2, 0)), 2.0, 1e-15);
}

TEST(Covariance, CauchySchwarzAndNormConversions) {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = 1 + static_cast<int>(rng.index(6));
    const CovarianceAccumulator acc = random_acc(d, static_cast<int>(rng.index(20)), rng);
    const Vector x = random_vector(d, rng);
    const double x2 = x.squaredNorm();
    const double ni = acc.norm_inv(x), nf = acc.norm_fwd(x);
    EXPECT_GE(ni * ni * nf * nf, x2 * x2 * (1 - 1e-12));
    EXPECT_GE(nf * ni, x2 * (1 - 1e-12));
    const double lmin = acc.min_eigenvalue();
    EXPECT_GE(nf, std::sqrt(lmin) * x.norm() * (1 - 1e-12));
    EXPECT_LE(ni, x.norm() / std::sqrt(lmin) * (1 + 1e-12));
    EXPECT_NEAR(acc.quad_inv(x), ni * ni, 1e-12 * (1 + ni * ni));
  }
}

TEST(Covariance, MinEigenvalue) {
  EXPECT_NEAR(CovarianceAccumulator(4).min_eigenvalue(), 1.0, 1e-12);
  EXPECT_NEAR(diag_acc(4, 1).min_eigenvalue(), 1.0, 1e-12);
  Rng rng(3);
  for (int k = 0; k < 20; ++k) {
    const CovarianceAccumulator acc = random_acc(5, 10, rng);
    const double want = Eigen::SelfAdjointEigenSolver<Matrix>(acc.matrix()).eigenvalues().minCoeff();
    EXPECT_NEAR(acc.min_eigenvalue(), want, 1e-9 * want);
    EXPECT_GE(acc.min_eigenvalue(), acc.lambda() * (1 - 1e-12));
  }
}

TEST(Covariance, MinEigenvalueNondecreasing) {
  Rng rng(8);
  CovarianceAccumulator acc(4);
  double prev = acc.min_eigenvalue();
  for (int i = 0; i < 200; ++i) {
    acc.update(random_unit(4, rng));
    const double now = acc.min_eigenvalue();
    EXPECT_GE(now, prev - 1e-12);
    prev = now;
  }
}

TEST(Covariance, LogDet) {
  EXPECT_NEAR(diag_acc(4, 9).log_det(), std::log(36.0), 1e-13);
  Rng rng(4);
  const CovarianceAccumulator acc = random_acc(4, 7, rng);
  EXPECT_NEAR(acc.log_det(), std::log(acc.matrix().determinant()), 1e-10);
}

TEST(RidgeSolve, Examples) {
  CovarianceAccumulator fresh(2);
  EXPECT_EQ(fresh.solve(Vector::Zero(2)), Vector::Zero(2));
  CovarianceAccumulator one(3);
  one.update(Vector::Unit(3, 0));
  const double v = 0.7;
  const Vector theta = one.solve(Vector::Unit(3, 0) * v);
  EXPECT_NEAR(theta(0), v / 2, 1e-15);
  EXPECT_EQ(theta(1), 0.0);
  EXPECT_EQ(theta(2), 0.0);
}

TEST(RidgeSolve, MatchesDenseSolver) {
  Rng rng(21);
  CovarianceAccumulator acc(3);
  Vector rhs = Vector::Zero(3);
  for (int i = 0; i < 200; ++i) {
    const Vector phi = random_unit(3, rng);
    acc.update(phi);
    rhs += phi * rng.uniform();
  }
  const Vector theta = acc.solve(rhs);
  const Vector dense = acc.matrix().fullPivLu().solve(rhs);
  EXPECT_LE((theta - dense).norm(), 1e-9 * dense.norm());
  EXPECT_LE((acc.matrix() * theta - rhs).norm(), 1e-9 * rhs.norm());
}

TEST(Bonus, Examples) {
  CovarianceAccumulator eye(2);
  EXPECT_NEAR(eye.bonus(4.0, Vector::Unit(2, 0)).value, 2.0, 1e-15);
  Vector phi(2);
  phi << 1, 1;
  phi /= std::sqrt(2.0);
  EXPECT_NEAR(diag_acc(2, 1).bonus(1.0, phi).value, std::sqrt(3.0) / 2.0, 1e-15);
  const Bonus z = eye.bonus(1.0, Vector::Zero(2));
  EXPECT_EQ(z.value, 0.0);
  EXPECT_EQ(z.maximizer, Vector::Zero(2));
}

TEST(Bonus, MaximizerIsFeasibleAndAttains) {
  Rng rng(9);
  for (int k = 0; k < 100; ++k) {
    const int d = 1 + static_cast<int>(rng.index(5));
    const CovarianceAccumulator acc = random_acc(d, 5, rng);
    const double sigma = 0.1 + 3.0 * rng.uniform();
    const Vector phi = random_vector(d, rng);
    const Bonus b = acc.bonus(sigma, phi);
    EXPECT_NEAR(acc.norm_fwd(b.maximizer), std::sqrt(sigma), 1e-9);
    EXPECT_NEAR(phi.dot(b.maximizer), b.value, 1e-9);
    EXPECT_NEAR(b.value, std::sqrt(sigma) * acc.norm_inv(phi), 1e-12);
  }
}

TEST(Bonus, MatchesNumericConstrainedMaximization) {
  Rng rng(17);
  for (int k = 0; k < 100; ++k) {
    const int d = 2 + static_cast<int>(rng.index(3));
    const CovarianceAccumulator acc = random_acc(d, 3, rng);
    const double sigma = 0.2 + rng.uniform();
    const Vector phi = random_vector(d, rng);
    EXPECT_NEAR(acc.bonus(sigma, phi).value, constrained_max(acc.matrix(), sigma, phi), 1e-6) << "instance " << k;
  }
}

TEST(Sampler, IdentityCovariance) {
  CovarianceAccumulator acc(2);
  Rng rng(1);
  const int n = 100000;
  Matrix m = Matrix::Zero(2, 2);
  for (int i = 0; i < n; ++i) {
    const Vector x = acc.sample_gaussian_inv(1.0, rng);
    m += x * x.transpose();
  }
  m /= n;
  EXPECT_LE((m - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 0.02);
}

TEST(Sampler, DiagonalCovariance) {
  const CovarianceAccumulator acc = diag_acc(4, 1);
  Rng rng(2);
  const int n = 100000;
  double s0 = 0, s1 = 0;
  for (int i = 0; i < n; ++i) {
    const Vector x = acc.sample_gaussian_inv(1.0, rng);
    s0 += x(0) * x(0);
    s1 += x(1) * x(1);
  }
  EXPECT_NEAR(s0 / n, 0.25, 0.01);
  EXPECT_NEAR(s1 / n, 1.0, 0.02);
}

TEST(Sampler, Deterministic) {
  const CovarianceAccumulator acc = diag_acc(3, 2);
  Rng a(42), b(42);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(acc.sample_gaussian_inv(0.3, a), acc.sample_gaussian_inv(0.3, b));
}

TEST(Sampler, WhiteningChiSquareMean) {
  Rng rng(13);
  const int d = 4;
  const CovarianceAccumulator acc = random_acc(d, 6, rng);
  const double sigma = 0.7;
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vector x = acc.sample_gaussian_inv(sigma, rng);
    sum += acc.norm_fwd(x) * acc.norm_fwd(x) / sigma;
  }
  EXPECT_NEAR(sum / n, d, 0.1 * std::sqrt(d));
}

TEST(Sampler, ChiSquareTail) {
  Rng rng(14);
  const int d = 3;
  const CovarianceAccumulator acc = random_acc(d, 4, rng);
  const double sigma = 2.0;
  const int n = 100000;
  for (double delta : {0.1, 0.01}) {
    const double level = chi_square_bound(d, delta);
    int hits = 0;
    for (int i = 0; i < n; ++i) {
      const double q = acc.norm_fwd(acc.sample_gaussian_inv(sigma, rng));
      hits += q * q / sigma > level;
    }
    EXPECT_LE(static_cast<double>(hits) / n, delta);
  }
}

TEST(Sampler, SigmaStartKeepsPseudorewardInsideHalfBall) {
  const double delta_pp = 0.01;
  for (int d : {1, 2, 4, 8}) {
    CovarianceAccumulator acc(d);
    const double sigma = sigma_start(d, delta_pp);
    Rng rng(derive_seed(0, "sampler-contract", d));
    int out = 0;
    for (int i = 0; i < 100000; ++i) out += acc.sample_gaussian_inv(sigma, rng).norm() > 0.5;
    EXPECT_LE(out / 1e5, delta_pp) << "d=" << d;
  }
}
