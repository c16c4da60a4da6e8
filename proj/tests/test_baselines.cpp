#include <gtest/gtest.h>

#include <Eigen/LU>

#include <cmath>
#include <numeric>

#include "rfx/baselines.hpp"
#include "rfx/diagnostics.hpp"
#include "rfx/error.hpp"

using namespace rfx;

namespace {

std::vector<Vector> basis(int d) {
  std::vector<Vector> out;
  for (int i = 0; i < d; ++i) out.push_back(Vector::Unit(d, i));
  return out;
}

double g_oracle(const std::vector<Vector>& feats, const std::vector<double>& w) {
  const int d = static_cast<int>(feats.front().size());
  Matrix m = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < feats.size(); ++i) m += w[i] * feats[i] * feats[i].transpose();
  const Matrix inv = m.inverse();
  double g = 0.0;
  for (const auto& f : feats) g = std::max(g, f.dot(inv * f));
  return g;
}

std::vector<Vector> random_features(Rng& rng, int n, int d) {
  std::vector<Vector> out;
  for (int i = 0; i < n; ++i) {
    Vector v(d);
    for (int j = 0; j < d; ++j) v(j) = rng.normal();
    out.push_back(v / std::max(1.0, v.norm()));
  }
  return out;
}

// Action 0 at t=0 is the only route to the state whose feature is e2 at t=1.
LinearMdp rare_direction_env() {
  LinearMdp env;
  env.horizon = 2;
  env.n_states = 3;
  env.n_actions = 4;
  Matrix f0 = Matrix::Zero(12, 2), f1 = Matrix::Zero(12, 2), p = Matrix::Zero(12, 3);
  for (int s = 0; s < 3; ++s) {
    for (int a = 0; a < 4; ++a) {
      f0(s * 4 + a, a == 0 ? 1 : 0) = 1.0;
      p(s * 4 + a, a == 0 ? 2 : 1) = 1.0;
      if (s > 0) f1(s * 4 + a, s - 1) = 1.0;
    }
  }
  f1.row(0) = f1.row(4);
  f1.row(1) = f1.row(4);
  f1.row(2) = f1.row(4);
  f1.row(3) = f1.row(4);
  env.features = {f0, f1};
  env.transitions = {p};
  env.start_dist = Vector::Unit(3, 0);
  return env;
}

}  // namespace

TEST(Design, CanonicalBasisIsUniform) {
  for (int d : {1, 2, 5}) {
    const DesignWeights w = goptimal_design(basis(d));
    for (double x : w.weights) EXPECT_NEAR(x, 1.0 / d, 1e-15);
    EXPECT_NEAR(w.g_value, d, 1e-12);
    EXPECT_TRUE(w.converged);
    EXPECT_EQ(w.rank, d);
  }
}

TEST(Design, ConvergedCertificateInRange) {
  Rng rng(1);
  for (int k = 0; k < 20; ++k) {
    const int d = 2 + k % 4;
    const auto feats = random_features(rng, 3 * d + k, d);
    const double tol = 0.05;
    const DesignWeights w = goptimal_design(feats, tol);
    ASSERT_TRUE(w.converged);
    EXPECT_GE(w.g_value, d - 1e-9);
    EXPECT_LE(w.g_value, d * (1 + tol));
    EXPECT_NEAR(g_oracle(feats, w.weights), w.g_value, 1e-9);
    EXPECT_NEAR(std::accumulate(w.weights.begin(), w.weights.end(), 0.0), 1.0, 1e-12);
    for (double x : w.weights) EXPECT_GE(x, 0.0);
    for (std::size_t i = 1; i < w.log_det_trace.size(); ++i) {
      EXPECT_GE(w.log_det_trace[i], w.log_det_trace[i - 1] - 1e-12);
    }
  }
}

TEST(Design, DuplicatesMerge) {
  const std::vector<Vector> feats{Vector::Unit(2, 0), Vector::Unit(2, 0), Vector::Unit(2, 1)};
  const DesignWeights w = goptimal_design(feats, 1e-6);
  EXPECT_NEAR(w.weights[0] + w.weights[1], 0.5, 1e-5);
  EXPECT_NEAR(w.weights[2], 0.5, 1e-5);
}

TEST(Design, RankDeficiencyIsReported) {
  Vector a(3), b(3);
  a << 1, 0, 0;
  b << 0.5, 0.5, 0;
  const DesignWeights w = goptimal_design({a, b, 2.0 * a / 3.0});
  EXPECT_EQ(w.rank, 2);
  EXPECT_TRUE(w.converged);
  EXPECT_LE(w.g_value, 2 * 1.05);
  EXPECT_THROW(goptimal_design({}), Error);
}

TEST(Design, LevelDesignSupport) {
  LowRankOptions o;
  o.dims = {3};
  o.seed = 4;
  const LinearMdp env = make_lowrank_random(o);
  const DesignWeights w = goptimal_level_design(env, 1);
  double total = 0.0;
  for (const auto& p : w.support) {
    EXPECT_EQ(p.t, 1);
    EXPECT_EQ(p.weight, w.weights[env.row(p.state, p.action)]);
    total += p.weight;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Rounding, Examples) {
  EXPECT_EQ(round_allocation({0.5, 0.5}, 10), (std::vector<long>{5, 5}));
  EXPECT_EQ(round_allocation({1.0 / 3, 1.0 / 3, 1.0 / 3}, 10), (std::vector<long>{4, 3, 3}));
  EXPECT_EQ(round_allocation({0.2, 0.8}, 0), (std::vector<long>{0, 0}));
  Rng rng(3);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> w(1 + rng.index(10));
    for (double& x : w) x = rng.uniform();
    const long n = static_cast<long>(rng.index(1000));
    const auto alloc = round_allocation(w, n);
    EXPECT_EQ(std::accumulate(alloc.begin(), alloc.end(), 0L), n);
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_LT(std::abs(alloc[i] - n * w[i] / total), 1.0);
  }
  EXPECT_THROW(round_allocation({0.0, 0.0}, 3), Error);
}

TEST(Generative, DeniedAccessFails) {
  const LinearMdp env = make_tabular(2, 2, 2, 1);
  const DesignWeights w = goptimal_level_design(env, 0);
  Rng rng(1);
  try {
    generative_collect(GenerativeModel::deny(env), 0, w, 10, rng);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidInput);
  }
}

TEST(Generative, CountsAndCoverage) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    LowRankOptions o;
    o.dims = {3};
    o.n_states = 6;
    o.n_actions = 3;
    o.seed = seed;
    const LinearMdp env = make_lowrank_random(o);
    const long n = 2000;
    const LsviDataset data = goptimal_explore(GenerativeModel::grant(env), n, seed);
    for (int t = 0; t < env.horizon; ++t) {
      ASSERT_EQ(data.size(t), n);
      double worst = 0.0;
      for (int s = 0; s < env.n_states; ++s) {
        for (int a = 0; a < env.n_actions; ++a) worst = std::max(worst, data.level(t).cov.quad_inv(env.phi(t, s, a)));
      }
      const int r = goptimal_level_design(env, t).rank;
      EXPECT_LE(worst, 1.05 * r / n * 1.05) << "seed " << seed << " t " << t;
    }
  }
}

TEST(Uniform, ChainAndCounts) {
  // Deterministic single-action chain: every episode is identical.
  LinearMdp env;
  env.horizon = 3;
  env.n_states = 3;
  env.n_actions = 1;
  for (int t = 0; t < 3; ++t) env.features.push_back(Matrix::Identity(3, 3));
  Matrix p(3, 3);
  p << 0, 1, 0, 0, 0, 1, 1, 0, 0;
  env.transitions = {p, p};
  env.start_dist = Vector::Unit(3, 0);
  const ExplorationDataset d = uniform_explore(env, 25, 1);
  EXPECT_EQ(d.records.size(), 75u);
  for (const auto& r : d.records) {
    EXPECT_EQ(r.state, r.t);
    EXPECT_EQ(r.next_state, r.t == 2 ? kNoState : r.t + 1);
  }
  const LinearMdp lr = make_tabular(4, 3, 2, 2);
  const ExplorationDataset u = uniform_explore(lr, 40, 3);
  for (int t = 0; t < 4; ++t) EXPECT_EQ(u.count(t), 40);
}

TEST(Uniform, FrancisCoversRareDirectionBetter) {
  const LinearMdp env = rare_direction_env();
  ASSERT_TRUE(validate_env(env).ok());
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    FrancisConfig cfg;
    cfg.k_max = 50;
    cfg.e_max = 4;
    cfg.seed = seed;
    const RunOutput fr = run(env, cfg);
    const long n = fr.data.count(1);
    const LsviDataset un = uniform_explore(env, n, seed).to_lsvi(env);
    const double uf = max_uncertainty(env, fr.lsvi.level(1).cov, 1.0, 1).value;
    const double uu = max_uncertainty(env, un.level(1).cov, 1.0, 1).value;
    wins += uu > uf;
  }
  EXPECT_GE(wins, 16);
}
