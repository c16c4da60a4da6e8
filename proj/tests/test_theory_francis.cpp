#include <gtest/gtest.h>

#include <Eigen/LU>

#include <cmath>
#include <functional>

#include "rfx/baselines.hpp"
#include "rfx/diagnostics.hpp"
#include "rfx/error.hpp"
#include "rfx/francis.hpp"
#include "rfx/stats.hpp"
#include "rfx/theory.hpp"

using namespace rfx;

namespace {

LinearMdp lowrank(std::uint64_t seed, int d, int s, int a, int h) {
  LowRankOptions o;
  o.dims = {d};
  o.horizon = h;
  o.n_states = s;
  o.n_actions = a;
  o.seed = seed;
  return make_lowrank_random(o);
}

FrancisConfig practical(long k_max, int e_max, std::uint64_t seed = 0) {
  FrancisConfig c;
  c.mode = Mode::kPractical;
  c.k_max = k_max;
  c.e_max = e_max;
  c.seed = seed;
  c.episode_budget_cap = 100000;
  return c;
}

// Same closed forms, written out independently.
double q_oracle() { return 0.5 * std::erfc(3.0 / std::sqrt(2.0)); }

long k_max_oracle(int d, double sigma, double eps, double delta_pp, double k_bar) {
  const double gamma = 2.0 * sigma * d * std::log(2.0 * d / delta_pp);
  const double dp = d * std::log(1.0 + k_bar / d);
  const double a = std::sqrt(8.0 * std::log(1.0 / delta_pp));
  const double s = std::sqrt(gamma * dp) + a;
  return static_cast<long>(std::ceil(2.0 / (1.0 - q_oracle()) * s * s / (eps * eps)));
}

LinearMdp single_state(int h) {
  LinearMdp env;
  env.horizon = h;
  env.n_states = 1;
  env.n_actions = 2;
  for (int t = 0; t < h; ++t) env.features.push_back(Matrix::Identity(2, 2) * 0.8);
  for (int t = 0; t + 1 < h; ++t) env.transitions.push_back(Matrix::Ones(2, 1));
  env.start_dist = Vector::Ones(1);
  return env;
}

}  // namespace

TEST(Constants, SigmaStartExamples) {
  EXPECT_NEAR(sigma_start(2, 0.01), 1.0 / (16.0 * std::log(400.0)), 1e-12 / 16);
  EXPECT_NEAR(sigma_start(2, 0.01), 0.01043, 5e-6);
  EXPECT_NEAR(sigma_start(1, 0.5), 1.0 / (8.0 * std::log(4.0)), 1e-14);
  EXPECT_NEAR(sigma_start(1, 0.5), 0.090168, 5e-7);
  EXPECT_THROW(sigma_start(0, 0.5), Error);
  EXPECT_THROW(sigma_start(1, 1.0), Error);
}

TEST(Constants, OverestimationProbability) {
  EXPECT_NEAR(overestimation_probability(), q_oracle(), 1e-15);
  EXPECT_NEAR(overestimation_probability(), 0.0013498980316301, 1e-13);
}

TEST(Constants, EpochLengthExample) {
  const EpochInputs in{overestimation_probability(), 0.01, 1e4};
  const long k = epoch_length(2, 1.0, 0.1, in);
  EXPECT_EQ(k, k_max_oracle(2, 1.0, 0.1, 0.01, 1e4));
  EXPECT_EQ(k, 138262);
  EXPECT_GE(k, 10000);
  EXPECT_LT(k, 1000000);
}

TEST(Constants, EpochLengthMonotoneInEpsilon) {
  const EpochInputs in{overestimation_probability(), 0.01, 1e4};
  long prev = epoch_length(3, 0.5, 0.05, in);
  for (double eps : {0.1, 0.2, 0.4}) {
    const long k = epoch_length(3, 0.5, eps, in);
    EXPECT_LE(k, prev);
    prev = k;
  }
}

TEST(Constants, PracticalOverride) {
  const LinearMdp env = lowrank(1, 2, 4, 2, 3);
  const TheoryConstants c = TheoryConstants::compute(env, practical(50, 6));
  for (int t = 0; t < 3; ++t) {
    EXPECT_EQ(c.k_max[t], 50);
    EXPECT_EQ(c.e_max[t], 6);
  }
}

TEST(Constants, EpochCountExamples) {
  EXPECT_EQ(epoch_count(3, 100.0, 0.01), 20);
  EXPECT_EQ(epoch_count(3, 100.0, 0.01), static_cast<int>(std::ceil(1.0 + std::log2(360000.0))));
  EXPECT_EQ(epoch_count(2, 0.25, 4.0), 1);
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const double alpha = 1.0 + 1000.0 * rng.uniform();
    const double s0 = 0.001 + rng.uniform();
    const double ratio = 4.0 * 9 * alpha / s0;
    if (std::abs(std::log2(ratio) - std::round(std::log2(ratio))) < 1e-9 || ratio < 2.0) continue;
    EXPECT_EQ(epoch_count(3, alpha, 2.0 * s0), epoch_count(3, alpha, s0) - 1);
  }
}

TEST(Constants, AlphaStructure) {
  const AlphaTerms a = alpha_terms(1, 1, 1.0, std::exp(-1.0));
  // Hand evaluation: inner = ln2/2 + ln3 + 1, sqrt(beta^r) = sqrt(1 + ln2) + 1.
  EXPECT_NEAR(a.sqrt_beta_transition, 6.422836989035959, 1e-12);
  EXPECT_NEAR(a.sqrt_beta_reward, 2.301209891047538, 1e-12);
  EXPECT_NEAR(a.alpha, 1035.0466333760571, 1e-12 * 1035);
  EXPECT_NEAR(std::sqrt(a.alpha), 3.0 * (a.sqrt_beta_transition + a.sqrt_beta_reward + 2.0), 1e-12);

  double prev = 0.0;
  for (int d : {1, 2, 4}) {
    const double v = alpha_terms(d, 2, 100.0, 0.01).alpha;
    EXPECT_GT(v, prev);
    prev = v;
  }
  prev = 0.0;
  for (double dp : {0.1, 0.01, 0.001}) {
    const double v = alpha_terms(3, 2, 100.0, dp).alpha;
    EXPECT_GT(v, prev);
    prev = v;
  }
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const AlphaTerms r = alpha_terms(1 + static_cast<int>(rng.index(8)), static_cast<int>(rng.index(8)),
                                     1.0 + 1e6 * rng.uniform(), 0.999 * rng.uniform() + 1e-9, 0.0);
    EXPECT_GE(std::sqrt(r.alpha), 6.0);
  }
}

TEST(Constants, TheoryModeInvariants) {
  const LinearMdp env = lowrank(2, 3, 5, 2, 3);
  FrancisConfig cfg;
  cfg.mode = Mode::kTheory;
  cfg.episode_budget_cap = 10000;
  cfg.delta = 0.1;
  const TheoryConstants c = TheoryConstants::compute(env, cfg);
  EXPECT_DOUBLE_EQ(c.delta_pp, 0.1 / (16.0 * 3 * 10000));
  for (int t = 0; t < 3; ++t) {
    const AlphaTerms& a = c.alpha_terms[t];
    EXPECT_NEAR(std::sqrt(c.alpha[t]), 3.0 * (a.sqrt_beta_transition + a.sqrt_beta_reward + 2.0), 1e-9);
    EXPECT_GT(c.sigma_start[t], 0.0);
    EXPECT_EQ(c.sigma_start[t], sigma_start(3, c.delta_pp));
    for (int e = 1; e <= c.e_max[t]; ++e) EXPECT_EQ(c.sigma(t, e), std::ldexp(c.sigma_start[t], e - 1));
    EXPECT_GE(c.sigma(t, c.e_max[t]), 4.0 * 9 * c.alpha[t]);
    EXPECT_LT(c.sigma(t, c.e_max[t] - 1), 4.0 * 9 * c.alpha[t]);
    EXPECT_EQ(c.k_max[t], k_max_oracle(3, c.sigma(t, c.e_max[t]), cfg.epsilon, c.delta_pp, 10000.0));
  }
}

TEST(Constants, ConfigValidation) {
  const LinearMdp env = lowrank(2, 2, 3, 2, 2);
  for (auto mutate : std::vector<std::function<void(FrancisConfig&)>>{
           [](FrancisConfig& c) { c.epsilon = 0.0; }, [](FrancisConfig& c) { c.epsilon = 1.0; },
           [](FrancisConfig& c) { c.delta = 1.5; }, [](FrancisConfig& c) { c.episode_budget_cap = 0; },
           [](FrancisConfig& c) { c.c_alpha = -1; }, [](FrancisConfig& c) { c.k_max = 0; }}) {
    FrancisConfig c;
    mutate(c);
    EXPECT_THROW(TheoryConstants::compute(env, c), Error);
  }
}

TEST(RunPhase, SingleStateEnv) {
  const LinearMdp env = single_state(2);
  const FrancisConfig cfg = practical(20, 3);
  const TheoryConstants c = TheoryConstants::compute(env, cfg);
  LsviDataset lsvi(env);
  ExplorationDataset data{2, {}};
  long used = 0;
  const PhaseReport r = run_phase(env, 0, cfg, c, lsvi, data, used);
  EXPECT_EQ(r.episodes, 60);
  EXPECT_EQ(used, 60);
  EXPECT_EQ(lsvi.level(0).cov.sample_count(), 60);
  for (const auto& rec : data.records) {
    EXPECT_EQ(rec.state, 0);
    EXPECT_EQ(rec.next_state, 0);
  }
  for (std::size_t i = 1; i < r.lambda_min.size(); ++i) EXPECT_GE(r.lambda_min[i], r.lambda_min[i - 1] - 1e-12);
  ASSERT_EQ(r.epochs.size(), 3u);
  for (int e = 0; e < 3; ++e) {
    EXPECT_EQ(r.epochs[e].sigma, std::ldexp(c.sigma_start[0], e));
    EXPECT_EQ(r.epochs[e].episodes, 20);
    EXPECT_GE(r.epochs[e].lambda_min_end, r.epochs[e].lambda_min_start);
  }
  EXPECT_THROW(run_phase(env, 2, cfg, c, lsvi, data, used), Error);
}

TEST(RunPhase, PotentialLedgerMatchesDenseReplay) {
  const LinearMdp env = lowrank(5, 3, 5, 2, 3);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const RunOutput out = run(env, practical(50, 6, seed));
    ASSERT_EQ(out.report.phases.size(), 3u);
    for (int p = 0; p < 3; ++p) {
      const PhaseReport& pr = out.report.phases[p];
      EXPECT_TRUE(pr.potential_ok);
      Matrix sigma = Matrix::Identity(3, 3);
      double sum = 0.0;
      for (const Vector& phi : out.lsvi.level(p).features) {
        sigma += phi * phi.transpose();
        sum += std::min(1.0, phi.dot(sigma.inverse() * phi));
      }
      const double log_det = std::log(sigma.determinant());
      EXPECT_NEAR(pr.potential_sum, sum, 1e-9);
      EXPECT_NEAR(pr.log_det_ratio, log_det, 1e-9);
      EXPECT_LE(sum, log_det + 1e-12);
      EXPECT_EQ(out.data.count(p), 300);
      EXPECT_EQ(pr.episodes, 300);
    }
    EXPECT_EQ(out.report.total_episodes, 900);
  }
}

TEST(RunPhase, Deterministic) {
  const LinearMdp env = lowrank(6, 3, 5, 2, 3);
  const RunOutput a = run(env, practical(30, 3, 11)), b = run(env, practical(30, 3, 11));
  ASSERT_EQ(a.data.records.size(), b.data.records.size());
  for (std::size_t i = 0; i < a.data.records.size(); ++i) {
    EXPECT_EQ(a.data.records[i].state, b.data.records[i].state);
    EXPECT_EQ(a.data.records[i].action, b.data.records[i].action);
    EXPECT_EQ(a.data.records[i].next_state, b.data.records[i].next_state);
  }
  const RunOutput c = run(env, practical(30, 3, 12));
  bool differ = false;
  for (std::size_t i = 0; i < c.data.records.size(); ++i) differ |= c.data.records[i].next_state != a.data.records[i].next_state;
  EXPECT_TRUE(differ);
}

TEST(RunPhase, RecordsCarrySchedule) {
  const LinearMdp env = lowrank(7, 2, 4, 3, 2);
  const FrancisConfig cfg = practical(10, 4, 1);
  const RunOutput out = run(env, cfg);
  const TheoryConstants c = TheoryConstants::compute(env, cfg);
  for (const auto& r : out.data.records) {
    EXPECT_EQ(r.phase, r.t);
    EXPECT_EQ(r.epoch, 1 + r.episode / 10);
    EXPECT_EQ(r.sigma, c.sigma(r.t, r.epoch));
    EXPECT_EQ(r.next_state == kNoState, r.t == env.horizon - 1);
  }
}

TEST(Run, BudgetAbort) {
  const LinearMdp env = lowrank(7, 2, 4, 3, 3);
  FrancisConfig cfg = practical(10, 2);
  cfg.episode_budget_cap = 1;
  const RunOutput out = run(env, cfg);
  EXPECT_EQ(out.report.status, RunStatus::kBudgetAbort);
  EXPECT_EQ(out.report.total_episodes, 1);
  EXPECT_EQ(out.data.records.size(), 1u);
  EXPECT_EQ(out.report.phases.size(), 1u);
  EXPECT_EQ(out.report.phases[0].status, RunStatus::kBudgetAbort);
}

TEST(Run, SingleStepHorizon) {
  const LinearMdp env = lowrank(8, 3, 4, 3, 1);
  const RunOutput out = run(env, practical(25, 2));
  EXPECT_EQ(out.lsvi.horizon(), 1);
  EXPECT_EQ(out.data.count(0), 50);
  EXPECT_EQ(out.report.total_episodes, 50);
  for (const auto& r : out.data.records) EXPECT_EQ(r.next_state, kNoState);
}

TEST(Run, TheoryModePlannedEpisodes) {
  const LinearMdp env = lowrank(9, 2, 3, 2, 2);
  FrancisConfig cfg;
  cfg.mode = Mode::kTheory;
  cfg.episode_budget_cap = 500;
  cfg.epsilon = 0.5;
  const RunOutput out = run(env, cfg);
  EXPECT_EQ(out.report.status, RunStatus::kBudgetAbort);
  const double dpp = cfg.delta / (16.0 * 2 * 500);
  const double a0 = alpha_terms(2, 2, 500, dpp).alpha;
  const int e_max = static_cast<int>(std::ceil(1.0 + std::log2(4.0 * 4 * a0 / sigma_start(2, dpp))));
  const long k_max = k_max_oracle(2, std::ldexp(sigma_start(2, dpp), e_max - 1), 0.5, dpp, 500);
  EXPECT_EQ(out.report.phases[0].planned_episodes, static_cast<double>(e_max) * k_max);
  EXPECT_EQ(out.report.total_episodes, 500);
}

TEST(Run, RejectsInvalidEnv) {
  LinearMdp env = lowrank(9, 2, 3, 2, 2);
  env.features[0](0, 0) = 2.0;
  EXPECT_THROW(run(env, practical(5, 1)), Error);
}

TEST(Plan, ZeroRewardAndMissingLevels) {
  const LinearMdp env = lowrank(10, 3, 5, 2, 3);
  const RunOutput out = run(env, practical(40, 3));
  const PlanResult z = plan_and_extract(env, out.lsvi, RewardSpec::zero(env));
  EXPECT_EQ(z.row.suboptimality, 0.0);
  EXPECT_EQ(z.row.v_star, 0.0);

  LsviDataset partial(env);
  for (const auto& r : out.data.records) {
    if (r.t < 2) partial.add(env, r.t, Transition{r.state, r.action, r.next_state, std::nullopt});
  }
  try {
    plan_and_extract(env, partial, RewardSpec::zero(env));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidInput);
  }

  RewardSpec implicit = RewardSpec::zero(env);
  implicit.regularity = RegularityClass::kImplicit;
  EXPECT_THROW(plan_and_extract(env, out.lsvi, implicit), Error);
}

TEST(Plan, ManyRewardsOneDataset) {
  const LinearMdp env = make_tabular(2, 3, 2, 3);
  const LsviDataset data = uniform_explore(env, 5000, 1).to_lsvi(env);
  Rng rng(6);
  for (int i = 0; i < 20; ++i) {
    RewardSpec r;
    for (int t = 0; t < 2; ++t) {
      Vector th(6);
      for (int j = 0; j < 6; ++j) th(j) = rng.normal();
      r.theta.push_back(th / (2.0 * th.norm()));
    }
    const PlanResult res = plan_and_extract(env, data, r);
    EXPECT_NEAR(res.row.v_star, exact_optimal(env, r).value, 1e-15);
    EXPECT_NEAR(res.row.v_pi, exact_policy_value(env, r, res.policy), 1e-15);
    EXPECT_LE(res.row.suboptimality, 0.1);
    EXPECT_GE(res.row.suboptimality, -1e-12);
  }
}

TEST(Plan, NoiseIsSeeded) {
  const LinearMdp env = make_tabular(2, 3, 2, 3);
  const LsviDataset data = uniform_explore(env, 500, 1).to_lsvi(env);
  RewardSpec r = RewardSpec::zero(env);
  r.theta[0](0) = 0.5;
  PlanOptions o;
  o.reward_noise = true;
  o.noise_seed = 3;
  const PlanResult a = plan_and_extract(env, data, r, o), b = plan_and_extract(env, data, r, o);
  EXPECT_EQ(a.row.v_hat, b.row.v_hat);
  EXPECT_NE(a.row.v_hat, plan_and_extract(env, data, r).row.v_hat);
}

TEST(Property, OverestimationFrequency) {
  // Well-explored earlier level, fixed covariance at level p: the greedy plan's
  // feature mean beats U* = max_pi sqrt(sigma) ||phibar_pi||_{Sigma^-1} at least q of the time.
  const LinearMdp env = lowrank(12, 2, 3, 2, 2);
  const LsviDataset base = uniform_explore(env, 20000, 2).to_lsvi(env);
  LsviDataset data(env);
  for (const auto& tr : base.level(0).records) data.add(env, 0, tr);
  for (int k = 0; k < 5; ++k) data.add(env, 1, base.level(1).records[k]);
  const double sigma = 0.01;
  const double u_star = max_uncertainty(env, data.level(1).cov, sigma, 1).value;
  const int trials = 2000;
  int hits = 0;
  for (int k = 0; k < trials; ++k) {
    Rng rng = Rng::derive(5, "overestimation", k);
    const Vector xi = data.level(1).cov.sample_gaussian_inv(sigma, rng);
    const LsviResult plan = lsvi_explore(env, data, 1, xi);
    hits += expected_feature(env, plan.policy, 1).dot(xi) >= u_star;
  }
  const double q = overestimation_probability();
  const double rate = static_cast<double>(hits) / trials;
  EXPECT_GE(rate, q - 3.0 * binomial_stderr(q, trials));
}
