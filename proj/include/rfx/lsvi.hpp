#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rfx/env.hpp"
#include "rfx/linalg.hpp"

namespace rfx {

/// One stored transition at some timestep t.
struct Transition {
  int state = 0;
  int action = 0;
  int next_state = kNoState;  // kNoState at the last timestep
  std::optional<double> reward;
};

/// Per-timestep regression data for LSVI.
///
/// Alongside the records each level keeps its covariance and the feature sums
/// grouped by successor state, so that sum_i phi_i V(s+_i) = successor_sums * V
/// is available in O(d S) for any value vector V.
class LsviDataset {
 public:
  struct Level {
    CovarianceAccumulator cov;
    std::vector<Transition> records;
    std::vector<Vector> features;  // phi_t(s_i, a_i), aligned with records
    Matrix successor_sums;         // d_t x S
    Vector reward_sum;             // sum_i phi_i r_i over rewarded records
    long rewarded = 0;
  };

  LsviDataset(const LinearMdp& env, double lambda = 1.0);

  /// Appends a record at timestep t; the feature is looked up in `env`.
  void add(const LinearMdp& env, int t, const Transition& tr);

  /// Replaces every reward with r(s,a) + optional noise; returns the new dataset.
  LsviDataset with_rewards(const LinearMdp& env, const RewardSpec& reward, Rng* noise = nullptr) const;

  int horizon() const { return static_cast<int>(levels_.size()); }
  const Level& level(int t) const { return levels_[t]; }
  long size(int t) const { return static_cast<long>(levels_[t].records.size()); }
  double lambda() const { return lambda_; }

 private:
  double lambda_;
  std::vector<Level> levels_;
};

struct ValueParams {
  std::vector<Vector> theta;         // transition part theta_t (exploratory: the whole parameter)
  std::vector<Vector> theta_reward;  // batch only: theta^r_t
  int span = 0;                      // number of timesteps covered
  double radius = 1.0;

  /// Parameter used for action selection at t.
  Vector combined(int t) const;
};

struct SolverReport {
  std::vector<int> empty_levels;
  std::vector<std::string> warnings;
};

struct LsviResult {
  ValueParams params;
  PolicyTable policy;  // greedy over covered timesteps, action 0 elsewhere
  double v1 = 0.0;     // E_{x_1 ~ rho} Vhat_1(x_1), exact under rho
  SolverReport report;
};

/// Lowest-index maximizer of phi_t(s,a)^T theta.
int greedy_action(const LinearMdp& env, const Vector& theta, int t, int s);

/// Exploratory LSVI: pseudoreward phi_p^T xi at timestep p (0-based) only,
/// ridge regression backward over t < p.
LsviResult lsvi_explore(const LinearMdp& env, const LsviDataset& data, int p, const Vector& xi);

/// Reward-augmented LSVI over the full horizon. Every record must carry a
/// reward (kInvalidInput naming (t, k) otherwise). `radius` is R of the reward
/// class; levels whose combined parameter exceeds 2R while the eigenvalue
/// precondition holds are reported as warnings.
LsviResult lsvi_batch(const LinearMdp& env, const LsviDataset& data, double radius = 1.0,
                      const std::vector<double>* alpha = nullptr);

}  // namespace rfx
