#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rfx/linalg.hpp"
#include "rfx/rng.hpp"

namespace rfx {

/// Marks the absent successor of a terminal-timestep transition.
inline constexpr int kNoState = -1;

/// Finite-horizon MDP over a finite state set with a per-timestep feature map.
///
/// Timesteps are 0-based (t = 0 .. horizon-1). Row `s * n_actions + a` of
/// features[t] is phi_t(s, a) and of transitions[t] is p_t(. | s, a).
/// transitions has horizon-1 entries: the value after the last timestep is 0.
struct LinearMdp {
  int horizon = 0;
  int n_states = 0;
  int n_actions = 0;
  std::vector<Matrix> features;     // [t] (S*A) x d_t
  std::vector<Matrix> transitions;  // [t] (S*A) x S, t < horizon-1
  Vector start_dist;                // length S

  int dim(int t) const { return static_cast<int>(features[t].cols()); }
  int row(int s, int a) const { return s * n_actions + a; }
  Vector phi(int t, int s, int a) const { return features[t].row(row(s, a)).transpose(); }
  auto next_dist(int t, int s, int a) const { return transitions[t].row(row(s, a)); }
};

enum class RegularityClass { kExplicit, kImplicit };

/// Linear reward r_t(s,a) = phi_t(s,a)^T theta_t + delta_t(s,a).
struct RewardSpec {
  std::vector<Vector> theta;                // [t] length d_t
  std::optional<std::vector<Vector>> delta;  // [t] length S*A
  RegularityClass regularity = RegularityClass::kExplicit;
  std::vector<double> misspec_bound;        // E_t, empty means zero

  double reward(const LinearMdp& env, int t, int s, int a) const;
  static RewardSpec zero(const LinearMdp& env);
};

/// Deterministic nonstationary policy: actions[t][s].
struct PolicyTable {
  std::vector<std::vector<int>> actions;

  int operator()(int t, int s) const { return actions[t][s]; }
  static PolicyTable constant(const LinearMdp& env, int action = 0);
  bool operator==(const PolicyTable&) const = default;
};

struct TraceStep {
  int t = 0;
  int state = 0;
  int action = 0;
  int next_state = kNoState;
  std::optional<double> reward;
};

using EpisodeTrace = std::vector<TraceStep>;

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate_env(const LinearMdp& env, double tol = 1e-12);
ValidationReport validate_policy(const LinearMdp& env, const PolicyTable& policy);

/// Samples one episode under `policy`. With `stop_after = p` only the first p
/// timesteps are simulated (p transitions).
EpisodeTrace rollout(const LinearMdp& env, const PolicyTable& policy, Rng& rng,
                     std::optional<int> stop_after = std::nullopt,
                     const RewardSpec* reward = nullptr);

/// Distribution of x_t under `policy` (forward DP), t in [0, horizon).
Vector state_occupancy(const LinearMdp& env, const PolicyTable& policy, int t);

/// E_{x_t ~ pi} phi_t(x_t, pi_t(x_t)).
Vector expected_feature(const LinearMdp& env, const PolicyTable& policy, int t);

/// E_{x_1 ~ rho} V^pi_1(x_1) by backward recursion.
double exact_policy_value(const LinearMdp& env, const RewardSpec& reward, const PolicyTable& policy);

struct OptimalSolution {
  double value = 0.0;
  PolicyTable policy;
  std::vector<Vector> values;  // V*_t(s), t in [0, horizon]
};

/// Bellman-optimal backward DP; ties go to the lowest action index.
OptimalSolution exact_optimal(const LinearMdp& env, const RewardSpec& reward);

/// Same as exact_optimal with per-step rewards supplied as tables r[t](s*A+a).
OptimalSolution exact_optimal_tables(const LinearMdp& env, const std::vector<Vector>& rewards);

struct LowRankOptions {
  std::vector<int> dims;  // d_t per timestep
  int horizon = 3;
  int n_states = 5;
  int n_actions = 2;
  std::uint64_t seed = 0;
  /// Dirichlet concentration of the feature weights; small values give
  /// nearly one-hot features.
  double feature_concentration = 1.0;
  /// Dirichlet concentration of the anchor distributions mu_i.
  double anchor_concentration = 1.0;
  /// Start distribution: uniform when true, else a Dirichlet(1) draw.
  bool uniform_start = true;
};

/// Low-rank MDP with p_t(s'|s,a) = phi_t(s,a)^T mu_t(s'); features are
/// convex weights over d anchor distributions, so the inherent Bellman error
/// is zero. Throws when d > n_states * n_actions.
LinearMdp make_lowrank_random(const LowRankOptions& options);

/// Tabular MDP with one-hot features over (s,a) and Dirichlet transitions.
LinearMdp make_tabular(int horizon, int n_states, int n_actions, std::uint64_t seed);

struct LowerBoundInstance {
  LinearMdp env;
  RewardSpec reward;
};

/// Two-step instance separating a_L and a_R by the transition skew only.
/// States: 0 start, 1 L1, 2 L2, 3 R1, 4 R2; actions 0 = a_L, 1 = a_R.
LowerBoundInstance make_lower_bound_env(double nu, double epsilon);

}  // namespace rfx
