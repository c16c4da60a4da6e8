#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rfx/env.hpp"
#include "rfx/lsvi.hpp"
#include "rfx/theory.hpp"

namespace rfx {

enum class Mode { kTheory, kPractical };

struct FrancisConfig {
  double epsilon = 0.1;
  double delta = 0.1;
  Mode mode = Mode::kPractical;
  double c_epoch = 1.0;
  double c_sigma = 1.0;
  double c_alpha = 1.0;
  long episode_budget_cap = 1000000;
  std::uint64_t seed = 0;
  /// Practical-mode overrides of the per-epoch episode count and epoch count.
  std::optional<long> k_max;
  std::optional<int> e_max;
  /// Retries allowed per episode while ||xi||_2 > 1/2.
  int max_resamples = 1000;
  double lambda = 1.0;

  void validate() const;
};

/// Per-phase schedule derived from FrancisConfig.
struct TheoryConstants {
  double q = 0.0;
  double lambda = 1.0;
  double k_bar = 0.0;     // episode-count overestimate (the budget cap)
  double delta_p = 0.0;   // delta'
  double delta_pp = 0.0;  // delta''
  double a = 0.0;         // sqrt(8 ln(1/delta''))
  std::vector<AlphaTerms> alpha_terms;  // theory values, per t
  std::vector<double> alpha;            // alpha_t used by the schedule (theory or practical)
  std::vector<double> log_det_bound;    // D_t
  std::vector<double> sigma_start;
  std::vector<int> e_max;
  std::vector<long> k_max;

  static TheoryConstants compute(const LinearMdp& env, const FrancisConfig& config);

  double sigma(int t, int epoch) const;  // sigma_e = 2^{e-1} sigma_start, epoch 1-based
  EpochInputs epoch_inputs() const { return {q, delta_pp, k_bar}; }
};

/// One stored exploration record; `t` is the timestep (equal to the phase).
struct ExplorationRecord {
  int phase = 0;
  long episode = 0;
  int epoch = 0;
  double sigma = 0.0;
  int t = 0;
  int state = 0;
  int action = 0;
  int next_state = kNoState;
};

struct ExplorationDataset {
  int horizon = 0;
  std::vector<ExplorationRecord> records;

  LsviDataset to_lsvi(const LinearMdp& env, double lambda = 1.0) const;
  long count(int t) const;
};

enum class RunStatus { kCompleted, kBudgetAbort };

struct EpochReport {
  int epoch = 0;
  double sigma = 0.0;
  long k_max = 0;
  long episodes = 0;
  long resamples = 0;
  double lambda_min_start = 0.0;
  double lambda_min_end = 0.0;
};

struct PhaseReport {
  int phase = 0;
  long episodes = 0;
  long resamples = 0;
  std::vector<EpochReport> epochs;
  std::vector<double> lambda_min;  // after each episode
  /// Elliptic-potential ledger: sum_i min{1, ||phi_i||^2_{Sigma_i^{-1}}} with
  /// Sigma_i including phi_i, against ln det Sigma_final - d ln lambda.
  double potential_sum = 0.0;
  double log_det_ratio = 0.0;
  bool potential_ok = true;
  double planned_episodes = 0.0;  // e_max * k_max from the schedule
  RunStatus status = RunStatus::kCompleted;
};

struct RunReport {
  std::vector<PhaseReport> phases;
  long total_episodes = 0;
  RunStatus status = RunStatus::kCompleted;
  /// H^2 sum_t d_t^2 (d_t + d_{t+1}) / eps^2, the polynomial part of the episode bound.
  double bound_shape = 0.0;
  std::vector<std::string> warnings;
};

struct RunOutput {
  ExplorationDataset data;
  LsviDataset lsvi;
  RunReport report;
};

/// Runs phase p (0-based) on top of `lsvi`, which must hold phases < p.
PhaseReport run_phase(const LinearMdp& env, int p, const FrancisConfig& config, const TheoryConstants& constants,
                      LsviDataset& lsvi, ExplorationDataset& data, long& episodes_used);

/// Executes phases 0..H-1 in order.
RunOutput run(const LinearMdp& env, const FrancisConfig& config);

/// Result row for one (algorithm, reward) evaluation.
struct EvalRow {
  std::uint64_t seed = 0;
  std::string algorithm;
  long episodes_used = 0;
  int reward_id = 0;
  double epsilon = 0.0;
  double v_star = 0.0;
  double v_pi = 0.0;
  double v_hat = 0.0;  // planner's own estimate E_rho Vhat_1
  double suboptimality = 0.0;
  double wall_time_ms = 0.0;
};

struct PlanOptions {
  bool reward_noise = false;
  std::uint64_t noise_seed = 0;
  /// Explorability used for the implicit-class radius 2/(H nu).
  std::optional<double> nu;
};

struct PlanResult {
  PolicyTable policy;
  EvalRow row;
  LsviResult lsvi;
};

/// Labels the stored transitions with `reward`, runs batch LSVI and scores the
/// greedy policy against the exact optimum.
PlanResult plan_and_extract(const LinearMdp& env, const LsviDataset& data, const RewardSpec& reward,
                            const PlanOptions& options = {});

}  // namespace rfx
