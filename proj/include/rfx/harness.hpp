#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rfx/env.hpp"
#include "rfx/francis.hpp"
#include "rfx/io.hpp"
#include "rfx/lemma_lab.hpp"

namespace rfx {

struct EnvSource {
  std::optional<std::filesystem::path> path;
  std::string generator = "lowrank";  // lowrank | tabular | lower_bound
  LowRankOptions lowrank;
  double nu = 0.25;       // lower_bound only
  double env_epsilon = 0.0;  // lower_bound only
};

struct RewardSuiteSpec {
  int count = 20;
  RegularityClass regularity = RegularityClass::kExplicit;
  std::uint64_t seed = 0;
  bool noise = false;
};

struct ExperimentConfig {
  EnvSource env;
  FrancisConfig francis;
  RewardSuiteSpec rewards;
  std::vector<std::string> algorithms{"francis"};  // francis | uniform | goptimal
  /// Stored transitions granted to each baseline; unset means "match FRANCIS".
  std::optional<long> baseline_samples;
  std::filesystem::path out_dir = "out";
  int parallel = 1;
  int seeds = 1;
  std::vector<double> epsilons;  // sweep grid; empty means {francis.epsilon}

  /// Relative env paths resolve against `base_dir`.
  static ExperimentConfig from_json(const Json& j, const std::filesystem::path& base_dir = {});
  Json to_json() const;
};

LinearMdp build_env(const EnvSource& source);

/// Reward drawn uniformly from the boundary of its class: ||theta_t|| = 1/H
/// for explicit, max_pi |E_pi r_t| = 1/H for implicit.
RewardSpec boundary_reward(const LinearMdp& env, RegularityClass regularity, Rng& rng);
std::vector<RewardSpec> reward_suite(const LinearMdp& env, const RewardSuiteSpec& spec);

/// min_t nu_t as measured by the diagnostics search.
double min_explorability(const LinearMdp& env);

struct Collected {
  LsviDataset lsvi;
  ExplorationDataset data;
  long episodes = 0;  // the algorithm's own episode count
  long samples = 0;   // stored transitions
  std::optional<RunReport> report;
};

/// Runs one exploration algorithm. `samples` is the baseline allowance in
/// stored transitions (ignored by francis).
Collected collect(const LinearMdp& env, const std::string& algorithm, const FrancisConfig& francis,
                  std::uint64_t seed, long samples);

/// Plans for each reward on one dataset and returns one row per reward.
std::vector<EvalRow> evaluate(const LinearMdp& env, const Collected& data, const std::vector<RewardSpec>& rewards,
                              const std::string& algorithm, std::uint64_t seed, double epsilon,
                              const RewardSuiteSpec& suite, std::optional<double> nu);

/// Runs fn(i) for i in [0, n) on up to `parallel` threads.
void parallel_for(int n, int parallel, const std::function<void(int)>& fn);

// Subcommands. Each returns a process exit code; rfx::Error propagates.
int cmd_explore(const ExperimentConfig& config, std::ostream& log);
int cmd_plan(const std::filesystem::path& dataset, const std::filesystem::path& reward,
             const std::filesystem::path& env_path, const std::filesystem::path& out_csv, std::optional<double> nu,
             std::ostream& log);
int cmd_eval(const ExperimentConfig& config, std::ostream& log);
int cmd_sweep(const ExperimentConfig& config, std::ostream& log);
int cmd_lemmas(const BatteryOptions& options, const std::filesystem::path& out_dir, std::ostream& log);
int cmd_gen_env(const ExperimentConfig& config, std::ostream& log);

}  // namespace rfx
