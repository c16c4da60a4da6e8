#include <CLI11.hpp>
#include <iostream>

#include "rfx/error.hpp"
#include "rfx/harness.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::string out;
  std::optional<long> budget;
  std::optional<int> parallel;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "experiment config (JSON)");
  cmd->add_option("--seed", c.seed, "root seed");
  cmd->add_option("--mode", c.mode, "theory|practical")->check(CLI::IsMember({"theory", "practical"}));
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--budget", c.budget, "FRANCIS episode budget cap");
  cmd->add_option("--parallel", c.parallel, "worker threads");
}

rfx::ExperimentConfig load(const Common& c) {
  rfx::ExperimentConfig cfg;
  if (!c.config.empty()) {
    const std::filesystem::path p = c.config;
    cfg = rfx::ExperimentConfig::from_json(rfx::read_json(p), p.parent_path());
  }
  if (c.seed) cfg.francis.seed = *c.seed;
  if (c.mode == "theory") cfg.francis.mode = rfx::Mode::kTheory;
  if (c.mode == "practical") cfg.francis.mode = rfx::Mode::kPractical;
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (c.budget) cfg.francis.episode_budget_cap = *c.budget;
  if (c.parallel) cfg.parallel = *c.parallel;
  cfg.francis.validate();
  rfx::require(cfg.parallel >= 1, "--parallel must be positive");
  return cfg;
}

int exit_code(rfx::ErrorKind k) {
  switch (k) {
    case rfx::ErrorKind::kInvalidInput:
    case rfx::ErrorKind::kInstanceTooLarge:
      return 2;
    case rfx::ErrorKind::kBudgetExceeded:
    case rfx::ErrorKind::kResampleLimit:
      return 3;
    case rfx::ErrorKind::kIo:
      return 4;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reward-free exploration in linear MDPs"};
  app.require_subcommand(1);

  Common explore_opts, eval_opts, sweep_opts, gen_opts, lemma_opts, plan_opts;
  auto* explore = app.add_subcommand("explore", "collect a dataset");
  add_common(explore, explore_opts);
  auto* eval = app.add_subcommand("eval", "explore and plan over seeds and a reward suite");
  add_common(eval, eval_opts);
  auto* sweep = app.add_subcommand("sweep", "eval over an epsilon grid");
  add_common(sweep, sweep_opts);
  auto* gen = app.add_subcommand("gen-env", "write a generated environment");
  add_common(gen, gen_opts);

  auto* plan = app.add_subcommand("plan", "plan on a stored dataset");
  std::string dataset, reward, env_path, out_csv;
  std::optional<double> nu;
  plan->add_option("--dataset", dataset, "JSONL dataset")->required();
  plan->add_option("--reward", reward, "reward JSON (object or array)")->required();
  plan->add_option("--env", env_path, "environment JSON")->required();
  plan->add_option("--out", out_csv, "CSV output file");
  plan->add_option("--nu", nu, "explorability for implicit-class rewards");

  auto* lemmas = app.add_subcommand("lemmas", "run the concentration lemma battery");
  rfx::BatteryOptions battery;
  std::string lemma_out;
  lemmas->add_option("--seed", battery.seed, "root seed");
  lemmas->add_option("--only", battery.only, "run one lemma")
      ->check(CLI::IsMember({"chi_square", "azuma", "large_deviation", "overestimation"}));
  lemmas->add_option("--trials", battery.trials, "trials per lemma")->check(CLI::PositiveNumber);
  lemmas->add_option("--bound-scale", battery.bound_scale, "multiply tail levels (self-test)")
      ->check(CLI::PositiveNumber);
  lemmas->add_option("--out", lemma_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*explore) return rfx::cmd_explore(load(explore_opts), std::cout);
    if (*eval) return rfx::cmd_eval(load(eval_opts), std::cout);
    if (*sweep) return rfx::cmd_sweep(load(sweep_opts), std::cout);
    if (*gen) return rfx::cmd_gen_env(load(gen_opts), std::cout);
    if (*plan) return rfx::cmd_plan(dataset, reward, env_path, out_csv, nu, std::cout);
    if (*lemmas) return rfx::cmd_lemmas(battery, lemma_out, std::cout);
  } catch (const rfx::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
