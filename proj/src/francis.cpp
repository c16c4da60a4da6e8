#include "rfx/francis.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "rfx/error.hpp"

namespace rfx {

void FrancisConfig::validate() const {
  require(epsilon > 0.0 && epsilon < 1.0, "config: epsilon must lie in (0,1)");
  require(delta > 0.0 && delta < 1.0, "config: delta must lie in (0,1)");
  require(c_epoch > 0.0 && c_sigma > 0.0 && c_alpha > 0.0, "config: multipliers must be positive");
  require(episode_budget_cap > 0, "config: episode budget cap must be positive");
  require(!k_max || *k_max > 0, "config: k_max override must be positive");
  require(!e_max || *e_max > 0, "config: e_max override must be positive");
  require(max_resamples >= 0, "config: max_resamples must be nonnegative");
  require(lambda > 0.0, "config: lambda must be positive");
}

TheoryConstants TheoryConstants::compute(const LinearMdp& env, const FrancisConfig& config) {
  config.validate();
  TheoryConstants c;
  const int h = env.horizon;
  c.q = overestimation_probability();
  c.lambda = config.lambda;
  c.k_bar = static_cast<double>(config.episode_budget_cap);
  c.delta_p = config.delta / (16.0 * h * c.k_bar);
  c.delta_pp = c.delta_p;
  c.a = deviation_constant(c.delta_pp);
  for (int t = 0; t < h; ++t) {
    const int d = env.dim(t);
    const int d_next = t + 1 < h ? env.dim(t + 1) : 0;
    c.alpha_terms.push_back(rfx::alpha_terms(d, d_next, c.k_bar, c.delta_p));
    c.log_det_bound.push_back(rfx::log_det_bound(d, c.k_bar));
    double sigma0 = rfx::sigma_start(d, c.delta_pp, c.lambda);
    double alpha = c.alpha_terms.back().alpha;
    if (config.mode == Mode::kPractical) {
      sigma0 *= config.c_sigma;
      alpha = practical_alpha(d, d_next, c.k_bar, config.c_alpha);
    }
    c.alpha.push_back(alpha);
    c.sigma_start.push_back(sigma0);
    int e_max = epoch_count(h, alpha, sigma0);
    if (config.mode == Mode::kPractical && config.e_max) e_max = *config.e_max;
    c.e_max.push_back(e_max);
    const double sigma_last = std::ldexp(sigma0, e_max - 1);
    long k_max = epoch_length(d, sigma_last, config.epsilon, c.epoch_inputs());
    if (config.mode == Mode::kPractical) {
      if (config.k_max) {
        k_max = *config.k_max;
      } else {
        k_max = std::max(1L, static_cast<long>(std::floor(config.c_epoch * static_cast<double>(k_max))));
      }
    }
    c.k_max.push_back(k_max);
  }
  return c;
}

double TheoryConstants::sigma(int t, int epoch) const { return std::ldexp(sigma_start[t], epoch - 1); }

LsviDataset ExplorationDataset::to_lsvi(const LinearMdp& env, double lambda) const {
  require(horizon == env.horizon, "dataset horizon does not match environment");
  LsviDataset out(env, lambda);
  for (const auto& r : records) out.add(env, r.t, Transition{r.state, r.action, r.next_state, std::nullopt});
  return out;
}

long ExplorationDataset::count(int t) const {
  long n = 0;
  for (const auto& r : records) n += r.t == t;
  return n;
}

PhaseReport run_phase(const LinearMdp& env, int p, const FrancisConfig& config, const TheoryConstants& constants,
                      LsviDataset& lsvi, ExplorationDataset& data, long& episodes_used) {
  require(p >= 0 && p < env.horizon, "run_phase: phase out of range");
  PhaseReport rep;
  rep.phase = p;
  const int e_max = constants.e_max[p];
  const long k_max = constants.k_max[p];
  rep.planned_episodes = static_cast<double>(e_max) * static_cast<double>(k_max);
  const CovarianceAccumulator& cov = lsvi.level(p).cov;
  const double log_det_start = cov.log_det();
  long episode = 0;

  for (int e = 1; e <= e_max; ++e) {
    EpochReport er;
    er.epoch = e;
    er.sigma = constants.sigma(p, e);
    er.k_max = k_max;
    er.lambda_min_start = cov.min_eigenvalue();
    for (long k = 0; k < k_max; ++k, ++episode) {
      if (episodes_used >= config.episode_budget_cap) {
        rep.status = RunStatus::kBudgetAbort;
        er.lambda_min_end = cov.min_eigenvalue();
        rep.epochs.push_back(er);
        rep.resamples += er.resamples;
        rep.episodes = episode;
        rep.log_det_ratio = cov.log_det() - log_det_start;
        rep.potential_ok = rep.potential_sum <= rep.log_det_ratio + 1e-9;
        return rep;
      }
      Rng rng = Rng::derive(config.seed, "francis.episode", static_cast<std::uint64_t>(p),
                            static_cast<std::uint64_t>(e), static_cast<std::uint64_t>(k));
      Vector xi = cov.sample_gaussian_inv(er.sigma, rng);
      int retries = 0;
      while (xi.norm() > 0.5) {
        if (++retries > config.max_resamples) {
          fail(ErrorKind::kResampleLimit, "pseudoreward resampling exceeded " +
                                              std::to_string(config.max_resamples) + " retries in phase " +
                                              std::to_string(p) + ", epoch " + std::to_string(e));
        }
        xi = cov.sample_gaussian_inv(er.sigma, rng);
      }
      er.resamples += retries;

      const LsviResult plan = lsvi_explore(env, lsvi, p, xi);
      const EpisodeTrace trace = rollout(env, plan.policy, rng, p + 1);
      const TraceStep& last = trace.back();

      lsvi.add(env, p, Transition{last.state, last.action, last.next_state, std::nullopt});
      data.records.push_back(ExplorationRecord{p, episode, e, er.sigma, p, last.state, last.action, last.next_state});
      ++episodes_used;
      ++er.episodes;

      const double u = cov.quad_inv(lsvi.level(p).features.back());
      rep.potential_sum += std::min(1.0, u);
      rep.lambda_min.push_back(cov.min_eigenvalue());
    }
    er.lambda_min_end = cov.min_eigenvalue();
    rep.resamples += er.resamples;
    rep.epochs.push_back(er);
  }
  rep.episodes = episode;
  rep.log_det_ratio = cov.log_det() - log_det_start;
  rep.potential_ok = rep.potential_sum <= rep.log_det_ratio + 1e-9;
  return rep;
}

RunOutput run(const LinearMdp& env, const FrancisConfig& config) {
  const ValidationReport vr = validate_env(env, 1e-9);
  if (!vr.ok()) fail(ErrorKind::kInvalidInput, "environment failed validation: " + vr.violations.front());
  const TheoryConstants constants = TheoryConstants::compute(env, config);
  RunOutput out{ExplorationDataset{env.horizon, {}}, LsviDataset(env, config.lambda), RunReport{}};
  const double eps2 = config.epsilon * config.epsilon;
  for (int t = 0; t < env.horizon; ++t) {
    const double d = env.dim(t);
    const double dn = t + 1 < env.horizon ? env.dim(t + 1) : 0.0;
    out.report.bound_shape += d * d * (d + dn);
  }
  out.report.bound_shape *= static_cast<double>(env.horizon) * env.horizon / eps2;

  long used = 0;
  for (int p = 0; p < env.horizon; ++p) {
    PhaseReport pr = run_phase(env, p, config, constants, out.lsvi, out.data, used);
    out.report.phases.push_back(std::move(pr));
    if (out.report.phases.back().status == RunStatus::kBudgetAbort) {
      out.report.status = RunStatus::kBudgetAbort;
      break;
    }
  }
  out.report.total_episodes = used;
  for (int p = 0; p < static_cast<int>(out.report.phases.size()); ++p) {
    const auto& pr = out.report.phases[p];
    const double need = 4.0 * env.horizon * env.horizon * constants.alpha[p];
    if (!pr.lambda_min.empty() && pr.lambda_min.back() < need) {
      out.report.warnings.push_back("phase " + std::to_string(p) +
                                    ": lambda_min below 4 H^2 alpha_t (outside the analyzed regime)");
    }
  }
  return out;
}

PlanResult plan_and_extract(const LinearMdp& env, const LsviDataset& data, const RewardSpec& reward,
                            const PlanOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  for (int t = 0; t < env.horizon; ++t) {
    if (data.size(t) == 0) fail(ErrorKind::kInvalidInput, "plan: dataset level " + std::to_string(t) + " is empty");
  }
  double radius = 1.0;
  if (reward.regularity == RegularityClass::kImplicit) {
    require(options.nu && *options.nu > 0.0, "plan: implicit reward class needs a positive explorability nu");
    radius = 2.0 / (env.horizon * *options.nu);
  }
  std::optional<Rng> noise;
  if (options.reward_noise) noise.emplace(derive_seed(options.noise_seed, "plan.reward_noise"));
  const LsviDataset labeled = data.with_rewards(env, reward, noise ? &*noise : nullptr);

  PlanResult out;
  out.lsvi = lsvi_batch(env, labeled, radius);
  out.policy = out.lsvi.policy;
  const OptimalSolution opt = exact_optimal(env, reward);
  out.row.v_star = opt.value;
  out.row.v_pi = exact_policy_value(env, reward, out.policy);
  out.row.v_hat = out.lsvi.v1;
  out.row.suboptimality = out.row.v_star - out.row.v_pi;
  long n = 0;
  for (int t = 0; t < env.horizon; ++t) n = std::max(n, data.size(t));
  out.row.episodes_used = n;
  out.row.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace rfx
