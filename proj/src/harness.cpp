#include "rfx/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include "rfx/baselines.hpp"
#include "rfx/diagnostics.hpp"
#include "rfx/error.hpp"

namespace rfx {

namespace {

template <class T>
void maybe(const Json& j, const char* key, T& out) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kInvalidInput, std::string("config field '") + key + "': " + e.what());
  }
}

template <class T>
void maybe(const Json& j, const char* key, std::optional<T>& out) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  T v{};
  maybe(j, key, v);
  out = v;
}

RegularityClass parse_class(const std::string& s) {
  if (s == "explicit") return RegularityClass::kExplicit;
  if (s == "implicit") return RegularityClass::kImplicit;
  fail(ErrorKind::kInvalidInput, "reward class must be 'explicit' or 'implicit', got '" + s + "'");
}

Mode parse_mode(const std::string& s) {
  if (s == "practical") return Mode::kPractical;
  if (s == "theory") return Mode::kTheory;
  fail(ErrorKind::kInvalidInput, "mode must be 'theory' or 'practical', got '" + s + "'");
}

void check_algorithm(const std::string& a) {
  require(a == "francis" || a == "uniform" || a == "goptimal", "unknown algorithm '" + a + "'");
}

Vector unit_direction(int d, Rng& rng) {
  Vector v(d);
  do {
    for (int i = 0; i < d; ++i) v(i) = rng.normal();
  } while (v.norm() == 0.0);
  return v / v.norm();
}

std::vector<RewardSpec> load_rewards(const Json& j, const LinearMdp& env) {
  std::vector<RewardSpec> out;
  if (j.is_array()) {
    for (const auto& r : j) out.push_back(reward_from_json(r, env));
  } else if (j.is_object() && j.contains("rewards")) {
    require(j.at("rewards").is_array(), "reward file: 'rewards' must be an array");
    for (const auto& r : j.at("rewards")) out.push_back(reward_from_json(r, env));
  } else {
    out.push_back(reward_from_json(j, env));
  }
  require(!out.empty(), "reward file holds no rewards");
  return out;
}

std::optional<double> suite_nu(const LinearMdp& env, const RewardSuiteSpec& suite) {
  if (suite.regularity == RegularityClass::kImplicit) return min_explorability(env);
  return std::nullopt;
}

std::vector<double> grid(const ExperimentConfig& c) {
  return c.epsilons.empty() ? std::vector<double>{c.francis.epsilon} : c.epsilons;
}

struct Cell {
  std::string algorithm;
  std::uint64_t seed = 0;
  double epsilon = 0.0;
};

// Runs every cell and returns rows in cell order.
std::vector<EvalRow> run_cells(const LinearMdp& env, const ExperimentConfig& config, const std::vector<Cell>& cells,
                               std::ostream& log) {
  const std::vector<RewardSpec> rewards = reward_suite(env, config.rewards);
  const std::optional<double> nu = suite_nu(env, config.rewards);
  std::vector<std::vector<EvalRow>> rows(cells.size());
  std::vector<long> francis_samples(cells.size(), -1);
  std::mutex log_mutex;

  // FRANCIS cells first so that baselines can match their sample counts.
  auto run_one = [&](int i, bool francis_pass) {
    const Cell& c = cells[i];
    if ((c.algorithm == "francis") != francis_pass) return;
    FrancisConfig fc = config.francis;
    fc.epsilon = c.epsilon;
    fc.seed = c.seed;
    long samples = config.baseline_samples.value_or(0);
    if (!francis_pass && !config.baseline_samples) {
      for (std::size_t k = 0; k < cells.size(); ++k) {
        if (cells[k].algorithm == "francis" && cells[k].seed == c.seed && cells[k].epsilon == c.epsilon) {
          samples = francis_samples[k];
        }
      }
      if (samples <= 0) {
        const TheoryConstants tc = TheoryConstants::compute(env, fc);
        samples = 0;
        for (int t = 0; t < env.horizon; ++t) samples += static_cast<long>(tc.e_max[t]) * tc.k_max[t];
      }
    }
    const Collected data = collect(env, c.algorithm, fc, c.seed, samples);
    if (francis_pass) francis_samples[i] = data.samples;
    rows[i] = evaluate(env, data, rewards, c.algorithm, c.seed, c.epsilon, config.rewards, nu);
    std::lock_guard<std::mutex> lock(log_mutex);
    double worst = 0.0;
    for (const auto& r : rows[i]) worst = std::max(worst, r.suboptimality);
    log << c.algorithm << " seed=" << c.seed << " eps=" << c.epsilon << " samples=" << data.samples
        << " max_subopt=" << worst << "\n";
  };
  const int n = static_cast<int>(cells.size());
  parallel_for(n, config.parallel, [&](int i) { run_one(i, true); });
  parallel_for(n, config.parallel, [&](int i) { run_one(i, false); });

  std::vector<EvalRow> out;
  for (auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

std::string rows_to_csv(const std::vector<EvalRow>& rows) {
  std::string s = std::string(kCsvHeader) + "\n";
  for (const auto& r : rows) s += csv_row(r) + "\n";
  return s;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const Json& j, const std::filesystem::path& base_dir) {
  require(j.is_object(), "config must be a JSON object");
  ExperimentConfig c;
  if (j.contains("env")) {
    const Json& e = j.at("env");
    require(e.is_object(), "config: env must be an object");
    if (e.contains("path")) {
      std::filesystem::path p = e.at("path").get<std::string>();
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      c.env.path = p;
    }
    maybe(e, "generator", c.env.generator);
    maybe(e, "dims", c.env.lowrank.dims);
    maybe(e, "horizon", c.env.lowrank.horizon);
    maybe(e, "n_states", c.env.lowrank.n_states);
    maybe(e, "n_actions", c.env.lowrank.n_actions);
    maybe(e, "seed", c.env.lowrank.seed);
    maybe(e, "feature_concentration", c.env.lowrank.feature_concentration);
    maybe(e, "anchor_concentration", c.env.lowrank.anchor_concentration);
    maybe(e, "uniform_start", c.env.lowrank.uniform_start);
    maybe(e, "nu", c.env.nu);
    maybe(e, "epsilon", c.env.env_epsilon);
  }
  if (j.contains("francis")) {
    const Json& f = j.at("francis");
    maybe(f, "epsilon", c.francis.epsilon);
    maybe(f, "delta", c.francis.delta);
    std::string mode = "practical";
    maybe(f, "mode", mode);
    c.francis.mode = parse_mode(mode);
    maybe(f, "c_epoch", c.francis.c_epoch);
    maybe(f, "c_sigma", c.francis.c_sigma);
    maybe(f, "c_alpha", c.francis.c_alpha);
    maybe(f, "episode_budget_cap", c.francis.episode_budget_cap);
    maybe(f, "seed", c.francis.seed);
    maybe(f, "k_max", c.francis.k_max);
    maybe(f, "e_max", c.francis.e_max);
    maybe(f, "max_resamples", c.francis.max_resamples);
    maybe(f, "lambda", c.francis.lambda);
  }
  if (j.contains("rewards")) {
    const Json& r = j.at("rewards");
    maybe(r, "count", c.rewards.count);
    std::string cls = "explicit";
    maybe(r, "class", cls);
    c.rewards.regularity = parse_class(cls);
    maybe(r, "seed", c.rewards.seed);
    maybe(r, "noise", c.rewards.noise);
  }
  maybe(j, "algorithms", c.algorithms);
  maybe(j, "baseline_samples", c.baseline_samples);
  std::string out;
  maybe(j, "out", out);
  if (!out.empty()) c.out_dir = out;
  maybe(j, "parallel", c.parallel);
  maybe(j, "seeds", c.seeds);
  maybe(j, "epsilons", c.epsilons);

  for (const auto& a : c.algorithms) check_algorithm(a);
  require(!c.algorithms.empty(), "config: algorithms must not be empty");
  require(c.rewards.count >= 1, "config: reward count must be positive");
  require(c.parallel >= 1, "config: parallel must be positive");
  require(c.seeds >= 1, "config: seeds must be positive");
  require(!c.baseline_samples || *c.baseline_samples > 0, "config: baseline_samples must be positive");
  if (c.env.path) {
    std::error_code ec;
    if (!std::filesystem::exists(*c.env.path, ec)) fail(ErrorKind::kIo, "env path not found: " + c.env.path->string());
  } else {
    require(c.env.generator == "lowrank" || c.env.generator == "tabular" || c.env.generator == "lower_bound",
            "config: unknown env generator '" + c.env.generator + "'");
  }
  for (double e : c.epsilons) require(e > 0.0 && e < 1.0, "config: sweep epsilons must lie in (0,1)");
  c.francis.validate();
  return c;
}

Json ExperimentConfig::to_json() const {
  Json j;
  Json e;
  if (env.path) {
    e["path"] = env.path->string();
  } else {
    e["generator"] = env.generator;
    e["dims"] = env.lowrank.dims;
    e["horizon"] = env.lowrank.horizon;
    e["n_states"] = env.lowrank.n_states;
    e["n_actions"] = env.lowrank.n_actions;
    e["seed"] = env.lowrank.seed;
    e["feature_concentration"] = env.lowrank.feature_concentration;
    e["anchor_concentration"] = env.lowrank.anchor_concentration;
    e["uniform_start"] = env.lowrank.uniform_start;
    e["nu"] = env.nu;
    e["epsilon"] = env.env_epsilon;
  }
  j["env"] = e;
  Json f;
  f["epsilon"] = francis.epsilon;
  f["delta"] = francis.delta;
  f["mode"] = francis.mode == Mode::kPractical ? "practical" : "theory";
  f["c_epoch"] = francis.c_epoch;
  f["c_sigma"] = francis.c_sigma;
  f["c_alpha"] = francis.c_alpha;
  f["episode_budget_cap"] = francis.episode_budget_cap;
  f["seed"] = francis.seed;
  if (francis.k_max) f["k_max"] = *francis.k_max;
  if (francis.e_max) f["e_max"] = *francis.e_max;
  f["max_resamples"] = francis.max_resamples;
  f["lambda"] = francis.lambda;
  j["francis"] = f;
  j["rewards"] = {{"count", rewards.count},
                  {"class", rewards.regularity == RegularityClass::kExplicit ? "explicit" : "implicit"},
                  {"seed", rewards.seed},
                  {"noise", rewards.noise}};
  j["algorithms"] = algorithms;
  if (baseline_samples) j["baseline_samples"] = *baseline_samples;
  j["out"] = out_dir.string();
  j["parallel"] = parallel;
  j["seeds"] = seeds;
  j["epsilons"] = epsilons;
  return j;
}

LinearMdp build_env(const EnvSource& source) {
  if (source.path) return load_env(*source.path);
  if (source.generator == "lowrank") {
    LowRankOptions o = source.lowrank;
    if (o.dims.empty()) o.dims.assign(o.horizon, 2);
    return make_lowrank_random(o);
  }
  if (source.generator == "tabular") {
    const auto& o = source.lowrank;
    return make_tabular(o.horizon, o.n_states, o.n_actions, o.seed);
  }
  if (source.generator == "lower_bound") return make_lower_bound_env(source.nu, source.env_epsilon).env;
  fail(ErrorKind::kInvalidInput, "unknown env generator '" + source.generator + "'");
}

RewardSpec boundary_reward(const LinearMdp& env, RegularityClass regularity, Rng& rng) {
  RewardSpec r;
  r.regularity = regularity;
  const double h = env.horizon;
  for (int t = 0; t < env.horizon; ++t) {
    Vector u = unit_direction(env.dim(t), rng);
    if (regularity == RegularityClass::kExplicit) {
      r.theta.push_back(u / h);
    } else {
      const double reach = best_alignment(env, t, u);
      r.theta.push_back(reach > 0.0 ? Vector(u / (h * reach)) : Vector(Vector::Zero(env.dim(t))));
    }
  }
  return r;
}

std::vector<RewardSpec> reward_suite(const LinearMdp& env, const RewardSuiteSpec& spec) {
  std::vector<RewardSpec> out;
  for (int i = 0; i < spec.count; ++i) {
    Rng rng = Rng::derive(spec.seed, "reward.suite", static_cast<std::uint64_t>(i));
    out.push_back(boundary_reward(env, spec.regularity, rng));
  }
  return out;
}

double min_explorability(const LinearMdp& env) {
  double nu = std::numeric_limits<double>::infinity();
  ExplorabilityOptions o;
  o.resolution = 2000;
  for (int t = 0; t < env.horizon; ++t) nu = std::min(nu, explorability(env, t, o).value);
  return nu;
}

Collected collect(const LinearMdp& env, const std::string& algorithm, const FrancisConfig& francis,
                  std::uint64_t seed, long samples) {
  check_algorithm(algorithm);
  if (algorithm == "francis") {
    FrancisConfig fc = francis;
    fc.seed = seed;
    RunOutput run_out = rfx::run(env, fc);
    Collected c{std::move(run_out.lsvi), std::move(run_out.data), run_out.report.total_episodes, 0,
                std::move(run_out.report)};
    c.samples = static_cast<long>(c.data.records.size());
    return c;
  }
  require(samples > 0, "collect: baseline sample allowance must be positive");
  const long per_level = (samples + env.horizon - 1) / env.horizon;
  if (algorithm == "uniform") {
    ExplorationDataset data = uniform_explore(env, per_level, seed);
    LsviDataset lsvi = data.to_lsvi(env, francis.lambda);
    const long n = static_cast<long>(data.records.size());
    return Collected{std::move(lsvi), std::move(data), per_level, n, std::nullopt};
  }
  const GenerativeModel model = GenerativeModel::grant(env);
  LsviDataset lsvi = goptimal_explore(model, per_level, seed);
  ExplorationDataset data{env.horizon, {}};
  for (int t = 0; t < env.horizon; ++t) {
    long k = 0;
    for (const auto& tr : lsvi.level(t).records) {
      data.records.push_back(ExplorationRecord{t, k++, 0, 0.0, t, tr.state, tr.action, tr.next_state});
    }
  }
  const long n = static_cast<long>(data.records.size());
  return Collected{std::move(lsvi), std::move(data), per_level, n, std::nullopt};
}

std::vector<EvalRow> evaluate(const LinearMdp& env, const Collected& data, const std::vector<RewardSpec>& rewards,
                              const std::string& algorithm, std::uint64_t seed, double epsilon,
                              const RewardSuiteSpec& suite, std::optional<double> nu) {
  std::vector<EvalRow> rows;
  for (int i = 0; i < static_cast<int>(rewards.size()); ++i) {
    PlanOptions po;
    po.reward_noise = suite.noise;
    po.noise_seed = derive_seed(seed, "plan.noise", static_cast<std::uint64_t>(i));
    po.nu = nu;
    PlanResult pr = plan_and_extract(env, data.lsvi, rewards[i], po);
    pr.row.seed = seed;
    pr.row.algorithm = algorithm;
    pr.row.episodes_used = data.episodes;
    pr.row.reward_id = i;
    pr.row.epsilon = epsilon;
    rows.push_back(pr.row);
  }
  return rows;
}

void parallel_for(int n, int parallel, const std::function<void(int)>& fn) {
  const int workers = std::max(1, std::min(parallel, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

int cmd_explore(const ExperimentConfig& config, std::ostream& log) {
  const LinearMdp env = build_env(config.env);
  const ValidationReport vr = validate_env(env, 1e-9);
  if (!vr.ok()) fail(ErrorKind::kInvalidInput, "environment failed validation: " + vr.violations.front());
  const std::string algorithm = config.algorithms.front();
  long samples = config.baseline_samples.value_or(0);
  if (algorithm != "francis" && samples == 0) {
    const TheoryConstants tc = TheoryConstants::compute(env, config.francis);
    for (int t = 0; t < env.horizon; ++t) samples += static_cast<long>(tc.e_max[t]) * tc.k_max[t];
  }
  const Collected c = collect(env, algorithm, config.francis, config.francis.seed, samples);
  save_env(config.out_dir / "env.json", env);
  save_dataset(config.out_dir / "dataset.jsonl", c.data);
  Json report;
  report["algorithm"] = algorithm;
  report["seed"] = config.francis.seed;
  report["episodes"] = c.episodes;
  report["samples"] = c.samples;
  std::vector<long> per_level;
  for (int t = 0; t < env.horizon; ++t) per_level.push_back(c.data.count(t));
  report["records_per_level"] = per_level;
  if (c.report) report["run"] = report_to_json(*c.report);
  write_json(config.out_dir / "report.json", report);
  log << algorithm << ": " << c.samples << " transitions over " << c.episodes << " episodes -> "
      << (config.out_dir / "dataset.jsonl").string() << "\n";
  if (c.report && c.report->status == RunStatus::kBudgetAbort) {
    log << "budget cap of " << config.francis.episode_budget_cap << " episodes reached; run aborted\n";
    return 3;
  }
  return 0;
}

int cmd_plan(const std::filesystem::path& dataset, const std::filesystem::path& reward,
             const std::filesystem::path& env_path, const std::filesystem::path& out_csv, std::optional<double> nu,
             std::ostream& log) {
  const LinearMdp env = load_env(env_path);
  const ValidationReport vr = validate_env(env, 1e-9);
  if (!vr.ok()) fail(ErrorKind::kInvalidInput, "environment failed validation: " + vr.violations.front());
  const std::vector<RewardSpec> rewards = load_rewards(read_json(reward), env);
  const ExplorationDataset data = load_dataset(dataset, env.horizon);
  for (const auto& r : data.records) {
    require(r.state >= 0 && r.state < env.n_states && r.action >= 0 && r.action < env.n_actions,
            "dataset record out of range for this environment");
  }
  Collected c{data.to_lsvi(env), data, 0, static_cast<long>(data.records.size()), std::nullopt};
  for (int t = 0; t < env.horizon; ++t) c.episodes = std::max(c.episodes, data.count(t));
  bool implicit = false;
  for (const auto& r : rewards) implicit |= r.regularity == RegularityClass::kImplicit;
  if (implicit && !nu) nu = min_explorability(env);
  RewardSuiteSpec suite;
  const std::vector<EvalRow> rows = evaluate(env, c, rewards, "dataset", 0, 0.0, suite, nu);
  const std::string csv = rows_to_csv(rows);
  if (!out_csv.empty()) write_text(out_csv, csv);
  log << csv;
  return 0;
}

int cmd_eval(const ExperimentConfig& config, std::ostream& log) {
  const LinearMdp env = build_env(config.env);
  std::vector<Cell> cells;
  for (const auto& a : config.algorithms) {
    for (int s = 0; s < config.seeds; ++s) cells.push_back({a, config.francis.seed + s, config.francis.epsilon});
  }
  const std::vector<EvalRow> rows = run_cells(env, config, cells, log);
  write_text(config.out_dir / "eval.csv", rows_to_csv(rows));
  for (const auto& a : config.algorithms) {
    long ok = 0, n = 0;
    for (const auto& r : rows) {
      if (r.algorithm != a) continue;
      ++n;
      ok += r.suboptimality <= r.epsilon;
    }
    log << a << ": " << ok << "/" << n << " cells within epsilon\n";
  }
  return 0;
}

int cmd_sweep(const ExperimentConfig& config, std::ostream& log) {
  const LinearMdp env = build_env(config.env);
  std::vector<Cell> cells;
  for (double eps : grid(config)) {
    for (const auto& a : config.algorithms) {
      for (int s = 0; s < config.seeds; ++s) cells.push_back({a, config.francis.seed + s, eps});
    }
  }
  const std::vector<EvalRow> rows = run_cells(env, config, cells, log);
  write_text(config.out_dir / "sweep.csv", rows_to_csv(rows));
  log << rows.size() << " rows -> " << (config.out_dir / "sweep.csv").string() << "\n";
  return 0;
}

int cmd_lemmas(const BatteryOptions& options, const std::filesystem::path& out_dir, std::ostream& log) {
  const std::vector<LemmaTestResult> results = run_lemma_battery(options);
  require(!results.empty(), "no lemma matches '" + options.only + "'");
  Json all = Json::array();
  bool ok = true;
  for (const auto& r : results) {
    all.push_back(lemma_to_json(r));
    ok &= r.verdict != LemmaVerdict::kFail;
    log << std::left << std::setw(16) << r.lemma << " trials=" << std::setw(7) << r.trials << " rate=" << std::setw(10)
        << r.rate << " bound=" << std::setw(10) << r.bound << " "
        << (r.verdict == LemmaVerdict::kPass   ? "PASS"
            : r.verdict == LemmaVerdict::kFail ? "FAIL"
                                               : "PRECONDITION-UNMET")
        << "  " << r.detail << "\n";
  }
  if (!out_dir.empty()) write_json(out_dir / "lemmas.json", all);
  return ok ? 0 : 1;
}

int cmd_gen_env(const ExperimentConfig& config, std::ostream& log) {
  const LinearMdp env = build_env(config.env);
  const ValidationReport vr = validate_env(env, 1e-9);
  if (!vr.ok()) fail(ErrorKind::kInvalidInput, "generated environment failed validation: " + vr.violations.front());
  save_env(config.out_dir / "env.json", env);
  if (config.env.generator == "lower_bound" && !config.env.path) {
    write_json(config.out_dir / "reward.json",
               reward_to_json(make_lower_bound_env(config.env.nu, config.env.env_epsilon).reward));
  }
  log << "wrote " << (config.out_dir / "env.json").string() << "\n";
  return 0;
}

}  // namespace rfx
