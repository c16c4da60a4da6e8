#include "rfx/env.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rfx/error.hpp"

namespace rfx {

namespace {

// Marsaglia-Tsang gamma sampler; shape < 1 uses the U^{1/a} boost.
double sample_gamma(double shape, Rng& rng) {
  if (shape < 1.0) {
    const double u = rng.uniform();
    return sample_gamma(shape + 1.0, rng) * std::pow(std::max(u, 1e-300), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(std::max(u, 1e-300)) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

Vector sample_dirichlet(int n, double concentration, Rng& rng) {
  Vector w(n);
  for (int i = 0; i < n; ++i) w(i) = sample_gamma(concentration, rng);
  const double total = w.sum();
  if (!(total > 0.0)) {
    w.setZero();
    w(static_cast<int>(rng.index(n))) = 1.0;
    return w;
  }
  return w / total;
}

std::string where(int t, int s, int a) {
  std::ostringstream os;
  os << "(t=" << t << ", s=" << s << ", a=" << a << ")";
  return os.str();
}

}  // namespace

double RewardSpec::reward(const LinearMdp& env, int t, int s, int a) const {
  double r = env.features[t].row(env.row(s, a)).dot(theta[t]);
  if (delta) r += (*delta)[t](env.row(s, a));
  return r;
}

RewardSpec RewardSpec::zero(const LinearMdp& env) {
  RewardSpec r;
  for (int t = 0; t < env.horizon; ++t) r.theta.push_back(Vector::Zero(env.dim(t)));
  return r;
}

PolicyTable PolicyTable::constant(const LinearMdp& env, int action) {
  PolicyTable p;
  p.actions.assign(env.horizon, std::vector<int>(env.n_states, action));
  return p;
}

ValidationReport validate_env(const LinearMdp& env, double tol) {
  ValidationReport rep;
  auto& v = rep.violations;
  if (env.horizon < 1) v.push_back("horizon must be positive");
  if (env.n_states < 1) v.push_back("n_states must be positive");
  if (env.n_actions < 1) v.push_back("n_actions must be positive");
  if (!v.empty()) return rep;
  const int rows = env.n_states * env.n_actions;
  if (static_cast<int>(env.features.size()) != env.horizon) {
    v.push_back("features must have one table per timestep");
    return rep;
  }
  if (static_cast<int>(env.transitions.size()) != env.horizon - 1) {
    v.push_back("transitions must have horizon-1 tables");
    return rep;
  }
  for (int t = 0; t < env.horizon; ++t) {
    const Matrix& f = env.features[t];
    if (f.rows() != rows || f.cols() < 1) {
      v.push_back("feature table shape mismatch at t=" + std::to_string(t));
      continue;
    }
    for (int s = 0; s < env.n_states; ++s) {
      for (int a = 0; a < env.n_actions; ++a) {
        const double n = f.row(env.row(s, a)).norm();
        if (!std::isfinite(n) || n > 1.0 + tol) {
          v.push_back("feature norm " + std::to_string(n) + " exceeds 1 at " + where(t, s, a));
        }
      }
    }
  }
  for (int t = 0; t + 1 < env.horizon; ++t) {
    const Matrix& p = env.transitions[t];
    if (p.rows() != rows || p.cols() != env.n_states) {
      v.push_back("transition table shape mismatch at t=" + std::to_string(t));
      continue;
    }
    for (int s = 0; s < env.n_states; ++s) {
      for (int a = 0; a < env.n_actions; ++a) {
        const auto r = p.row(env.row(s, a));
        if (r.minCoeff() < 0.0) v.push_back("negative transition probability at " + where(t, s, a));
        if (std::abs(r.sum() - 1.0) > tol) {
          v.push_back("transition row sums to " + std::to_string(r.sum()) + " at " + where(t, s, a));
        }
      }
    }
  }
  if (env.start_dist.size() != env.n_states) {
    v.push_back("start distribution length mismatch");
  } else {
    if (env.start_dist.minCoeff() < 0.0) v.push_back("negative start probability");
    if (std::abs(env.start_dist.sum() - 1.0) > tol) v.push_back("start distribution does not sum to 1");
  }
  return rep;
}

ValidationReport validate_policy(const LinearMdp& env, const PolicyTable& policy) {
  ValidationReport rep;
  if (static_cast<int>(policy.actions.size()) != env.horizon) {
    rep.violations.push_back("policy horizon mismatch");
    return rep;
  }
  for (int t = 0; t < env.horizon; ++t) {
    if (static_cast<int>(policy.actions[t].size()) != env.n_states) {
      rep.violations.push_back("policy state count mismatch at t=" + std::to_string(t));
      continue;
    }
    for (int s = 0; s < env.n_states; ++s) {
      const int a = policy.actions[t][s];
      if (a < 0 || a >= env.n_actions) {
        rep.violations.push_back("action out of range at " + where(t, s, a));
      }
    }
  }
  return rep;
}

EpisodeTrace rollout(const LinearMdp& env, const PolicyTable& policy, Rng& rng,
                     std::optional<int> stop_after, const RewardSpec* reward) {
  const int last = stop_after ? std::min(*stop_after, env.horizon) : env.horizon;
  EpisodeTrace trace;
  trace.reserve(last);
  const Vector& rho = env.start_dist;
  int s = static_cast<int>(rng.categorical({rho.data(), static_cast<std::size_t>(rho.size())}));
  for (int t = 0; t < last; ++t) {
    TraceStep step;
    step.t = t;
    step.state = s;
    step.action = policy(t, s);
    if (reward) step.reward = reward->reward(env, t, s, step.action);
    if (t + 1 < env.horizon) {
      const Vector p = env.next_dist(t, s, step.action).transpose();
      step.next_state = static_cast<int>(rng.categorical({p.data(), static_cast<std::size_t>(p.size())}));
    }
    trace.push_back(step);
    s = step.next_state;
  }
  return trace;
}

Vector state_occupancy(const LinearMdp& env, const PolicyTable& policy, int t) {
  require(t >= 0 && t < env.horizon, "state_occupancy: timestep out of range");
  Vector dist = env.start_dist;
  for (int tau = 0; tau < t; ++tau) {
    Vector next = Vector::Zero(env.n_states);
    for (int s = 0; s < env.n_states; ++s) {
      if (dist(s) == 0.0) continue;
      next += dist(s) * env.next_dist(tau, s, policy(tau, s)).transpose();
    }
    dist = std::move(next);
  }
  return dist;
}

Vector expected_feature(const LinearMdp& env, const PolicyTable& policy, int t) {
  const Vector dist = state_occupancy(env, policy, t);
  Vector out = Vector::Zero(env.dim(t));
  for (int s = 0; s < env.n_states; ++s) {
    if (dist(s) == 0.0) continue;
    out += dist(s) * env.phi(t, s, policy(t, s));
  }
  return out;
}

double exact_policy_value(const LinearMdp& env, const RewardSpec& reward, const PolicyTable& policy) {
  Vector v = Vector::Zero(env.n_states);
  for (int t = env.horizon - 1; t >= 0; --t) {
    Vector cur(env.n_states);
    for (int s = 0; s < env.n_states; ++s) {
      const int a = policy(t, s);
      double q = reward.reward(env, t, s, a);
      if (t + 1 < env.horizon) q += env.next_dist(t, s, a).dot(v.transpose());
      cur(s) = q;
    }
    v = std::move(cur);
  }
  return env.start_dist.dot(v);
}

OptimalSolution exact_optimal_tables(const LinearMdp& env, const std::vector<Vector>& rewards) {
  OptimalSolution sol;
  sol.policy = PolicyTable::constant(env);
  sol.values.assign(env.horizon + 1, Vector::Zero(env.n_states));
  for (int t = env.horizon - 1; t >= 0; --t) {
    for (int s = 0; s < env.n_states; ++s) {
      double best = 0.0;
      int best_a = 0;
      for (int a = 0; a < env.n_actions; ++a) {
        double q = rewards[t](env.row(s, a));
        if (t + 1 < env.horizon) q += env.next_dist(t, s, a).dot(sol.values[t + 1].transpose());
        if (a == 0 || q > best) {
          best = q;
          best_a = a;
        }
      }
      sol.values[t](s) = best;
      sol.policy.actions[t][s] = best_a;
    }
  }
  sol.value = env.start_dist.dot(sol.values[0]);
  return sol;
}

OptimalSolution exact_optimal(const LinearMdp& env, const RewardSpec& reward) {
  std::vector<Vector> tables;
  tables.reserve(env.horizon);
  for (int t = 0; t < env.horizon; ++t) {
    Vector r = env.features[t] * reward.theta[t];
    if (reward.delta) r += (*reward.delta)[t];
    tables.push_back(std::move(r));
  }
  return exact_optimal_tables(env, tables);
}

LinearMdp make_lowrank_random(const LowRankOptions& o) {
  require(o.horizon >= 1 && o.n_states >= 1 && o.n_actions >= 1, "make_lowrank_random: sizes must be positive");
  std::vector<int> dims = o.dims;
  if (dims.size() == 1) dims.assign(o.horizon, dims[0]);
  require(static_cast<int>(dims.size()) == o.horizon, "make_lowrank_random: need one dimension per timestep");
  const int rows = o.n_states * o.n_actions;
  for (int d : dims) {
    require(d >= 1 && d <= rows, "make_lowrank_random: infeasible feature dimension " + std::to_string(d));
  }
  Rng rng(derive_seed(o.seed, "env.lowrank"));
  LinearMdp env;
  env.horizon = o.horizon;
  env.n_states = o.n_states;
  env.n_actions = o.n_actions;
  for (int t = 0; t < o.horizon; ++t) {
    const int d = dims[t];
    Matrix f(rows, d);
    // Every anchor is used by at least one (s,a) so the features span R^d.
    std::vector<int> order(rows);
    for (int i = 0; i < rows; ++i) order[i] = i;
    for (int i = rows - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);
    for (int r = 0; r < rows; ++r) f.row(r) = sample_dirichlet(d, o.feature_concentration, rng).transpose();
    for (int i = 0; i < d; ++i) {
      Vector w = Vector::Constant(d, 0.0);
      w(i) = 1.0;
      Vector mix = sample_dirichlet(d, o.feature_concentration, rng);
      f.row(order[i]) = (0.5 * w + 0.5 * mix).transpose();
    }
    env.features.push_back(std::move(f));
  }
  for (int t = 0; t + 1 < o.horizon; ++t) {
    Matrix mu(dims[t], o.n_states);
    for (int i = 0; i < dims[t]; ++i) mu.row(i) = sample_dirichlet(o.n_states, o.anchor_concentration, rng).transpose();
    env.transitions.push_back(env.features[t] * mu);
  }
  env.start_dist = o.uniform_start ? Vector::Constant(o.n_states, 1.0 / o.n_states)
                                   : sample_dirichlet(o.n_states, 1.0, rng);
  return env;
}

LinearMdp make_tabular(int horizon, int n_states, int n_actions, std::uint64_t seed) {
  require(horizon >= 1 && n_states >= 1 && n_actions >= 1, "make_tabular: sizes must be positive");
  Rng rng(derive_seed(seed, "env.tabular"));
  const int rows = n_states * n_actions;
  LinearMdp env;
  env.horizon = horizon;
  env.n_states = n_states;
  env.n_actions = n_actions;
  for (int t = 0; t < horizon; ++t) env.features.push_back(Matrix::Identity(rows, rows));
  for (int t = 0; t + 1 < horizon; ++t) {
    Matrix p(rows, n_states);
    for (int r = 0; r < rows; ++r) p.row(r) = sample_dirichlet(n_states, 1.0, rng).transpose();
    env.transitions.push_back(std::move(p));
  }
  env.start_dist = Vector::Constant(n_states, 1.0 / n_states);
  return env;
}

LowerBoundInstance make_lower_bound_env(double nu, double epsilon) {
  require(nu > 0.0 && nu <= 0.25, "make_lower_bound_env: nu must lie in (0, 1/4]");
  require(std::abs(epsilon) <= nu / 2.0 + 1e-15, "make_lower_bound_env: |epsilon| must not exceed nu/2");
  constexpr int kS = 5, kA = 2;
  LinearMdp env;
  env.horizon = 2;
  env.n_states = kS;
  env.n_actions = kA;

  Matrix f0 = Matrix::Zero(kS * kA, 2);
  for (int s = 0; s < kS; ++s) {
    f0(s * kA + 0, 0) = 1.0;  // a_L -> e1
    f0(s * kA + 1, 1) = 1.0;  // a_R -> e2
  }
  Matrix f1 = Matrix::Zero(kS * kA, 2);
  const double sign_axis[5][2] = {{0, 0}, {1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  for (int s = 1; s < kS; ++s) {
    for (int a = 0; a < kA; ++a) {
      f1(s * kA + a, 0) = sign_axis[s][0];
      f1(s * kA + a, 1) = sign_axis[s][1];
    }
  }
  env.features = {f0, f1};

  Matrix p = Matrix::Zero(kS * kA, kS);
  for (int s = 0; s < kS; ++s) {
    p(s * kA + 0, 1) = 0.5 + nu;
    p(s * kA + 0, 2) = 0.5 - nu;
    p(s * kA + 1, 3) = 0.5 + nu + epsilon;
    p(s * kA + 1, 4) = 0.5 - nu - epsilon;
  }
  env.transitions = {p};
  env.start_dist = Vector::Zero(kS);
  env.start_dist(0) = 1.0;

  RewardSpec reward;
  reward.theta = {Vector::Constant(2, -0.5), Vector::Constant(2, 0.5 / nu)};
  reward.regularity = RegularityClass::kImplicit;
  return {std::move(env), std::move(reward)};
}

}  // namespace rfx
