#include "rfx/lsvi.hpp"

#include <cmath>

#include "rfx/error.hpp"

namespace rfx {

LsviDataset::LsviDataset(const LinearMdp& env, double lambda) : lambda_(lambda) {
  levels_.reserve(env.horizon);
  for (int t = 0; t < env.horizon; ++t) {
    const int d = env.dim(t);
    levels_.push_back(Level{CovarianceAccumulator(d, lambda), {}, {}, Matrix::Zero(d, env.n_states),
                            Vector::Zero(d), 0});
  }
}

void LsviDataset::add(const LinearMdp& env, int t, const Transition& tr) {
  require(t >= 0 && t < horizon(), "dataset: timestep out of range");
  require(tr.state >= 0 && tr.state < env.n_states, "dataset: state out of range");
  require(tr.action >= 0 && tr.action < env.n_actions, "dataset: action out of range");
  const bool last = t + 1 == env.horizon;
  require(last ? tr.next_state == kNoState : (tr.next_state >= 0 && tr.next_state < env.n_states),
          "dataset: successor state out of range");
  Level& lv = levels_[t];
  Vector phi = env.phi(t, tr.state, tr.action);
  lv.cov.update(phi);
  if (!last) lv.successor_sums.col(tr.next_state) += phi;
  if (tr.reward) {
    lv.reward_sum += *tr.reward * phi;
    ++lv.rewarded;
  }
  lv.records.push_back(tr);
  lv.features.push_back(std::move(phi));
}

LsviDataset LsviDataset::with_rewards(const LinearMdp& env, const RewardSpec& reward, Rng* noise) const {
  LsviDataset out(*this);
  for (int t = 0; t < horizon(); ++t) {
    Level& lv = out.levels_[t];
    lv.reward_sum.setZero();
    lv.rewarded = 0;
    for (std::size_t k = 0; k < lv.records.size(); ++k) {
      Transition& tr = lv.records[k];
      double r = reward.reward(env, t, tr.state, tr.action);
      if (noise) r += noise->normal();
      tr.reward = r;
      lv.reward_sum += r * lv.features[k];
      ++lv.rewarded;
    }
  }
  return out;
}

Vector ValueParams::combined(int t) const {
  if (theta_reward.empty()) return theta[t];
  return theta[t] + theta_reward[t];
}

int greedy_action(const LinearMdp& env, const Vector& theta, int t, int s) {
  int best_a = 0;
  double best = 0.0;
  for (int a = 0; a < env.n_actions; ++a) {
    const double q = env.features[t].row(env.row(s, a)).dot(theta);
    if (a == 0 || q > best) {
      best = q;
      best_a = a;
    }
  }
  return best_a;
}

namespace {

// V(s) = max_a phi_t(s,a)^T theta, with the greedy actions written to `actions`.
Vector greedy_values(const LinearMdp& env, int t, const Vector& theta, std::vector<int>& actions) {
  const Vector q = env.features[t] * theta;
  Vector v(env.n_states);
  for (int s = 0; s < env.n_states; ++s) {
    int best_a = 0;
    for (int a = 1; a < env.n_actions; ++a) {
      if (q(env.row(s, a)) > q(env.row(s, best_a))) best_a = a;
    }
    actions[s] = best_a;
    v(s) = q(env.row(s, best_a));
  }
  return v;
}

}  // namespace

LsviResult lsvi_explore(const LinearMdp& env, const LsviDataset& data, int p, const Vector& xi) {
  require(p >= 0 && p < env.horizon, "lsvi_explore: phase out of range");
  require(xi.size() == env.dim(p), "lsvi_explore: pseudoreward length mismatch");
  require(data.horizon() == env.horizon, "lsvi_explore: dataset horizon mismatch");
  LsviResult res;
  res.policy = PolicyTable::constant(env);
  res.params.span = p + 1;
  res.params.theta.assign(p + 1, Vector());
  const double xn = xi.norm();
  if (xn > 1.0) {
    res.report.warnings.push_back("pseudoreward norm exceeds 1");
  } else if (xn > 0.5) {
    res.report.warnings.push_back("pseudoreward norm exceeds 1/2");
  }
  res.params.theta[p] = xi;
  Vector v = greedy_values(env, p, xi, res.policy.actions[p]);
  for (int t = p - 1; t >= 0; --t) {
    const auto& lv = data.level(t);
    if (lv.records.empty()) res.report.empty_levels.push_back(t);
    res.params.theta[t] = lv.cov.solve(lv.successor_sums * v);
    v = greedy_values(env, t, res.params.theta[t], res.policy.actions[t]);
  }
  res.v1 = env.start_dist.dot(v);
  return res;
}

LsviResult lsvi_batch(const LinearMdp& env, const LsviDataset& data, double radius,
                      const std::vector<double>* alpha) {
  require(data.horizon() == env.horizon, "lsvi_batch: dataset horizon mismatch");
  for (int t = 0; t < env.horizon; ++t) {
    const auto& lv = data.level(t);
    for (std::size_t k = 0; k < lv.records.size(); ++k) {
      if (!lv.records[k].reward) {
        fail(ErrorKind::kInvalidInput,
             "lsvi_batch: record (t=" + std::to_string(t) + ", k=" + std::to_string(k) + ") has no reward");
      }
    }
  }
  LsviResult res;
  res.policy = PolicyTable::constant(env);
  res.params.span = env.horizon;
  res.params.radius = radius;
  res.params.theta.assign(env.horizon, Vector());
  res.params.theta_reward.assign(env.horizon, Vector());
  Vector v = Vector::Zero(env.n_states);
  const int h = env.horizon;
  for (int t = h - 1; t >= 0; --t) {
    const auto& lv = data.level(t);
    if (lv.records.empty()) res.report.empty_levels.push_back(t);
    res.params.theta_reward[t] = lv.cov.solve(lv.reward_sum);
    res.params.theta[t] = t + 1 < h ? lv.cov.solve(lv.successor_sums * v) : Vector::Zero(env.dim(t));
    const Vector combined = res.params.combined(t);
    if (alpha && combined.norm() > 2.0 * radius) {
      const double need = 4.0 * h * h * (*alpha)[t];
      if (lv.cov.min_eigenvalue() >= need) {
        res.report.warnings.push_back("parameter norm exceeds 2R at t=" + std::to_string(t) +
                                      " although lambda_min precondition holds");
      }
    }
    v = greedy_values(env, t, combined, res.policy.actions[t]);
  }
  if (alpha) {
    for (int t = 0; t < h; ++t) {
      if (data.level(t).cov.min_eigenvalue() < 4.0 * h * h * (*alpha)[t]) {
        res.report.warnings.push_back("lambda_min precondition 4 H^2 alpha_t not met at t=" + std::to_string(t));
      }
    }
  }
  res.v1 = env.start_dist.dot(v);
  return res;
}

}  // namespace rfx
