#include "rfx/diagnostics.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rfx/error.hpp"
#include "rfx/stats.hpp"

namespace rfx {

namespace {

double directed_alignment(const LinearMdp& env, int t, const Vector& theta) {
  Vector v = env.features[t] * theta;
  Vector value(env.n_states);
  for (int s = 0; s < env.n_states; ++s) value(s) = v.segment(s * env.n_actions, env.n_actions).maxCoeff();
  for (int tau = t - 1; tau >= 0; --tau) {
    const Vector q = env.transitions[tau] * value;
    Vector prev(env.n_states);
    for (int s = 0; s < env.n_states; ++s) prev(s) = q.segment(s * env.n_actions, env.n_actions).maxCoeff();
    value = std::move(prev);
  }
  return env.start_dist.dot(value);
}

// Golden-section minimization of f on [lo, hi].
template <typename F>
std::pair<double, double> golden_min(F&& f, double lo, double hi, int iters = 80) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iters; ++i) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = f(x2);
    }
  }
  return f1 <= f2 ? std::pair{x1, f1} : std::pair{x2, f2};
}

// Coordinate descent on the unit sphere with a shrinking step.
template <typename F>
std::pair<Vector, double> refine_on_sphere(F&& f, Vector theta, double value, double step) {
  const int d = static_cast<int>(theta.size());
  while (step > 1e-7) {
    bool improved = false;
    for (int i = 0; i < d; ++i) {
      for (double sgn : {1.0, -1.0}) {
        Vector cand = theta;
        cand(i) += sgn * step;
        const double n = cand.norm();
        if (n == 0.0) continue;
        cand /= n;
        const double fv = f(cand);
        if (fv < value) {
          theta = std::move(cand);
          value = fv;
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return {theta, value};
}

// Generalized golden ratio for the R_d low-discrepancy sequence.
double rd_phi(int d) {
  double x = 2.0;
  for (int i = 0; i < 64; ++i) x = std::pow(1.0 + x, 1.0 / (d + 1));
  return x;
}

std::vector<Vector> sphere_candidates(int d, int n) {
  std::vector<Vector> out;
  out.reserve(n);
  if (d == 3) {
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
      const double z = 1.0 - (i + 0.5) * 2.0 / n;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * i;
      Vector v(3);
      v << r * std::cos(phi), r * std::sin(phi), z;
      out.push_back(std::move(v));
    }
    return out;
  }
  const double g = rd_phi(d);
  Vector alpha(d);
  for (int j = 0; j < d; ++j) alpha(j) = std::pow(1.0 / g, j + 1);
  for (int i = 1; i <= n; ++i) {
    Vector v(d);
    for (int j = 0; j < d; ++j) {
      double u = 0.5 + alpha(j) * i;
      u -= std::floor(u);
      u = std::clamp(u, 1e-12, 1.0 - 1e-12);
      v(j) = normal_quantile(u);
    }
    const double nv = v.norm();
    if (nv > 0.0) out.push_back(v / nv);
  }
  return out;
}

}  // namespace

double best_alignment(const LinearMdp& env, int t, const Vector& theta) {
  require(t >= 0 && t < env.horizon, "best_alignment: timestep out of range");
  require(theta.size() == env.dim(t), "best_alignment: direction length mismatch");
  return std::max(directed_alignment(env, t, theta), directed_alignment(env, t, -theta));
}

ExplorabilityResult explorability(const LinearMdp& env, int t, const ExplorabilityOptions& options) {
  require(t >= 0 && t < env.horizon, "explorability: timestep out of range");
  require(options.resolution >= 4, "explorability: resolution too small");
  const int d = env.dim(t);
  auto f = [&](const Vector& th) { return best_alignment(env, t, th); };
  ExplorabilityResult res;
  if (d == 1) {
    res.direction = Vector::Ones(1);
    res.value = f(res.direction);
    res.method = "exact";
    res.upper_bound = false;
    return res;
  }
  if (d == 2) {
    auto fa = [&](double a) {
      Vector th(2);
      th << std::cos(a), std::sin(a);
      return f(th);
    };
    // |.| makes f(theta) = f(-theta); the half circle suffices.
    const int n = options.resolution;
    const double h = M_PI / n;
    std::vector<std::pair<double, int>> vals(n);
    for (int i = 0; i < n; ++i) vals[i] = {fa(i * h), i};
    const int k = std::min<int>(options.refine_candidates, n);
    std::partial_sort(vals.begin(), vals.begin() + k, vals.end());
    double best = vals[0].first, best_a = vals[0].second * h;
    for (int c = 0; c < k; ++c) {
      const double a0 = vals[c].second * h;
      auto [a, v] = golden_min(fa, a0 - h, a0 + h);
      if (v < best) {
        best = v;
        best_a = a;
      }
    }
    res.value = best;
    res.direction = Vector(2);
    res.direction << std::cos(best_a), std::sin(best_a);
    res.method = "grid";
    return res;
  }
  const std::vector<Vector> cands = sphere_candidates(d, options.resolution);
  std::vector<std::pair<double, int>> vals(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) vals[i] = {f(cands[i]), static_cast<int>(i)};
  const int k = std::min<int>(options.refine_candidates, static_cast<int>(vals.size()));
  std::partial_sort(vals.begin(), vals.begin() + k, vals.end());
  const double step = 2.0 / std::pow(static_cast<double>(options.resolution), 1.0 / (d - 1));
  res.value = std::numeric_limits<double>::infinity();
  for (int c = 0; c < k; ++c) {
    auto [th, v] = refine_on_sphere(f, cands[vals[c].second], vals[c].first, step);
    if (v < res.value) {
      res.value = v;
      res.direction = th;
    }
  }
  res.method = d == 3 ? "grid" : "sphere-sample";
  return res;
}

double bellman_fit_residual(const LinearMdp& env, int t, const Vector& theta_next, double fit_radius) {
  require(t >= 0 && t + 1 < env.horizon, "bellman_fit_residual: need a successor timestep");
  const Vector q_next = env.features[t + 1] * theta_next;
  Vector v_next(env.n_states);
  for (int s = 0; s < env.n_states; ++s) v_next(s) = q_next.segment(s * env.n_actions, env.n_actions).maxCoeff();
  const Vector target = env.transitions[t] * v_next;
  Vector theta = env.features[t].completeOrthogonalDecomposition().solve(target);
  const double n = theta.norm();
  if (n > fit_radius) theta *= fit_radius / n;
  return (env.features[t] * theta - target).cwiseAbs().maxCoeff();
}

IbeResult inherent_bellman_error(const LinearMdp& env, int t, const IbeOptions& options) {
  require(t >= 0 && t < env.horizon, "inherent_bellman_error: timestep out of range");
  require(options.scale > 0.0, "inherent_bellman_error: scale must be positive");
  IbeResult res;
  if (t + 1 >= env.horizon) return res;  // V_{H+1} = 0 is represented exactly
  const int dn = env.dim(t + 1);
  const double radius =
      options.scale * (options.fit_radius > 0.0 ? options.fit_radius : std::sqrt(static_cast<double>(env.dim(t))));
  const auto cod = env.features[t].completeOrthogonalDecomposition();
  Rng rng(derive_seed(options.seed, "diagnostics.ibe", static_cast<std::uint64_t>(t)));
  for (int i = 0; i < options.n_directions; ++i) {
    Vector dir(dn);
    for (int j = 0; j < dn; ++j) dir(j) = rng.normal();
    if (dir.norm() == 0.0) continue;
    dir *= options.scale / dir.norm();
    const Vector q_next = env.features[t + 1] * dir;
    Vector v_next(env.n_states);
    for (int s = 0; s < env.n_states; ++s) v_next(s) = q_next.segment(s * env.n_actions, env.n_actions).maxCoeff();
    const Vector target = env.transitions[t] * v_next;
    Vector theta = cod.solve(target);
    const double n = theta.norm();
    if (n > radius) theta *= radius / n;
    const double r = (env.features[t] * theta - target).cwiseAbs().maxCoeff();
    ++res.directions;
    if (res.worst_direction.size() == 0 || r > res.value) {
      res.value = r;
      res.worst_direction = dir;
    }
  }
  return res;
}

long long policy_count(const LinearMdp& env, int t) {
  const double per_step = env.n_states * std::log(static_cast<double>(env.n_actions));
  const double log_total = per_step * (t + 1);
  if (log_total > std::log(9.0e18)) return std::numeric_limits<long long>::max();
  long long total = 1;
  for (int i = 0; i < env.n_states * (t + 1); ++i) total *= env.n_actions;
  return total;
}

void enumerate_policies(const LinearMdp& env, int t, long long max_policies,
                        const std::function<void(const PolicyVisit&)>& fn) {
  require(t >= 0 && t < env.horizon, "enumerate_policies: timestep out of range");
  const long long count = policy_count(env, t);
  if (count > max_policies) {
    fail(ErrorKind::kInstanceTooLarge, "policy enumeration over " + std::to_string(count) +
                                           " policies exceeds the guard of " + std::to_string(max_policies));
  }
  PolicyVisit visit;
  visit.policy = PolicyTable::constant(env);
  // Actions at unreachable states do not change phibar, so only reachable
  // states branch; every distinct phibar is still visited.
  std::function<void(int, const Vector&)> rec = [&](int tau, const Vector& dist) {
    std::vector<int> live;
    for (int s = 0; s < env.n_states; ++s) {
      visit.policy.actions[tau][s] = 0;
      if (dist(s) > 0.0) live.push_back(s);
    }
    std::vector<int> digits(live.size(), 0);
    for (;;) {
      for (std::size_t i = 0; i < live.size(); ++i) visit.policy.actions[tau][live[i]] = digits[i];
      if (tau == t) {
        visit.mean_feature = Vector::Zero(env.dim(t));
        for (int s : live) visit.mean_feature += dist(s) * env.phi(t, s, visit.policy.actions[t][s]);
        fn(visit);
      } else {
        Vector next = Vector::Zero(env.n_states);
        for (int s : live) next += dist(s) * env.next_dist(tau, s, visit.policy.actions[tau][s]).transpose();
        rec(tau + 1, next);
      }
      std::size_t i = 0;
      while (i < digits.size() && ++digits[i] == env.n_actions) digits[i++] = 0;
      if (i == digits.size()) break;
    }
    for (int s : live) visit.policy.actions[tau][s] = 0;
  };
  rec(0, env.start_dist);
}

UncertaintyResult max_uncertainty(const LinearMdp& env, const CovarianceAccumulator& acc, double sigma, int t,
                                  long long max_policies) {
  require(sigma > 0.0, "max_uncertainty: sigma must be positive");
  require(acc.dim() == env.dim(t), "max_uncertainty: covariance dimension mismatch");
  UncertaintyResult best;
  best.value = -1.0;
  const double s = std::sqrt(sigma);
  enumerate_policies(env, t, max_policies, [&](const PolicyVisit& v) {
    const double u = s * acc.norm_inv(v.mean_feature);
    if (u > best.value) {
      best.value = u;
      best.policy = v.policy;
      best.mean_feature = v.mean_feature;
    }
  });
  return best;
}

}  // namespace rfx
