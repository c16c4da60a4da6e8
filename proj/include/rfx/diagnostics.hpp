#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rfx/env.hpp"
#include "rfx/linalg.hpp"

namespace rfx {

/// max over policies of |phibar_{pi,t}^T theta|. Computed exactly by two
/// backward DPs with reward +-phi_t^T theta placed at timestep t only.
double best_alignment(const LinearMdp& env, int t, const Vector& theta);

struct ExplorabilityOptions {
  /// Number of candidate directions: angles on the half circle for d = 2,
  /// a Fibonacci lattice for d = 3, and a quasi-random sphere sample above.
  int resolution = 10000;
  /// Number of best candidates refined locally.
  int refine_candidates = 8;
};

struct ExplorabilityResult {
  double value = 0.0;
  std::string method;  // "exact" (d = 1), "grid", or "sphere-sample"
  Vector direction;    // minimizing unit direction found
  /// The search minimizes over sampled directions only, so the value is an
  /// upper bound on nu_t except for d = 1.
  bool upper_bound = true;
};

/// nu_t = min_{||theta||=1} max_pi |phibar_{pi,t}^T theta|.
ExplorabilityResult explorability(const LinearMdp& env, int t, const ExplorabilityOptions& options = {});

struct IbeOptions {
  int n_directions = 64;
  std::uint64_t seed = 0;
  /// Radius of the theta_{t+1} ball the directions are drawn from.
  double scale = 1.0;
  /// Radius of the theta_t ball the fit is projected onto, relative to
  /// scale; nonpositive means sqrt(d_t).
  double fit_radius = 0.0;
};

struct IbeResult {
  double value = 0.0;  // max over sampled directions of the fitted max-residual
  int directions = 0;
  Vector worst_direction;
};

/// Bellman residual of fitting T^P_t max_a phi_{t+1}^T theta_{t+1} with
/// phi_t^T theta_t, for a single next-step parameter.
double bellman_fit_residual(const LinearMdp& env, int t, const Vector& theta_next, double fit_radius);

/// Sampled estimate of the inherent Bellman error I(Q_t, Q_{t+1}). Only
/// finitely many theta_{t+1} are examined, so this is a lower bound on the
/// maximum over the ball (up to the least-squares fit gap).
IbeResult inherent_bellman_error(const LinearMdp& env, int t, const IbeOptions& options = {});

/// Calls fn(policy_prefix_distribution_at_t, decision_rules) for every
/// deterministic Markov policy over timesteps 0..t; used by max_uncertainty
/// and by the test oracles. Throws kInstanceTooLarge when
/// prod_{tau<=t} A^S exceeds max_policies.
struct PolicyVisit {
  PolicyTable policy;   // entries beyond t are 0
  Vector mean_feature;  // phibar_{pi,t}
};
void enumerate_policies(const LinearMdp& env, int t, long long max_policies,
                        const std::function<void(const PolicyVisit&)>& fn);

long long policy_count(const LinearMdp& env, int t);

struct UncertaintyResult {
  double value = 0.0;
  PolicyTable policy;
  Vector mean_feature;
};

/// U*_t(sigma) = max_pi sqrt(sigma) ||phibar_{pi,t}||_{Sigma^{-1}} by enumeration.
UncertaintyResult max_uncertainty(const LinearMdp& env, const CovarianceAccumulator& acc, double sigma, int t,
                                  long long max_policies = 1000000);

}  // namespace rfx
