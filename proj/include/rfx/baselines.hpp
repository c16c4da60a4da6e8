#pragma once

#include <vector>

#include "rfx/env.hpp"
#include "rfx/francis.hpp"
#include "rfx/linalg.hpp"

namespace rfx {

struct DesignPoint {
  int t = 0;
  int state = 0;
  int action = 0;
  double weight = 0.0;
};

struct DesignWeights {
  std::vector<double> weights;      // aligned with the input features
  std::vector<DesignPoint> support;  // filled by level designs
  double g_value = 0.0;             // max_i ||phi_i||^2_{Sigma(w)^{-1}} in the spanned subspace
  int rank = 0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> log_det_trace;  // log det Sigma(w) per iterate
};

/// Frank-Wolfe (Fedorov-Wynn) iterations on log det Sigma(w); stops once
/// g <= rank (1 + tol). Rank-deficient inputs are solved in their span.
DesignWeights goptimal_design(const std::vector<Vector>& features, double tol = 0.05, int max_iter = 100000);

/// Design over every (s, a) at timestep t.
DesignWeights goptimal_level_design(const LinearMdp& env, int t, double tol = 0.05, int max_iter = 100000);

/// Largest-remainder rounding of n * w to integers summing to n.
std::vector<long> round_allocation(const std::vector<double>& weights, long n);

/// Direct (s, a) sampling at any timestep. Constructed only through grant().
class GenerativeModel {
 public:
  static GenerativeModel grant(const LinearMdp& env) { return GenerativeModel(env, true); }
  static GenerativeModel deny(const LinearMdp& env) { return GenerativeModel(env, false); }
  const LinearMdp& env() const { return *env_; }
  bool privileged() const { return privileged_; }

 private:
  GenerativeModel(const LinearMdp& env, bool privileged) : env_(&env), privileged_(privileged) {}
  const LinearMdp* env_;
  bool privileged_;
};

/// Samples successors for round_allocation(weights, n) draws of each support point.
std::vector<Transition> generative_collect(const GenerativeModel& model, int t, const DesignWeights& design, long n,
                                           Rng& rng);

/// G-optimal design plus generative sampling at every level with n samples each.
LsviDataset goptimal_explore(const GenerativeModel& model, long n_per_level, std::uint64_t seed, double tol = 0.05);

/// Uniformly random actions over full episodes, one record per timestep.
ExplorationDataset uniform_explore(const LinearMdp& env, long episodes, std::uint64_t seed);

}  // namespace rfx
