#include "rfx/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rfx/error.hpp"
#include "rfx/stats.hpp"

namespace rfx {

double overestimation_probability() { return normal_cdf(-3.0); }

double magic_value(int d, double delta_pp) {
  require(d >= 1, "magic_value: dimension must be positive");
  require(delta_pp > 0.0 && delta_pp < 1.0, "magic_value: delta'' must lie in (0,1)");
  return 8.0 * d * std::log(2.0 * d / delta_pp);
}

double sigma_start(int d, double delta_pp, double lambda) { return lambda / magic_value(d, delta_pp); }

double chi_square_bound(int d, double delta) { return 2.0 * d * std::log(2.0 * d / delta); }

double gamma_bound(double sigma, int d, double delta_pp) { return sigma * chi_square_bound(d, delta_pp); }

double euclidean_deviation_bound(double sigma, int d, double delta_pp, double lambda_min) {
  return std::sqrt(gamma_bound(sigma, d, delta_pp) / lambda_min);
}

double deviation_constant(double delta_pp) { return std::sqrt(8.0 * std::log(1.0 / delta_pp)); }

double log_det_bound(int d, double k_bar) { return d * std::log(1.0 + k_bar / d); }

double azuma_bound(long n, double increment_bound, double delta) {
  return std::sqrt(2.0 * increment_bound * increment_bound * static_cast<double>(n) * std::log(1.0 / delta));
}

AlphaTerms alpha_terms(int d_t, int d_next, double k_bar, double delta_p, double reward_norm, double radius_next) {
  require(d_t >= 1 && d_next >= 0, "alpha: dimensions must be positive");
  require(k_bar > 0.0 && delta_p > 0.0, "alpha: k and delta' must be positive");
  AlphaTerms out;
  const double inner = 0.5 * d_t * std::log(1.0 + k_bar / d_t) +
                       d_next * std::log(1.0 + 4.0 * radius_next / (2.0 * std::sqrt(k_bar))) +
                       std::log(1.0 / delta_p);
  out.sqrt_beta_transition = std::sqrt(2.0) * 2.0 * std::sqrt(inner) + 2.0;
  out.sqrt_beta_reward = std::sqrt(d_t * std::log((1.0 + k_bar) / delta_p)) + reward_norm;
  const double root = 3.0 * (out.sqrt_beta_transition + out.sqrt_beta_reward + 2.0);
  out.alpha = root * root;
  return out;
}

double practical_alpha(int d_t, int d_next, double k_bar, double c_alpha) {
  return c_alpha * (d_t + d_next) * std::log(k_bar);
}

long epoch_length(int d, double sigma, double epsilon, const EpochInputs& in) {
  require(epsilon > 0.0, "epoch_length: epsilon must be positive");
  const double root = std::sqrt(gamma_bound(sigma, d, in.delta_pp) * log_det_bound(d, in.k_bar)) +
                      deviation_constant(in.delta_pp);
  const double k = std::ceil(2.0 / (1.0 - in.q) * root * root / (epsilon * epsilon));
  if (k >= static_cast<double>(std::numeric_limits<long>::max())) return std::numeric_limits<long>::max();
  return std::max(1L, static_cast<long>(k));
}

int epoch_count(int horizon, double alpha_p, double sigma_start) {
  require(sigma_start > 0.0, "epoch_count: sigma_start must be positive");
  const double ratio = 4.0 * horizon * horizon * alpha_p / sigma_start;
  if (!(ratio > 0.0)) return 1;
  return std::max(1, static_cast<int>(std::ceil(1.0 + std::log2(ratio))));
}

}  // namespace rfx
