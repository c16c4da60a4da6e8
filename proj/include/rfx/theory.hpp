#pragma once

#include <vector>

namespace rfx {

// Closed-form constants of the exploration analysis. Every statistical test
// in lemma_lab evaluates its bound through these functions.

/// q = Phi(-3).
double overestimation_probability();

/// 8 d ln(2d / delta''): the eigenvalue-to-sigma ratio that keeps the
/// pseudoreward inside the 1/2 ball.
double magic_value(int d, double delta_pp);

/// lambda / magic_value(d, delta'').
double sigma_start(int d, double delta_pp, double lambda = 1.0);

/// Chi-square tail level 2 d ln(2d / delta).
double chi_square_bound(int d, double delta);

/// gamma(sigma) = 2 sigma d ln(2d / delta''); sqrt(gamma) bounds ||xi||_Sigma.
double gamma_bound(double sigma, int d, double delta_pp);

/// sqrt(gamma(sigma) / lambda_min): bound on ||xi||_2.
double euclidean_deviation_bound(double sigma, int d, double delta_pp, double lambda_min);

/// A = sqrt(8 ln(1 / delta'')).
double deviation_constant(double delta_pp);

/// D_p = d ln(1 + k / d) with L_phi = 1.
double log_det_bound(int d, double k_bar);

/// sqrt(2 A^2 n ln(1 / delta)).
double azuma_bound(long n, double increment_bound, double delta);

struct AlphaTerms {
  double sqrt_beta_transition = 0.0;
  double sqrt_beta_reward = 0.0;
  double alpha = 0.0;
};

/// sqrt(beta^t) = 2 sqrt2 sqrt(d_t/2 ln(1 + k/d_t) + d_next ln(1 + 4 R/(2 sqrt k)) + ln(1/delta')) + 2,
/// sqrt(beta^r) = sqrt(d_t ln((1 + k)/delta')) + reward_norm,
/// sqrt(alpha) = 3 (sqrt(beta^t) + sqrt(beta^r) + 2).
/// d_next = 0 at the last timestep.
AlphaTerms alpha_terms(int d_t, int d_next, double k_bar, double delta_p, double reward_norm = 1.0,
                       double radius_next = 1.0);

/// c_alpha (d_t + d_next) ln(k).
double practical_alpha(int d_t, int d_next, double k_bar, double c_alpha);

struct EpochInputs {
  double q = 0.0;
  double delta_pp = 0.0;
  double k_bar = 0.0;
};

/// k_max = ceil(2/(1-q) (sqrt(gamma(sigma) D_p) + A)^2 / eps^2).
long epoch_length(int d, double sigma, double epsilon, const EpochInputs& in);

/// e_max = ceil(1 + log2(4 H^2 alpha_p / sigma_start)), at least 1.
int epoch_count(int horizon, double alpha_p, double sigma_start);

}  // namespace rfx
