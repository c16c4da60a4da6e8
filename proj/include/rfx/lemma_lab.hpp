#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rfx/linalg.hpp"

namespace rfx {

enum class LemmaVerdict { kPass, kFail, kPreconditionUnmet };

/// Outcome of a Monte-Carlo check of a one-sided probability bound.
///
/// For upper-bound lemmas (a violation probability at most `bound`) the test
/// passes when rate <= bound + 3 stderr. For the overestimation lemma the
/// bound is a lower bound on a success probability and the test passes when
/// rate >= bound - 3 stderr.
struct LemmaTestResult {
  std::string lemma;
  long trials = 0;
  double rate = 0.0;
  double bound = 0.0;
  double stderr_ = 0.0;
  bool lower_bound = false;
  LemmaVerdict verdict = LemmaVerdict::kPass;
  std::string detail;

  bool passed() const { return verdict == LemmaVerdict::kPass; }
};

/// Applies the "bound +- 3 stderr" rule.
LemmaVerdict judge(double rate, double bound, long trials, bool lower_bound);

/// P(chi^2_d > 2 d ln(2d / delta)) <= delta.
LemmaTestResult test_chi_square(int d, double delta, long trials, std::uint64_t seed);

/// Sum of n centered +-A coin flips: P(|S_n| > sqrt(2 A^2 n ln(1/delta))) <= delta.
LemmaTestResult test_azuma(long n, double increment_bound, double delta, long trials, std::uint64_t seed);

/// xi ~ N(0, sigma Sigma^{-1}): ||xi||_Sigma <= sqrt(2 sigma d ln(2d/delta)) and
/// ||xi||_2 <= that bound / sqrt(lambda_min), both violated with probability
/// at most delta. `bound_scale` multiplies both bounds (harness self-test).
LemmaTestResult test_large_deviation(const CovarianceAccumulator& acc, double sigma, double delta, long trials,
                                     std::uint64_t seed, double bound_scale = 1.0);

/// P(phi^T xi >= sqrt(sigma) ||phi||_{Sigma^{-1}} + 2 eps_bar) >= Phi(-3) whenever
/// eps_bar <= sqrt(sigma) ||phi||_{Sigma^{-1}}; otherwise reports precondition-unmet.
LemmaTestResult test_overestimation(const Vector& phi, const CovarianceAccumulator& acc, double sigma, double eps_bar,
                                    long trials, std::uint64_t seed);

struct BatteryOptions {
  std::uint64_t seed = 0;
  long trials = 20000;
  long overestimation_trials = 5000;
  std::string only;  // run a single lemma when nonempty
  double bound_scale = 1.0;
};

/// Default battery: chi-square (d in {1, 8}), Azuma, large deviation, overestimation.
std::vector<LemmaTestResult> run_lemma_battery(const BatteryOptions& options = {});

}  // namespace rfx
