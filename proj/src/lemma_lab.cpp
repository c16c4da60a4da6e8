#include "rfx/lemma_lab.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "rfx/error.hpp"
#include "rfx/stats.hpp"
#include "rfx/theory.hpp"

namespace rfx {

namespace {

LemmaTestResult finish(std::string lemma, long trials, long hits, double bound, bool lower_bound) {
  LemmaTestResult r;
  r.lemma = std::move(lemma);
  r.trials = trials;
  r.rate = static_cast<double>(hits) / static_cast<double>(trials);
  r.bound = bound;
  r.stderr_ = binomial_stderr(bound, trials);
  r.lower_bound = lower_bound;
  r.verdict = judge(r.rate, bound, trials, lower_bound);
  return r;
}

}  // namespace

LemmaVerdict judge(double rate, double bound, long trials, bool lower_bound) {
  const double se = binomial_stderr(bound, trials);
  if (lower_bound) return rate >= bound - 3.0 * se ? LemmaVerdict::kPass : LemmaVerdict::kFail;
  return rate <= bound + 3.0 * se ? LemmaVerdict::kPass : LemmaVerdict::kFail;
}

namespace {

LemmaTestResult chi_square_impl(int d, double delta, long trials, std::uint64_t seed, double scale) {
  require(d >= 1, "test_chi_square: d must be positive");
  require(delta > 0.0 && delta < 1.0, "test_chi_square: delta must lie in (0,1)");
  require(trials > 0, "test_chi_square: trials must be positive");
  const double level = scale * chi_square_bound(d, delta);
  long hits = 0;
  for (long i = 0; i < trials; ++i) {
    Rng rng = Rng::derive(seed, "lemma.chi_square", static_cast<std::uint64_t>(i));
    double x2 = 0.0;
    for (int j = 0; j < d; ++j) {
      const double z = rng.normal();
      x2 += z * z;
    }
    hits += x2 > level;
  }
  LemmaTestResult r = finish("chi_square", trials, hits, delta, false);
  std::ostringstream os;
  os << "d=" << d << " level=" << level;
  r.detail = os.str();
  return r;
}

LemmaTestResult azuma_impl(long n, double increment_bound, double delta, long trials, std::uint64_t seed,
                           double scale) {
  require(n >= 1, "test_azuma: n must be positive");
  require(increment_bound > 0.0, "test_azuma: increment bound must be positive");
  require(delta > 0.0 && delta < 1.0, "test_azuma: delta must lie in (0,1)");
  require(trials > 0, "test_azuma: trials must be positive");
  const double level = scale * azuma_bound(n, increment_bound, delta);
  long hits = 0;
  for (long i = 0; i < trials; ++i) {
    Rng rng = Rng::derive(seed, "lemma.azuma", static_cast<std::uint64_t>(i));
    long sum = 0;
    long left = n;
    // 64 coin flips per draw.
    while (left > 0) {
      const int take = static_cast<int>(std::min<long>(left, 64));
      std::uint64_t bits = rng.next_u64();
      if (take < 64) bits &= (std::uint64_t{1} << take) - 1;
      sum += 2L * std::popcount(bits) - take;
      left -= take;
    }
    hits += std::abs(static_cast<double>(sum) * increment_bound) > level;
  }
  LemmaTestResult r = finish("azuma", trials, hits, delta, false);
  std::ostringstream os;
  os << "n=" << n << " A=" << increment_bound << " level=" << level;
  r.detail = os.str();
  return r;
}

}  // namespace

LemmaTestResult test_chi_square(int d, double delta, long trials, std::uint64_t seed) {
  return chi_square_impl(d, delta, trials, seed, 1.0);
}

LemmaTestResult test_azuma(long n, double increment_bound, double delta, long trials, std::uint64_t seed) {
  return azuma_impl(n, increment_bound, delta, trials, seed, 1.0);
}

LemmaTestResult test_large_deviation(const CovarianceAccumulator& acc, double sigma, double delta, long trials,
                                     std::uint64_t seed, double bound_scale) {
  require(sigma > 0.0, "test_large_deviation: sigma must be positive");
  require(delta > 0.0 && delta < 1.0, "test_large_deviation: delta must lie in (0,1)");
  require(trials > 0, "test_large_deviation: trials must be positive");
  const int d = acc.dim();
  const double sigma_norm_level = bound_scale * std::sqrt(gamma_bound(sigma, d, delta));
  const double euclid_level = bound_scale * euclidean_deviation_bound(sigma, d, delta, acc.min_eigenvalue());
  long hits = 0;
  for (long i = 0; i < trials; ++i) {
    Rng rng = Rng::derive(seed, "lemma.large_deviation", static_cast<std::uint64_t>(i));
    const Vector xi = acc.sample_gaussian_inv(sigma, rng);
    hits += acc.norm_fwd(xi) > sigma_norm_level || xi.norm() > euclid_level;
  }
  LemmaTestResult r = finish("large_deviation", trials, hits, delta, false);
  std::ostringstream os;
  os << "d=" << d << " sigma=" << sigma << " sigma_norm_level=" << sigma_norm_level
     << " euclid_level=" << euclid_level;
  r.detail = os.str();
  return r;
}

LemmaTestResult test_overestimation(const Vector& phi, const CovarianceAccumulator& acc, double sigma, double eps_bar,
                                    long trials, std::uint64_t seed) {
  require(sigma > 0.0, "test_overestimation: sigma must be positive");
  require(eps_bar >= 0.0, "test_overestimation: eps_bar must be nonnegative");
  require(trials > 0, "test_overestimation: trials must be positive");
  const double width = acc.bonus(sigma, phi).value;
  const double q = overestimation_probability();
  std::ostringstream os;
  os << "width=" << width << " eps_bar=" << eps_bar;
  if (eps_bar > width) {
    LemmaTestResult r;
    r.lemma = "overestimation";
    r.trials = 0;
    r.bound = q;
    r.lower_bound = true;
    r.verdict = LemmaVerdict::kPreconditionUnmet;
    r.detail = os.str() + " (precondition-unmet)";
    return r;
  }
  const double level = width + 2.0 * eps_bar;
  long hits = 0;
  for (long i = 0; i < trials; ++i) {
    Rng rng = Rng::derive(seed, "lemma.overestimation", static_cast<std::uint64_t>(i));
    hits += phi.dot(acc.sample_gaussian_inv(sigma, rng)) >= level;
  }
  LemmaTestResult r = finish("overestimation", trials, hits, q, true);
  r.detail = os.str();
  return r;
}

std::vector<LemmaTestResult> run_lemma_battery(const BatteryOptions& options) {
  std::vector<LemmaTestResult> out;
  const auto want = [&](const char* name) { return options.only.empty() || options.only == name; };
  const double s = options.bound_scale;
  if (want("chi_square")) {
    for (auto [d, delta] : {std::pair{1, 0.05}, std::pair{8, 0.01}}) {
      out.push_back(chi_square_impl(d, delta, options.trials, derive_seed(options.seed, "battery.chi", d), s));
    }
  }
  if (want("azuma")) {
    out.push_back(azuma_impl(10000, 1.0, 0.05, options.trials, derive_seed(options.seed, "battery.azuma"), s));
  }
  if (want("large_deviation")) {
    CovarianceAccumulator acc(2, 1.0);
    out.push_back(test_large_deviation(acc, 1.0, 0.01, options.trials, derive_seed(options.seed, "battery.ld"), s));
    CovarianceAccumulator skew(3, 1.0);
    Vector v(3);
    v << 3.0, 1.0, 0.0;
    skew.update(v);
    v << 0.0, 2.0, 0.5;
    skew.update(v);
    out.push_back(
        test_large_deviation(skew, 0.5, 0.01, options.trials, derive_seed(options.seed, "battery.ld.skew"), s));
  }
  if (want("overestimation")) {
    CovarianceAccumulator acc(2, 1.0);
    Vector phi(2);
    phi << 0.6, 0.8;
    const double width = acc.bonus(1.0, phi).value;
    out.push_back(test_overestimation(phi, acc, 1.0, 0.0, options.overestimation_trials,
                                      derive_seed(options.seed, "battery.over.zero")));
    out.push_back(test_overestimation(phi, acc, 1.0, width, options.overestimation_trials,
                                      derive_seed(options.seed, "battery.over.edge")));
  }
  return out;
}

}  // namespace rfx
