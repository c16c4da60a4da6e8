#include "rfx/baselines.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "rfx/error.hpp"

namespace rfx {

DesignWeights goptimal_design(const std::vector<Vector>& features, double tol, int max_iter) {
  require(!features.empty(), "goptimal_design: no features");
  require(tol > 0.0, "goptimal_design: tolerance must be positive");
  const int n = static_cast<int>(features.size());
  const int d = static_cast<int>(features.front().size());
  Matrix f(n, d);
  for (int i = 0; i < n; ++i) {
    require(features[i].size() == d, "goptimal_design: features differ in length");
    f.row(i) = features[i].transpose();
  }

  // Work in an orthonormal basis of the span.
  Eigen::JacobiSVD<Matrix> svd(f, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = std::max(1e-12, sv.size() ? sv(0) * 1e-10 * std::max(n, d) : 0.0);
  int r = 0;
  while (r < sv.size() && sv(r) > cutoff) ++r;
  DesignWeights out;
  out.rank = r;
  out.weights.assign(n, 1.0 / n);
  if (r == 0) {
    out.converged = true;
    return out;
  }
  const Matrix z = f * svd.matrixV().leftCols(r);  // n x r

  Vector w = Vector::Constant(n, 1.0 / n);
  auto design_matrix = [&](const Vector& wt) {
    Matrix m = Matrix::Zero(r, r);
    for (int i = 0; i < n; ++i) {
      if (wt(i) > 0.0) m.selfadjointView<Eigen::Lower>().rankUpdate(z.row(i).transpose(), wt(i));
    }
    return Matrix(m.selfadjointView<Eigen::Lower>());
  };

  for (int it = 0;; ++it) {
    const Matrix m = design_matrix(w);
    const Eigen::LLT<Matrix> llt(m);
    const auto& l = llt.matrixLLT();
    double log_det = 0.0;
    for (int i = 0; i < r; ++i) log_det += 2.0 * std::log(l(i, i));
    out.log_det_trace.push_back(log_det);

    // g_i = z_i^T M^{-1} z_i
    const Matrix sol = llt.matrixL().solve(z.transpose());
    const Vector g = sol.colwise().squaredNorm().transpose();
    int j = 0;
    g.maxCoeff(&j);
    out.g_value = g(j);
    out.iterations = it;
    if (out.g_value <= r * (1.0 + tol)) {
      out.converged = true;
      break;
    }
    if (it >= max_iter) break;
    // Exact line search for log det along w -> (1 - s) w + s e_j.
    const double step = (out.g_value / r - 1.0) / (out.g_value - 1.0);
    w *= 1.0 - step;
    w(j) += step;
  }
  for (int i = 0; i < n; ++i) out.weights[i] = w(i);
  return out;
}

DesignWeights goptimal_level_design(const LinearMdp& env, int t, double tol, int max_iter) {
  require(t >= 0 && t < env.horizon, "goptimal_level_design: timestep out of range");
  std::vector<Vector> feats;
  for (int s = 0; s < env.n_states; ++s) {
    for (int a = 0; a < env.n_actions; ++a) feats.push_back(env.phi(t, s, a));
  }
  DesignWeights dw = goptimal_design(feats, tol, max_iter);
  for (int s = 0; s < env.n_states; ++s) {
    for (int a = 0; a < env.n_actions; ++a) {
      const double w = dw.weights[env.row(s, a)];
      if (w > 0.0) dw.support.push_back(DesignPoint{t, s, a, w});
    }
  }
  return dw;
}

std::vector<long> round_allocation(const std::vector<double>& weights, long n) {
  require(n >= 0, "round_allocation: n must be nonnegative");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  require(total > 0.0, "round_allocation: weights must have positive mass");
  std::vector<long> alloc(weights.size());
  std::vector<std::pair<double, std::size_t>> rem;
  long used = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = n * weights[i] / total;
    alloc[i] = static_cast<long>(std::floor(exact));
    used += alloc[i];
    rem.emplace_back(exact - alloc[i], i);
  }
  // Largest remainders first; ties to the lower index.
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; used < n; ++k, ++used) ++alloc[rem[k % rem.size()].second];
  return alloc;
}

std::vector<Transition> generative_collect(const GenerativeModel& model, int t, const DesignWeights& design, long n,
                                           Rng& rng) {
  if (!model.privileged()) fail(ErrorKind::kInvalidInput, "generative_collect: generative access not granted");
  const LinearMdp& env = model.env();
  require(t >= 0 && t < env.horizon, "generative_collect: timestep out of range");
  require(!design.support.empty(), "generative_collect: design has no support");
  std::vector<double> w;
  for (const auto& p : design.support) w.push_back(p.weight);
  const std::vector<long> alloc = round_allocation(w, n);
  std::vector<Transition> out;
  out.reserve(n);
  for (std::size_t i = 0; i < alloc.size(); ++i) {
    const auto& pt = design.support[i];
    for (long k = 0; k < alloc[i]; ++k) {
      Transition tr{pt.state, pt.action, kNoState, std::nullopt};
      if (t + 1 < env.horizon) {
        const Vector p = env.next_dist(t, pt.state, pt.action).transpose();
        tr.next_state = static_cast<int>(rng.categorical({p.data(), static_cast<std::size_t>(p.size())}));
      }
      out.push_back(tr);
    }
  }
  return out;
}

LsviDataset goptimal_explore(const GenerativeModel& model, long n_per_level, std::uint64_t seed, double tol) {
  const LinearMdp& env = model.env();
  LsviDataset data(env);
  for (int t = 0; t < env.horizon; ++t) {
    const DesignWeights dw = goptimal_level_design(env, t, tol);
    Rng rng = Rng::derive(seed, "goptimal.collect", static_cast<std::uint64_t>(t));
    for (const auto& tr : generative_collect(model, t, dw, n_per_level, rng)) data.add(env, t, tr);
  }
  return data;
}

ExplorationDataset uniform_explore(const LinearMdp& env, long episodes, std::uint64_t seed) {
  ExplorationDataset out{env.horizon, {}};
  out.records.reserve(static_cast<std::size_t>(episodes) * env.horizon);
  for (long k = 0; k < episodes; ++k) {
    Rng rng = Rng::derive(seed, "uniform.episode", static_cast<std::uint64_t>(k));
    const Vector& rho = env.start_dist;
    int s = static_cast<int>(rng.categorical({rho.data(), static_cast<std::size_t>(rho.size())}));
    for (int t = 0; t < env.horizon; ++t) {
      const int a = static_cast<int>(rng.index(env.n_actions));
      int next = kNoState;
      if (t + 1 < env.horizon) {
        const Vector p = env.next_dist(t, s, a).transpose();
        next = static_cast<int>(rng.categorical({p.data(), static_cast<std::size_t>(p.size())}));
      }
      out.records.push_back(ExplorationRecord{t, k, 0, 0.0, t, s, a, next});
      s = next;
    }
  }
  return out;
}

}  // namespace rfx
