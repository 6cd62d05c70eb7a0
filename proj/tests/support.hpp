#pragma once

// Shared test oracles. Everything here recomputes quantities through an
// independent route (plain loops, finite differences, grid search, Monte
// Carlo at true parameters) so library results are checked against code
// that does not share their implementation path.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "aae/aae.hpp"

namespace testsupport {

using aae::ChoiceTask;
using aae::Matrix;
using aae::MnlParams;
using aae::Rng;
using aae::SoftTarget;
using aae::Vector;

/// Plain-loop re-implementation of the mean weighted log-likelihood using
/// only std::exp and std::log; no shared code with aae::soft_loglik.
inline double loglik_reference(const std::vector<ChoiceTask>& tasks,
                               const std::vector<SoftTarget>& targets,
                               const Vector& beta) {
  double total = 0.0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const int k = tasks[i].k();
    const int d = tasks[i].d();
    std::vector<double> util(k + 1, 0.0);
    for (int j = 1; j <= k; ++j)
      for (int c = 0; c < d; ++c)
        util[j] += tasks[i].features(j - 1, c) * beta(c);
    double denom = 0.0;
    for (int j = 0; j <= k; ++j) denom += std::exp(util[j]);
    for (int j = 0; j <= k; ++j)
      total += targets[i].weights(j) * (util[j] - std::log(denom));
  }
  return total / static_cast<double>(tasks.size());
}

inline Vector fd_gradient(const std::function<double(const Vector&)>& f,
                          const Vector& x, double h = 1e-5) {
  Vector grad(x.size());
  for (int i = 0; i < x.size(); ++i) {
    Vector hi = x, lo = x;
    hi(i) += h;
    lo(i) -= h;
    grad(i) = (f(hi) - f(lo)) / (2.0 * h);
  }
  return grad;
}

inline Matrix fd_hessian(const std::function<double(const Vector&)>& f,
                         const Vector& x, double h = 1e-4) {
  Matrix hess(x.size(), x.size());
  for (int i = 0; i < x.size(); ++i) {
    for (int j = 0; j < x.size(); ++j) {
      Vector pp = x, pm = x, mp = x, mm = x;
      pp(i) += h; pp(j) += h;
      pm(i) += h; pm(j) -= h;
      mp(i) -= h; mp(j) += h;
      mm(i) -= h; mm(j) -= h;
      hess(i, j) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
    }
  }
  return hess;
}

/// Elementwise check |a-b| <= tol * max(1, |b|); the tolerance is relative
/// for O(1)-or-larger entries and absolute below that.
inline double max_rel_err(const Vector& a, const Vector& b) {
  double worst = 0.0;
  for (int i = 0; i < a.size(); ++i)
    worst = std::max(worst,
                     std::abs(a(i) - b(i)) / std::max(1.0, std::abs(b(i))));
  return worst;
}

inline double max_rel_err(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c)
      worst = std::max(worst, std::abs(a(r, c) - b(r, c)) /
                                  std::max(1.0, std::abs(b(r, c))));
  return worst;
}

inline ChoiceTask random_task(Rng& rng, int k, int d, double range = 2.0) {
  ChoiceTask t;
  t.features.resize(k, d);
  for (int j = 0; j < k; ++j)
    for (int c = 0; c < d; ++c) t.features(j, c) = rng.uniform(-range, range);
  return t;
}

inline SoftTarget random_target(Rng& rng, int k) {
  Vector w(k + 1);
  for (int j = 0; j <= k; ++j) w(j) = -std::log(rng.uniform01() + 1e-12);
  w /= w.sum();
  return SoftTarget{w};
}

inline Vector random_vector(Rng& rng, int d, double range = 1.0) {
  Vector v(d);
  for (int c = 0; c < d; ++c) v(c) = rng.uniform(-range, range);
  return v;
}

/// Dense grid search over [lo,hi]^2 refined by a fine local grid around the
/// coarse winner; maximizes the reference log-likelihood.
inline Vector grid_search_fit_2d(const std::vector<ChoiceTask>& tasks,
                                 const std::vector<SoftTarget>& targets,
                                 double lo = -5.0, double hi = 5.0,
                                 double coarse = 0.05, double fine = 1e-3) {
  const auto objective = [&](double b0, double b1) {
    Vector beta(2);
    beta << b0, b1;
    return loglik_reference(tasks, targets, beta);
  };
  double best0 = lo, best1 = lo, best = -1e300;
  for (double b0 = lo; b0 <= hi + 1e-12; b0 += coarse)
    for (double b1 = lo; b1 <= hi + 1e-12; b1 += coarse)
      if (const double v = objective(b0, b1); v > best) {
        best = v;
        best0 = b0;
        best1 = b1;
      }
  const double r = 1.2 * coarse;
  double fine0 = best0, fine1 = best1;
  for (double b0 = best0 - r; b0 <= best0 + r + 1e-12; b0 += fine)
    for (double b1 = best1 - r; b1 <= best1 + r + 1e-12; b1 += fine)
      if (const double v = objective(b0, b1); v > best) {
        best = v;
        fine0 = b0;
        fine1 = b1;
      }
  Vector out(2);
  out << fine0, fine1;
  return out;
}

/// Spearman rank correlation (no ties expected in inputs).
inline double spearman(const std::vector<double>& a,
                       const std::vector<double>& b) {
  const auto ranks = [](const std::vector<double>& v) {
    std::vector<int> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](int i, int j) { return v[i] < v[j]; });
    std::vector<double> rank(v.size());
    for (std::size_t r = 0; r < idx.size(); ++r) rank[idx[r]] = r;
    return rank;
  };
  const std::vector<double> ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n - 1.0) / 2.0;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (ra[i] - mean) * (rb[i] - mean);
    va += (ra[i] - mean) * (ra[i] - mean);
    vb += (rb[i] - mean) * (rb[i] - mean);
  }
  return cov / std::sqrt(va * vb);
}

/// Monte Carlo estimate of the population dominance matrix
/// Jcheck - Gamma Lambda Gamma' at the true parameters, through the
/// projection route E[ww'] - E[wu'] E[uu']^{-1} E[uw'].
inline Matrix sampled_dominance(const aae::WorldSpec& world,
                                const MnlParams& beta_star,
                                const aae::GModel& g_star, int draws,
                                std::uint64_t seed) {
  auto [primary, unused] = aae::sample_dataset(world, draws, 0, seed);
  const int d = beta_star.d();
  const int q = g_star.param_count();
  Matrix j_check = Matrix::Zero(d, d);
  Matrix cross = Matrix::Zero(d, q);
  Matrix score = Matrix::Zero(q, q);
  for (const ChoiceTask& task : primary.tasks) {
    const Vector sigma = aae::mnl_probs(task, beta_star);
    const int y = *task.human_label;
    Vector w = -(task.features.transpose() * sigma.tail(task.k()));
    if (y >= 1) w += task.features.row(y - 1).transpose();
    const Vector u = aae::g_grad_log(g_star, task, y);
    j_check.noalias() += w * w.transpose();
    cross.noalias() += w * u.transpose();
    score.noalias() += u * u.transpose();
  }
  j_check /= draws;
  cross /= draws;
  score /= draws;
  return j_check - cross * score.inverse() * cross.transpose();
}

}  // namespace testsupport
