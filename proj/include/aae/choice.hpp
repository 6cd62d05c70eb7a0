#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "aae/error.hpp"

// Multinomial-logit core: choice-task types, soft-target log-likelihood,
// analytic score/curvature, and the damped-Newton fitter shared by every
// estimator in the library.
//
// Conventions: a task offers k alternatives plus the outside option
// (index 0, fixed utility 0). Alternative j >= 1 has feature row x_(j) and
// utility x_(j)'beta, so choice probabilities are
//   sigma_j = exp(x_(j)'beta) / (1 + sum_l exp(x_(l)'beta)).

namespace aae {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One respondent decision: k alternatives described by a k x d feature
/// matrix, an optional human label y and an optional AI label z, both in
/// {0..k} where 0 is the outside option.
struct ChoiceTask {
  Matrix features;                 // k x d, row j-1 = x_(j)
  std::optional<int> human_label;  // y
  std::optional<int> ai_label;     // z

  int k() const { return static_cast<int>(features.rows()); }
  int d() const { return static_cast<int>(features.cols()); }

  void validate() const {
    if (features.rows() < 1 || features.cols() < 1)
      throw ValidationError("ChoiceTask: requires k >= 1 and d >= 1");
    if (!features.allFinite())
      throw ValidationError("ChoiceTask: non-finite feature entry");
    for (const auto& label : {human_label, ai_label}) {
      if (label && (*label < 0 || *label > k()))
        throw ValidationError("ChoiceTask: label " + std::to_string(*label) +
                              " outside {0.." + std::to_string(k()) + "}");
    }
  }
};

enum class DatasetKind { Primary, Auxiliary };

/// Ordered task collection. Primary datasets carry both labels on every
/// task; auxiliary datasets carry only the AI label.
struct Dataset {
  DatasetKind kind = DatasetKind::Primary;
  std::vector<ChoiceTask> tasks;

  std::size_t size() const { return tasks.size(); }
  int k() const { return tasks.empty() ? 0 : tasks.front().k(); }
  int d() const { return tasks.empty() ? 0 : tasks.front().d(); }

  void validate() const {
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const ChoiceTask& t = tasks[i];
      t.validate();
      if (t.k() != k() || t.d() != d())
        throw ValidationError("Dataset: task " + std::to_string(i) +
                              " has inconsistent dimensions");
      if (!t.ai_label)
        throw ValidationError("Dataset: task " + std::to_string(i) +
                              " is missing the AI label");
      if (kind == DatasetKind::Primary && !t.human_label)
        throw ValidationError("Dataset: primary task " + std::to_string(i) +
                              " is missing the human label");
      if (kind == DatasetKind::Auxiliary && t.human_label)
        throw ValidationError("Dataset: auxiliary task " + std::to_string(i) +
                              " must not carry a human label");
    }
  }
};

/// Part-worth coefficient vector beta.
struct MnlParams {
  Vector beta;

  int d() const { return static_cast<int>(beta.size()); }

  void validate() const {
    if (beta.size() < 1) throw ValidationError("MnlParams: empty beta");
    if (!beta.allFinite())
      throw ValidationError("MnlParams: non-finite coefficient");
  }
};

/// Probability weights over {0..k} used as the target of the weighted
/// log-likelihood. A hard label is the one-hot special case.
struct SoftTarget {
  Vector weights;  // size k+1, index 0 = outside option

  static SoftTarget one_hot(int label, int k) {
    SoftTarget t;
    t.weights = Vector::Zero(k + 1);
    t.weights(label) = 1.0;
    return t;
  }

  void validate() const {
    if (weights.size() < 2)
      throw ValidationError("SoftTarget: needs at least two alternatives");
    if (!weights.allFinite() || weights.minCoeff() < 0.0)
      throw ValidationError("SoftTarget: weights must be finite and >= 0");
    if (std::abs(weights.sum() - 1.0) > 1e-12)
      throw ValidationError("SoftTarget: weights must sum to 1 (tol 1e-12)");
  }
};

namespace detail {

inline void check_dims(const ChoiceTask& task, const MnlParams& params) {
  task.validate();
  params.validate();
  if (task.d() != params.d())
    throw ValidationError("dimension mismatch: task has d=" +
                          std::to_string(task.d()) + ", params have d=" +
                          std::to_string(params.d()));
}

/// Utilities (0, x_(1)'beta, ..., x_(k)'beta) written into `util`.
inline void utilities(const ChoiceTask& task, const Vector& beta,
                      Vector& util) {
  util.resize(task.k() + 1);
  util(0) = 0.0;
  util.tail(task.k()).noalias() = task.features * beta;
}

/// Softmax of `util` with max-shift; exact in exact arithmetic, safe for
/// |utilities| far beyond exp overflow.
inline void softmax_shifted(const Vector& util, Vector& probs) {
  const double shift = util.maxCoeff();
  probs = (util.array() - shift).exp();
  probs /= probs.sum();
}

/// log sum_j exp(util_j), max-shifted.
inline double log_sum_exp(const Vector& util) {
  const double shift = util.maxCoeff();
  return shift + std::log((util.array() - shift).exp().sum());
}

}  // namespace detail

/// Choice probabilities (sigma_0, ..., sigma_k) under `params`.
inline Vector mnl_probs(const ChoiceTask& task, const MnlParams& params) {
  detail::check_dims(task, params);
  Vector util, probs;
  detail::utilities(task, params.beta, util);
  detail::softmax_shifted(util, probs);
  return probs;
}

/// Mean weighted log-likelihood
///   (1/N) sum_i sum_j alpha_{i,j} log sigma_j(x_i; beta)
/// over parallel task/target spans. Optional per-task weights rescale the
/// mean (used for exact population objectives over finite supports).
inline double soft_loglik(std::span<const ChoiceTask> tasks,
                          std::span<const SoftTarget> targets,
                          const MnlParams& params,
                          std::span<const double> weights = {}) {
  if (tasks.empty()) throw ValidationError("soft_loglik: empty task list");
  if (tasks.size() != targets.size())
    throw ValidationError("soft_loglik: task/target count mismatch");
  if (!weights.empty() && weights.size() != tasks.size())
    throw ValidationError("soft_loglik: task/weight count mismatch");
  params.validate();

  double total = 0.0;
  double weight_sum = 0.0;
  Vector util;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    detail::check_dims(tasks[i], params);
    targets[i].validate();
    if (targets[i].weights.size() != tasks[i].k() + 1)
      throw ValidationError("soft_loglik: target size mismatch at task " +
                            std::to_string(i));
    detail::utilities(tasks[i], params.beta, util);
    const double lse = detail::log_sum_exp(util);
    // sum_j alpha_j (u_j - lse) = alpha'u - lse since alpha sums to 1
    const double ll = targets[i].weights.dot(util) - lse;
    const double w = weights.empty() ? 1.0 : weights[i];
    total += w * ll;
    weight_sum += w;
  }
  return total / weight_sum;
}

/// Gradient of the weighted log-likelihood for one task:
///   sum_{j=1..k} (alpha_j - sigma_j(x; beta)) x_(j).
inline Vector soft_score(const ChoiceTask& task, const SoftTarget& target,
                         const MnlParams& params) {
  detail::check_dims(task, params);
  target.validate();
  if (target.weights.size() != task.k() + 1)
    throw ValidationError("soft_score: target size mismatch");
  Vector util, probs;
  detail::utilities(task, params.beta, util);
  detail::softmax_shifted(util, probs);
  const Vector diff =
      target.weights.tail(task.k()) - probs.tail(task.k());
  return task.features.transpose() * diff;
}

/// Curvature A(x; beta) = sum_j sigma_j (x_(j)x_(j)' -
/// sum_{j'} sigma_{j'} x_(j)x_(j')'), returned symmetrized. Equals the
/// negative Hessian of the weighted log-likelihood for any target, and is
/// PSD (it is the covariance of the chosen alternative's feature row).
inline Matrix curvature_matrix(const ChoiceTask& task,
                               const MnlParams& params) {
  detail::check_dims(task, params);
  Vector util, probs;
  detail::utilities(task, params.beta, util);
  detail::softmax_shifted(util, probs);
  const auto s = probs.tail(task.k());
  const Vector mean_x = task.features.transpose() * s;
  Matrix a = task.features.transpose() * s.asDiagonal() * task.features;
  a.noalias() -= mean_x * mean_x.transpose();
  return 0.5 * (a + a.transpose());
}

struct FitOptions {
  double grad_tol = 1e-8;     // infinity norm of the mean score
  int max_iter = 200;
  double beta_cap = 1e3;      // |beta|_inf beyond this means separation
  bool ridge_fallback = false;
  double ridge_lambda = 1e-6;
  double rank_tol = 1e-12;    // relative eigenvalue cutoff for identification
};

struct FitInfo {
  int iterations = 0;
  double grad_norm = 0.0;
  bool used_ridge = false;
};

namespace detail {

struct NewtonState {
  double loglik = 0.0;
  Vector grad;
  Matrix hess;  // positive curvature: mean A (+ ridge)
};

/// One pass over the data: mean log-likelihood, score, and curvature.
inline void evaluate_objective(std::span<const ChoiceTask> tasks,
                               std::span<const SoftTarget> targets,
                               std::span<const double> weights,
                               const Vector& beta, double ridge,
                               NewtonState& state) {
  const int d = static_cast<int>(beta.size());
  const int k = tasks.front().k();
  state.loglik = 0.0;
  state.grad = Vector::Zero(d);
  state.hess = Matrix::Zero(d, d);

  double weight_sum = 0.0;
  Vector util(k + 1), probs(k + 1), diff(k), mean_x(d);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const Matrix& x = tasks[i].features;
    utilities(tasks[i], beta, util);
    softmax_shifted(util, probs);
    const double lse = log_sum_exp(util);
    const double w = weights.empty() ? 1.0 : weights[i];
    weight_sum += w;

    state.loglik += w * (targets[i].weights.dot(util) - lse);
    diff = targets[i].weights.tail(k) - probs.tail(k);
    state.grad.noalias() += w * (x.transpose() * diff);
    mean_x.noalias() = x.transpose() * probs.tail(k);
    state.hess.noalias() += w * (x.transpose() * probs.tail(k).asDiagonal() * x);
    state.hess.noalias() -= w * (mean_x * mean_x.transpose());
  }
  state.loglik /= weight_sum;
  state.grad /= weight_sum;
  state.hess /= weight_sum;

  if (ridge > 0.0) {
    state.loglik -= ridge * beta.squaredNorm();
    state.grad -= 2.0 * ridge * beta;
    state.hess += 2.0 * ridge * Matrix::Identity(d, d);
  }
}

/// Same objective as evaluate_objective without derivatives; inputs are
/// assumed already validated.
inline double penalized_loglik(std::span<const ChoiceTask> tasks,
                               std::span<const SoftTarget> targets,
                               std::span<const double> weights,
                               const Vector& beta, double ridge) {
  double total = 0.0;
  double weight_sum = 0.0;
  Vector util;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    utilities(tasks[i], beta, util);
    const double w = weights.empty() ? 1.0 : weights[i];
    total += w * (targets[i].weights.dot(util) - log_sum_exp(util));
    weight_sum += w;
  }
  double value = total / weight_sum;
  if (ridge > 0.0) value -= ridge * beta.squaredNorm();
  return value;
}

inline void check_identification(std::span<const ChoiceTask> tasks,
                                 double rank_tol) {
  const int d = tasks.front().d();
  Matrix moment = Matrix::Zero(d, d);
  for (const ChoiceTask& t : tasks)
    moment.noalias() += t.features.transpose() * t.features;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(moment);
  const double max_eig = eig.eigenvalues().maxCoeff();
  if (max_eig <= 0.0 || eig.eigenvalues().minCoeff() < rank_tol * max_eig)
    throw ValidationError(
        "fit_mnl: design is rank-deficient (identification failure); "
        "stacked second-moment matrix is numerically singular");
}

inline MnlParams newton_solve(std::span<const ChoiceTask> tasks,
                              std::span<const SoftTarget> targets,
                              std::span<const double> weights,
                              const FitOptions& opts, double ridge,
                              FitInfo* info) {
  const int d = tasks.front().d();
  Vector beta = Vector::Zero(d);
  NewtonState state;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    evaluate_objective(tasks, targets, weights, beta, ridge, state);
    const double grad_norm = state.grad.lpNorm<Eigen::Infinity>();
    if (grad_norm < opts.grad_tol) {
      if (info) {
        info->iterations = iter;
        info->grad_norm = grad_norm;
        info->used_ridge = ridge > 0.0;
      }
      return MnlParams{beta};
    }

    Eigen::LDLT<Matrix> ldlt(state.hess);
    Vector step = ldlt.solve(state.grad);
    if (ldlt.info() != Eigen::Success || !step.allFinite())
      throw NumericalError("fit_mnl: Newton system is singular");

    // Step-halving line search on the ascent direction.
    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h < 60; ++h) {
      const Vector candidate = beta + t * step;
      const double value =
          penalized_loglik(tasks, targets, weights, candidate, ridge);
      if (value > state.loglik - 1e-14 * std::abs(state.loglik)) {
        beta = candidate;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted)
      throw NumericalError(
          "fit_mnl: line search failed to improve the objective");
    if (beta.lpNorm<Eigen::Infinity>() > opts.beta_cap)
      throw NumericalError(
          "fit_mnl: separation/divergence detected (|beta|_inf > " +
          std::to_string(opts.beta_cap) + ")");
  }
  throw NumericalError("fit_mnl: no convergence within " +
                       std::to_string(opts.max_iter) + " iterations");
}

}  // namespace detail

/// Maximize the weighted log-likelihood by damped Newton with step-halving,
/// starting from beta = 0. Throws ValidationError on identification failure
/// and NumericalError on separation or non-convergence; with
/// `ridge_fallback` a diverging fit is retried once under an L2 penalty.
inline MnlParams fit_mnl(std::span<const ChoiceTask> tasks,
                         std::span<const SoftTarget> targets,
                         const FitOptions& opts = {}, FitInfo* info = nullptr,
                         std::span<const double> weights = {}) {
  if (tasks.empty()) throw ValidationError("fit_mnl: empty task list");
  if (tasks.size() != targets.size())
    throw ValidationError("fit_mnl: task/target count mismatch");
  if (!weights.empty() && weights.size() != tasks.size())
    throw ValidationError("fit_mnl: task/weight count mismatch");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    tasks[i].validate();
    targets[i].validate();
    if (tasks[i].d() != tasks.front().d() || tasks[i].k() != tasks.front().k())
      throw ValidationError("fit_mnl: inconsistent task dimensions");
    if (targets[i].weights.size() != tasks[i].k() + 1)
      throw ValidationError("fit_mnl: target size mismatch at task " +
                            std::to_string(i));
  }
  detail::check_identification(tasks, opts.rank_tol);

  try {
    return detail::newton_solve(tasks, targets, weights, opts, 0.0, info);
  } catch (const NumericalError&) {
    if (!opts.ridge_fallback) throw;
    return detail::newton_solve(tasks, targets, weights, opts,
                                opts.ridge_lambda, info);
  }
}

/// Convenience overload for (task, target) pair lists.
inline MnlParams fit_mnl(
    const std::vector<std::pair<ChoiceTask, SoftTarget>>& data,
    const FitOptions& opts = {}, FitInfo* info = nullptr) {
  std::vector<ChoiceTask> tasks;
  std::vector<SoftTarget> targets;
  tasks.reserve(data.size());
  targets.reserve(data.size());
  for (const auto& [task, target] : data) {
    tasks.push_back(task);
    targets.push_back(target);
  }
  return fit_mnl(tasks, targets, opts, info);
}

}  // namespace aae
