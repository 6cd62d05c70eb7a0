#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "aae/choice.hpp"
#include "aae/error.hpp"
#include "aae/gmodel.hpp"
#include "aae/worlds.hpp"

// Plug-in asymptotic covariance estimation for the two-stage estimator,
// the variance comparison against the primary-only MLE, eigenvalue
// diagnostics of the dominance matrix, and the exact-enumeration population
// counterparts used as oracles on finite-support worlds.
//
// Sandwich pieces (all evaluated at the fitted (beta_hat, theta_hat)):
//   Omega  = E[A(x; beta)]                     curvature
//   Gamma  = E[sum_j (1{j!=0}x_(j) - sum_j' sigma_j' x_(j')) (dg_j/dtheta)']
//   Lambda = E[grad log g_y grad log g_y']^{-1}
//   J      = E[s s'],  s = sum_j (g_j - sigma_j) x_(j)
//   Jcheck = E[w w'],  w = sum_j (1{y=j} - sigma_j) x_(j)
//   Var_AAE = Omega^{-1} J Omega^{-1} / n
//           + Omega^{-1} Gamma Lambda Gamma' Omega^{-1} / m
//   Var_P   = Omega^{-1} Jcheck Omega^{-1} / m

namespace aae {

struct AsymptoticReport {
  Matrix omega_hat;     // d x d
  Matrix gamma_hat;     // d x q
  Matrix lambda_hat;    // q x q
  Matrix j_hat;         // d x d
  Matrix j_check_hat;   // d x d
  Matrix var_aae;       // d x d
  Matrix var_primary;   // d x d
  Vector dominance_eigs;  // ascending eigenvalues of sym(Jcheck - G L G')
  double rho = 0.0;       // realized n/m
  std::size_t m = 0;
  std::size_t n = 0;
  int q = 0;
};

namespace detail {

inline Matrix symmetrize(const Matrix& m) {
  return 0.5 * (m + m.transpose());
}

/// Inverse of a symmetric matrix through its eigendecomposition, refusing
/// condition numbers above `cond_limit` so instability surfaces as an error
/// instead of garbage.
inline Matrix guarded_inverse(const Matrix& m, const std::string& name,
                              double cond_limit = 1e12) {
  if (m.rows() == 0) return m;  // zero-parameter model
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(m));
  const Vector& values = eig.eigenvalues();
  const double max_abs = values.cwiseAbs().maxCoeff();
  const double min_abs = values.cwiseAbs().minCoeff();
  if (!(max_abs > 0.0) || min_abs <= 0.0 || max_abs / min_abs > cond_limit)
    throw NumericalError(
        name + " is numerically singular (condition number " +
        std::to_string(min_abs > 0.0 ? max_abs / min_abs
                                     : std::numeric_limits<double>::infinity()) +
        " exceeds 1e12)");
  return eig.eigenvectors() * values.cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose();
}

inline Vector sorted_eigenvalues(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(m));
  return eig.eigenvalues();  // ascending
}

/// sum over j in K+ of (1{j!=0} x_(j) - sum_j' sigma_j' x_(j')) row_j(G)',
/// the per-observation integrand of Gamma.
inline Matrix gamma_contribution(const ChoiceTask& task, const Vector& sigma,
                                 const Matrix& g_grads) {
  const int k = task.k();
  const Vector mean_x = task.features.transpose() * sigma.tail(k);
  Matrix contrib = -mean_x * g_grads.row(0);
  for (int j = 1; j <= k; ++j) {
    const Vector cj = task.features.row(j - 1).transpose() - mean_x;
    contrib.noalias() += cj * g_grads.row(j);
  }
  return contrib;
}

}  // namespace detail

/// Plug-in covariance estimation at a fitted (beta_hat, g_model). Omega,
/// Gamma and J average over the auxiliary sample (the Step-2 objective is
/// an auxiliary-sample average); Lambda and Jcheck average over the primary
/// sample, which carries the human labels.
inline AsymptoticReport estimate_asymptotics(const Dataset& primary,
                                             const Dataset& auxiliary,
                                             const MnlParams& beta_hat,
                                             const GModel& g_model) {
  primary.validate();
  auxiliary.validate();
  beta_hat.validate();
  g_model.validate();
  if (primary.kind != DatasetKind::Primary ||
      auxiliary.kind != DatasetKind::Auxiliary)
    throw ValidationError("estimate_asymptotics: dataset kinds are swapped");
  if (primary.size() < 2 || auxiliary.size() < 2)
    throw ValidationError("estimate_asymptotics: need m, n >= 2");
  if (primary.k() != auxiliary.k() || primary.d() != auxiliary.d())
    throw ValidationError("estimate_asymptotics: dimension mismatch");
  if (primary.d() != beta_hat.d())
    throw ValidationError("estimate_asymptotics: beta dimension mismatch");

  const int d = primary.d();
  const int k = primary.k();
  const int q = g_model.param_count();
  const double m = static_cast<double>(primary.size());
  const double n = static_cast<double>(auxiliary.size());

  AsymptoticReport report;
  report.m = primary.size();
  report.n = auxiliary.size();
  report.q = q;
  report.rho = n / m;

  Matrix omega = Matrix::Zero(d, d);
  Matrix gamma = Matrix::Zero(d, q);
  Matrix j_mat = Matrix::Zero(d, d);
  for (const ChoiceTask& task : auxiliary.tasks) {
    const Vector sigma = mnl_probs(task, beta_hat);
    const Vector g = g_probs(g_model, task);
    const Matrix g_grads = g_grad_all(g_model, task);

    omega += curvature_matrix(task, beta_hat);
    gamma += detail::gamma_contribution(task, sigma, g_grads);
    const Vector s =
        task.features.transpose() * (g.tail(k) - sigma.tail(k));
    j_mat.noalias() += s * s.transpose();
  }
  report.omega_hat = detail::symmetrize(omega / n);
  report.gamma_hat = gamma / n;
  report.j_hat = detail::symmetrize(j_mat / n);

  Matrix score_outer = Matrix::Zero(q, q);
  Matrix j_check = Matrix::Zero(d, d);
  for (const ChoiceTask& task : primary.tasks) {
    const Vector sigma = mnl_probs(task, beta_hat);
    const int y = *task.human_label;
    Vector w = -(task.features.transpose() * sigma.tail(k));
    if (y >= 1) w += task.features.row(y - 1).transpose();
    j_check.noalias() += w * w.transpose();
    if (q > 0) {
      const Vector u = g_grad_log(g_model, task, y);
      score_outer.noalias() += u * u.transpose();
    }
  }
  report.j_check_hat = detail::symmetrize(j_check / m);
  report.lambda_hat =
      detail::guarded_inverse(score_outer / m, "Lambda (g-score outer product)");

  const Matrix omega_inv =
      detail::guarded_inverse(report.omega_hat, "Omega (mean curvature)");
  const Matrix glg =
      report.gamma_hat * report.lambda_hat * report.gamma_hat.transpose();
  report.var_aae =
      detail::symmetrize(omega_inv * report.j_hat * omega_inv / n +
                         omega_inv * glg * omega_inv / m);
  report.var_primary =
      detail::symmetrize(omega_inv * report.j_check_hat * omega_inv / m);
  report.dominance_eigs =
      detail::sorted_eigenvalues(report.j_check_hat - glg);
  return report;
}

struct DominanceCheck {
  Vector eigenvalues;  // ascending
  bool dominant = false;
  double tolerance = 1e-8;
};

/// Strict-dominance diagnostic: Jcheck - Gamma Lambda Gamma' positive
/// definite certifies that the augmented estimator's variance beats the
/// primary-only variance for all sufficiently large n.
inline DominanceCheck dominance_check(const AsymptoticReport& report,
                                      double tolerance = 1e-8) {
  DominanceCheck check;
  check.eigenvalues = report.dominance_eigs;
  check.tolerance = tolerance;
  check.dominant = check.eigenvalues.size() > 0 &&
                   check.eigenvalues.minCoeff() > tolerance;
  return check;
}

// ---------------------------------------------------------------------------
// Exact population counterparts on finite-support worlds. These enumerate
// (x, z, y) rather than averaging a sample, and serve as independent
// oracles for the plug-in estimates above.
// ---------------------------------------------------------------------------

struct PopulationMoments {
  Matrix omega;        // E[A(x; beta*)]
  Matrix gamma_def;    // Gamma by its definition
  Matrix gamma_wu;     // Gamma as E[w u']
  Matrix score_outer;  // E[u u'] = Lambda^{-1}
  Matrix j;            // E[s s']
  Matrix j_check;      // E[w w']
};

/// Enumerate every (support point, z, y) cell of the world's joint law.
inline PopulationMoments population_moments(const FiniteSupportWorld& world,
                                            const MnlParams& beta_star,
                                            const GModel& g_star) {
  world.validate();
  beta_star.validate();
  const int d = world.d();
  const int k = world.k();
  const int q = g_star.param_count();

  PopulationMoments mom;
  mom.omega = Matrix::Zero(d, d);
  mom.gamma_def = Matrix::Zero(d, q);
  mom.gamma_wu = Matrix::Zero(d, q);
  mom.score_outer = Matrix::Zero(q, q);
  mom.j = Matrix::Zero(d, d);
  mom.j_check = Matrix::Zero(d, d);

  for (int i = 0; i < world.points(); ++i) {
    const double px = world.x_probs(i);
    if (px == 0.0) continue;
    ChoiceTask task = world.task(i);
    const Matrix& x = task.features;
    const Vector sigma = mnl_probs(task, beta_star);
    mom.omega += px * curvature_matrix(task, beta_star);
    const Vector mean_x = x.transpose() * sigma.tail(k);

    for (int z = 0; z <= k; ++z) {
      const double pz = world.z_probs[i](z);
      if (pz == 0.0) continue;
      task.ai_label = z;
      const Vector g = g_probs(g_star, task);
      const Matrix g_grads = g_grad_all(g_star, task);
      mom.gamma_def += px * pz * detail::gamma_contribution(task, sigma, g_grads);
      const Vector s = x.transpose() * (g.tail(k) - sigma.tail(k));
      mom.j.noalias() += px * pz * (s * s.transpose());

      for (int y = 0; y <= k; ++y) {
        const double py = world.y_given_xz[i][z](y);
        if (py == 0.0) continue;
        const double weight = px * pz * py;
        Vector w = -mean_x;
        if (y >= 1) w += x.row(y - 1).transpose();
        mom.j_check.noalias() += weight * (w * w.transpose());
        if (q > 0) {
          const Vector u = g_grads.row(y).transpose() / g(y);
          mom.gamma_wu.noalias() += weight * (w * u.transpose());
          mom.score_outer.noalias() += weight * (u * u.transpose());
        }
      }
    }
  }
  return mom;
}

/// Population dominance matrix Jcheck - Gamma Lambda Gamma' from exact
/// moments, computed through the projection route E[wu'] E[uu']^{-1} E[uw'].
inline Matrix dominance_matrix(const PopulationMoments& mom) {
  if (mom.score_outer.rows() == 0) return detail::symmetrize(mom.j_check);
  const Matrix lambda =
      detail::guarded_inverse(mom.score_outer, "population E[uu']");
  return detail::symmetrize(mom.j_check -
                            mom.gamma_wu * lambda * mom.gamma_wu.transpose());
}

struct ResidualDecomposition {
  Matrix total;             // E[r r'], r = sum_j (sigma_j - g_j) x_(j)
  Matrix misspecification;  // residual of the MNL fit to P(y|x)
  Matrix z_information;     // covariance of sum_j g_j x_(j) around P(y|x)
};

/// Exact decomposition of the projection error on a finite-support world:
/// E[rr'] splits into a model-misspecification term and a z-information
/// term, and equals Jcheck - Gamma Lambda Gamma' when g_star is the true
/// conditional law.
inline ResidualDecomposition residual_decomposition(
    const FiniteSupportWorld& world, const MnlParams& beta_star,
    const GModel& g_star) {
  world.validate();
  beta_star.validate();
  const int d = world.d();
  const int k = world.k();

  ResidualDecomposition dec;
  dec.total = Matrix::Zero(d, d);
  dec.misspecification = Matrix::Zero(d, d);
  dec.z_information = Matrix::Zero(d, d);

  for (int i = 0; i < world.points(); ++i) {
    const double px = world.x_probs(i);
    if (px == 0.0) continue;
    ChoiceTask task = world.task(i);
    const Matrix& x = task.features;
    const Vector sigma = mnl_probs(task, beta_star);
    const Vector p_y = world.y_marginal(i);

    const Vector mis = x.transpose() * (sigma.tail(k) - p_y.tail(k));
    dec.misspecification.noalias() += px * (mis * mis.transpose());

    for (int z = 0; z <= k; ++z) {
      const double pz = world.z_probs[i](z);
      if (pz == 0.0) continue;
      task.ai_label = z;
      const Vector g = g_probs(g_star, task);
      const Vector r = x.transpose() * (sigma.tail(k) - g.tail(k));
      dec.total.noalias() += px * pz * (r * r.transpose());
      const Vector zi = x.transpose() * (g.tail(k) - p_y.tail(k));
      dec.z_information.noalias() += px * pz * (zi * zi.transpose());
    }
  }
  dec.total = detail::symmetrize(dec.total);
  dec.misspecification = detail::symmetrize(dec.misspecification);
  dec.z_information = detail::symmetrize(dec.z_information);
  return dec;
}

}  // namespace aae
