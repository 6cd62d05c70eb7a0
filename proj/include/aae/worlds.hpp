#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "aae/choice.hpp"
#include "aae/error.hpp"
#include "aae/gmodel.hpp"

// Fully specified synthetic data-generating processes with oracle access to
// the population quantities the estimators target.

namespace aae {

/// One product, no features: the choice task is k = 1, d = 1 with constant
/// regressor 1, so beta is a scalar intercept. The AI label z in {0,1} has
/// P(z=1) = alpha, and y equals z with probability p.
struct Example1World {
  double alpha = 0.3;
  double p = 0.8;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0 && p > 0.0 && p < 1.0))
      throw ValidationError("Example1World: alpha, p must lie in (0,1)");
  }

  ChoiceTask task() const {
    ChoiceTask t;
    t.features = Matrix::Constant(1, 1, 1.0);
    return t;
  }

  /// P(y = 1) = alpha p + (1-alpha)(1-p).
  double prob_y1() const { return alpha * p + (1.0 - alpha) * (1.0 - p); }

  /// The conditional law is representable exactly in the parametric family:
  /// logistic(theta_check) = 1-p at z=0 and logistic(theta_check+eta) = p
  /// at z=1.
  GModel true_g() const {
    const double logit_p = std::log(p / (1.0 - p));
    ParametricGParams g;
    g.theta_check = Vector::Constant(1, -logit_p);
    g.eta = 2.0 * logit_p;
    return GModel(g);
  }
};

/// Random-utility world with MNL-with-z conditional law: x entries are
/// U[-1,1], the AI label follows P(z=j|x) proportional to exp(zeta'x_(j))
/// over j in {1..k} (z never takes the outside option), and y given (x,z)
/// follows the parametric g with (theta_check, eta).
struct AppendixCWorld {
  Vector theta_check;  // d
  Vector zeta;         // d
  double eta = 1.0;
  int k = 2;

  int d() const { return static_cast<int>(theta_check.size()); }

  void validate() const {
    if (theta_check.size() < 1 || theta_check.size() != zeta.size())
      throw ValidationError(
          "AppendixCWorld: theta_check and zeta must have equal size >= 1");
    if (!theta_check.allFinite() || !zeta.allFinite() || !std::isfinite(eta))
      throw ValidationError("AppendixCWorld: non-finite parameters");
    if (k < 1) throw ValidationError("AppendixCWorld: k must be >= 1");
  }

  GModel true_g() const {
    ParametricGParams g;
    g.theta_check = theta_check;
    g.eta = eta;
    return GModel(g);
  }

  /// P(z = . | x) over {0..k}; index 0 carries probability zero.
  Vector z_probs(const Matrix& features) const {
    Vector util = features * zeta;
    const double shift = util.maxCoeff();
    Vector probs(k + 1);
    probs(0) = 0.0;
    probs.tail(k) = (util.array() - shift).exp();
    probs.tail(k) /= probs.tail(k).sum();
    return probs;
  }
};

/// A world with finitely many feature matrices: every population
/// expectation is an exact finite sum, which makes it the reference point
/// for oracle computations in tests.
struct FiniteSupportWorld {
  std::vector<Matrix> support;                  // each k x d
  Vector x_probs;                               // size = support.size()
  std::vector<Vector> z_probs;                  // per point, over {0..k}
  std::vector<std::vector<Vector>> y_given_xz;  // [point][z] over {0..k}
  std::optional<GModel> true_g;  // set when the y-law is a g-model

  int points() const { return static_cast<int>(support.size()); }
  int k() const {
    return support.empty() ? 0 : static_cast<int>(support.front().rows());
  }
  int d() const {
    return support.empty() ? 0 : static_cast<int>(support.front().cols());
  }

  void validate() const {
    if (support.empty())
      throw ValidationError("FiniteSupportWorld: empty support");
    if (x_probs.size() != points() ||
        std::abs(x_probs.sum() - 1.0) > 1e-12 || x_probs.minCoeff() < 0.0)
      throw ValidationError("FiniteSupportWorld: invalid x probabilities");
    if (static_cast<int>(z_probs.size()) != points() ||
        static_cast<int>(y_given_xz.size()) != points())
      throw ValidationError("FiniteSupportWorld: per-point law size mismatch");
    for (int i = 0; i < points(); ++i) {
      if (support[i].rows() != k() || support[i].cols() != d())
        throw ValidationError("FiniteSupportWorld: ragged support");
      if (z_probs[i].size() != k() + 1 ||
          std::abs(z_probs[i].sum() - 1.0) > 1e-12 ||
          z_probs[i].minCoeff() < 0.0)
        throw ValidationError("FiniteSupportWorld: invalid z law at point " +
                              std::to_string(i));
      if (static_cast<int>(y_given_xz[i].size()) != k() + 1)
        throw ValidationError("FiniteSupportWorld: y law missing a z slice");
      for (int z = 0; z <= k(); ++z) {
        if (z_probs[i](z) == 0.0) continue;  // unreachable slice may be empty
        if (y_given_xz[i][z].size() != k() + 1 ||
            std::abs(y_given_xz[i][z].sum() - 1.0) > 1e-12 ||
            y_given_xz[i][z].minCoeff() < 0.0)
          throw ValidationError(
              "FiniteSupportWorld: invalid y law at point " +
              std::to_string(i) + ", z = " + std::to_string(z));
      }
    }
  }

  ChoiceTask task(int point) const {
    ChoiceTask t;
    t.features = support[point];
    return t;
  }

  /// P(y = . | x) = sum_z P(z|x) P(y|x,z).
  Vector y_marginal(int point) const {
    Vector marginal = Vector::Zero(k() + 1);
    for (int z = 0; z <= k(); ++z)
      if (z_probs[point](z) > 0.0)
        marginal += z_probs[point](z) * y_given_xz[point][z];
    return marginal;
  }
};

using WorldSpec =
    std::variant<Example1World, AppendixCWorld, FiniteSupportWorld>;

/// Exact finite-support representation of the Example-1 world.
inline FiniteSupportWorld to_finite_support(const Example1World& world) {
  world.validate();
  FiniteSupportWorld f;
  f.support = {Matrix::Constant(1, 1, 1.0)};
  f.x_probs = Vector::Constant(1, 1.0);
  Vector z_law(2);
  z_law << 1.0 - world.alpha, world.alpha;
  f.z_probs = {z_law};
  Vector y_given_z0(2), y_given_z1(2);
  y_given_z0 << world.p, 1.0 - world.p;
  y_given_z1 << 1.0 - world.p, world.p;
  f.y_given_xz = {{y_given_z0, y_given_z1}};
  f.true_g = world.true_g();
  f.validate();
  return f;
}

/// Finite-support world whose conditional y-law is a given g-model and
/// whose z-law is MNL(zeta) over {1..k} at each support point.
inline FiniteSupportWorld finite_support_from_g(
    std::vector<Matrix> support, const Vector& x_probs, const Vector& zeta,
    const GModel& g) {
  FiniteSupportWorld f;
  f.support = std::move(support);
  f.x_probs = x_probs;
  const int k = f.k();
  for (int i = 0; i < f.points(); ++i) {
    Vector util = f.support[i] * zeta;
    const double shift = util.maxCoeff();
    Vector pz(k + 1);
    pz(0) = 0.0;
    pz.tail(k) = (util.array() - shift).exp();
    pz.tail(k) /= pz.tail(k).sum();
    f.z_probs.push_back(pz);

    std::vector<Vector> y_slices;
    for (int z = 0; z <= k; ++z) {
      ChoiceTask t = f.task(i);
      t.ai_label = z;
      y_slices.push_back(g_probs(g, t));
    }
    f.y_given_xz.push_back(std::move(y_slices));
  }
  f.true_g = g;
  f.validate();
  return f;
}

}  // namespace aae
