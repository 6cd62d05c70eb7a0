#pragma once

#include <cstdint>
#include <iostream>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "aae/choice.hpp"
#include "aae/error.hpp"
#include "aae/rng.hpp"

// Conditional-label models g_j(x, z; theta) approximating P(y = j | x, z).
// Two families: an MNL with an AI-label alignment coefficient eta, and a
// small feed-forward network. Both expose probabilities and analytic
// parameter gradients; the gradients feed the asymptotic covariance
// plug-ins, so a single interface serves inference for either family.

namespace aae {

/// MNL-with-z family:
///   g_j(x, z) = exp(theta_check'x_(j) + eta 1{z=j})
///             / (1 + sum_l exp(theta_check'x_(l) + eta 1{z=l})).
/// The outside option keeps utility 0, so z = 0 boosts no alternative.
struct ParametricGParams {
  Vector theta_check;  // d
  double eta = 0.0;

  int param_count() const { return static_cast<int>(theta_check.size()) + 1; }

  void validate() const {
    if (theta_check.size() < 1 || !theta_check.allFinite() ||
        !std::isfinite(eta))
      throw ValidationError("ParametricGParams: non-finite entries");
  }
};

inline constexpr int kMlpHidden1 = 10;
inline constexpr int kMlpHidden2 = 5;

/// Feed-forward network: input (k*d flattened features, one-hot z over
/// {0..k}) -> 10 -> 5 -> (k+1) softmax, sigmoid hidden activations.
struct MlpGParams {
  Matrix w1, w2, w3;
  Vector b1, b2, b3;
  int k = 0, d = 0;

  int input_dim() const { return k * d + k + 1; }
  int output_dim() const { return k + 1; }

  int param_count() const {
    return static_cast<int>(w1.size() + b1.size() + w2.size() + b2.size() +
                            w3.size() + b3.size());
  }

  static MlpGParams zeros(int k, int d) {
    MlpGParams p;
    p.k = k;
    p.d = d;
    p.w1 = Matrix::Zero(kMlpHidden1, p.input_dim());
    p.b1 = Vector::Zero(kMlpHidden1);
    p.w2 = Matrix::Zero(kMlpHidden2, kMlpHidden1);
    p.b2 = Vector::Zero(kMlpHidden2);
    p.w3 = Matrix::Zero(p.output_dim(), kMlpHidden2);
    p.b3 = Vector::Zero(p.output_dim());
    return p;
  }

  static MlpGParams random_init(int k, int d, std::uint64_t seed,
                                double range = 0.5) {
    MlpGParams p = zeros(k, d);
    Rng rng(seed);
    Vector flat = p.flatten();
    for (int i = 0; i < flat.size(); ++i) flat(i) = rng.uniform(-range, range);
    p.set_from(flat);
    return p;
  }

  /// Row-major flattening [w1, b1, w2, b2, w3, b3]; fixes the parameter
  /// order used by gradients, the optimizer, and finite-difference checks.
  Vector flatten() const {
    Vector flat(param_count());
    int pos = 0;
    for (const Matrix* w : {&w1, &w2, &w3}) {
      const Vector* b = (w == &w1) ? &b1 : (w == &w2) ? &b2 : &b3;
      for (int r = 0; r < w->rows(); ++r)
        for (int c = 0; c < w->cols(); ++c) flat(pos++) = (*w)(r, c);
      for (int r = 0; r < b->size(); ++r) flat(pos++) = (*b)(r);
    }
    return flat;
  }

  void set_from(const Vector& flat) {
    if (flat.size() != param_count())
      throw ValidationError("MlpGParams: flat parameter size mismatch");
    int pos = 0;
    for (Matrix* w : {&w1, &w2, &w3}) {
      Vector* b = (w == &w1) ? &b1 : (w == &w2) ? &b2 : &b3;
      for (int r = 0; r < w->rows(); ++r)
        for (int c = 0; c < w->cols(); ++c) (*w)(r, c) = flat(pos++);
      for (int r = 0; r < b->size(); ++r) (*b)(r) = flat(pos++);
    }
  }

  void validate() const {
    if (k < 1 || d < 1) throw ValidationError("MlpGParams: invalid shape");
    if (w1.rows() != kMlpHidden1 || w1.cols() != input_dim() ||
        w2.rows() != kMlpHidden2 || w2.cols() != kMlpHidden1 ||
        w3.rows() != output_dim() || w3.cols() != kMlpHidden2 ||
        b1.size() != kMlpHidden1 || b2.size() != kMlpHidden2 ||
        b3.size() != output_dim())
      throw ValidationError("MlpGParams: inconsistent layer shapes");
    if (!flatten().allFinite())
      throw ValidationError("MlpGParams: non-finite weights");
  }
};

/// Conditional-label model. A frozen model keeps its probabilities but
/// reports zero parameters, so inference treats it as a known function
/// (its Gamma contribution vanishes).
class GModel {
public:
  GModel() = default;
  explicit GModel(ParametricGParams p) : model_(std::move(p)) {}
  explicit GModel(MlpGParams p) : model_(std::move(p)) {}

  bool is_parametric() const {
    return std::holds_alternative<ParametricGParams>(model_);
  }
  const ParametricGParams& parametric() const {
    return std::get<ParametricGParams>(model_);
  }
  const MlpGParams& mlp() const { return std::get<MlpGParams>(model_); }

  bool frozen() const { return frozen_; }
  GModel freeze() const {
    GModel copy = *this;
    copy.frozen_ = true;
    return copy;
  }

  int param_count() const {
    if (frozen_) return 0;
    return is_parametric() ? parametric().param_count()
                           : mlp().param_count();
  }

  Vector flat_params() const {
    if (is_parametric()) {
      const auto& p = parametric();
      Vector flat(p.param_count());
      flat.head(p.theta_check.size()) = p.theta_check;
      flat(flat.size() - 1) = p.eta;
      return flat;
    }
    return mlp().flatten();
  }

  GModel with_flat_params(const Vector& flat) const {
    GModel copy = *this;
    if (is_parametric()) {
      auto& p = std::get<ParametricGParams>(copy.model_);
      if (flat.size() != p.param_count())
        throw ValidationError("GModel: flat parameter size mismatch");
      p.theta_check = flat.head(flat.size() - 1);
      p.eta = flat(flat.size() - 1);
    } else {
      std::get<MlpGParams>(copy.model_).set_from(flat);
    }
    return copy;
  }

  void validate() const {
    if (is_parametric())
      parametric().validate();
    else
      mlp().validate();
  }

private:
  std::variant<ParametricGParams, MlpGParams> model_ =
      ParametricGParams{Vector::Zero(1), 0.0};
  bool frozen_ = false;
};

namespace detail {

inline void require_ai_label(const ChoiceTask& task) {
  task.validate();
  if (!task.ai_label)
    throw ValidationError("g-model: task is missing the AI label z");
}

/// Utilities of the parametric family: u_0 = 0,
/// u_j = theta_check'x_(j) + eta 1{z=j}.
inline void parametric_utilities(const ParametricGParams& p,
                                 const ChoiceTask& task, Vector& util) {
  if (task.d() != p.theta_check.size())
    throw ValidationError("g-model: dimension mismatch");
  util.resize(task.k() + 1);
  util(0) = 0.0;
  util.tail(task.k()).noalias() = task.features * p.theta_check;
  const int z = *task.ai_label;
  if (z >= 1) util(z) += p.eta;
}

struct MlpForward {
  Vector input, h1, h2, probs;
};

inline Vector mlp_input(const MlpGParams& p, const ChoiceTask& task) {
  if (task.k() != p.k || task.d() != p.d)
    throw ValidationError("g-model: MLP shape does not match task");
  Vector v(p.input_dim());
  int pos = 0;
  for (int j = 0; j < p.k; ++j)
    for (int c = 0; c < p.d; ++c) v(pos++) = task.features(j, c);
  v.tail(p.k + 1).setZero();
  v(pos + *task.ai_label) = 1.0;
  return v;
}

inline MlpForward mlp_forward(const MlpGParams& p, const ChoiceTask& task) {
  MlpForward f;
  f.input = mlp_input(p, task);
  f.h1 = ((p.w1 * f.input + p.b1).array() * -1.0).exp();
  f.h1 = (1.0 + f.h1.array()).inverse();
  f.h2 = ((p.w2 * f.h1 + p.b2).array() * -1.0).exp();
  f.h2 = (1.0 + f.h2.array()).inverse();
  Vector logits = p.w3 * f.h2 + p.b3;
  softmax_shifted(logits, f.probs);
  return f;
}

/// Backpropagate a gradient at the output logits into the flat parameter
/// vector. `dloss_dlogits` is dL/da for the softmax logits a.
inline Vector mlp_param_grad(const MlpGParams& p, const MlpForward& f,
                             const Vector& dloss_dlogits) {
  const Vector d3 = dloss_dlogits;
  const Vector dh2 = p.w3.transpose() * d3;
  const Vector d2 =
      dh2.array() * f.h2.array() * (1.0 - f.h2.array());
  const Vector dh1 = p.w2.transpose() * d2;
  const Vector d1 =
      dh1.array() * f.h1.array() * (1.0 - f.h1.array());

  Vector grad(p.param_count());
  int pos = 0;
  auto put_layer = [&](const Vector& delta, const Vector& activation) {
    for (int r = 0; r < delta.size(); ++r)
      for (int c = 0; c < activation.size(); ++c)
        grad(pos++) = delta(r) * activation(c);
    for (int r = 0; r < delta.size(); ++r) grad(pos++) = delta(r);
  };
  put_layer(d1, f.input);
  put_layer(d2, f.h1);
  put_layer(d3, f.h2);
  return grad;
}

}  // namespace detail

/// Conditional label probabilities (g_0, ..., g_k) for a task that carries
/// an AI label.
inline Vector g_probs(const GModel& model, const ChoiceTask& task) {
  detail::require_ai_label(task);
  model.validate();
  if (model.is_parametric()) {
    Vector util, probs;
    detail::parametric_utilities(model.parametric(), task, util);
    detail::softmax_shifted(util, probs);
    return probs;
  }
  return detail::mlp_forward(model.mlp(), task).probs;
}

/// All parameter gradients at once: a (k+1) x q matrix with row j equal to
/// (d g_j / d theta)'. Frozen models yield q = 0.
inline Matrix g_grad_all(const GModel& model, const ChoiceTask& task) {
  detail::require_ai_label(task);
  model.validate();
  if (model.frozen()) return Matrix::Zero(task.k() + 1, 0);

  if (model.is_parametric()) {
    const auto& p = model.parametric();
    Vector util, probs;
    detail::parametric_utilities(p, task, util);
    detail::softmax_shifted(util, probs);
    const int k = task.k();
    const int q = p.param_count();
    const int z = *task.ai_label;

    // du_j/dtheta = [x_(j); 1{z=j}] for j >= 1, zero for the outside option.
    Matrix du = Matrix::Zero(k + 1, q);
    du.block(1, 0, k, task.d()) = task.features;
    if (z >= 1) du(z, q - 1) = 1.0;

    const Vector mean_du = du.transpose() * probs;  // sum_l g_l du_l
    Matrix grad(k + 1, q);
    for (int j = 0; j <= k; ++j)
      grad.row(j) = probs(j) * (du.row(j) - mean_du.transpose());
    return grad;
  }

  const auto& p = model.mlp();
  const detail::MlpForward f = detail::mlp_forward(p, task);
  Matrix grad(p.output_dim(), p.param_count());
  Vector dlogits(p.output_dim());
  for (int j = 0; j < p.output_dim(); ++j) {
    // dg_j/da = g_j (e_j - g)
    dlogits = -f.probs(j) * f.probs;
    dlogits(j) += f.probs(j);
    grad.row(j) = detail::mlp_param_grad(p, f, dlogits).transpose();
  }
  return grad;
}

/// Gradient of g_j with respect to the model parameters.
inline Vector g_grad_theta(const GModel& model, const ChoiceTask& task,
                           int label) {
  if (label < 0 || label > task.k())
    throw ValidationError("g_grad_theta: label out of range");
  return g_grad_all(model, task).row(label).transpose();
}

/// Gradient of log g_label; the score of the label model.
inline Vector g_grad_log(const GModel& model, const ChoiceTask& task,
                         int label) {
  const Vector probs = g_probs(model, task);
  if (label < 0 || label > task.k())
    throw ValidationError("g_grad_log: label out of range");
  if (probs(label) <= 0.0)
    throw NumericalError("g_grad_log: zero probability at observed label");
  return g_grad_theta(model, task, label) / probs(label);
}

enum class GVariant { Parametric, Mlp };

struct GFitOptions {
  FitOptions newton;         // parametric stage
  int mlp_epochs = 2000;     // full-batch Adam budget
  double mlp_lr = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double mlp_init_range = 0.5;
  std::uint64_t seed = 0;
};

namespace detail {

/// The parametric family is itself an MNL over the extended design
/// [x_(j), 1{z=j}], so its MLE reuses the Newton fitter.
inline GModel fit_g_parametric(const Dataset& primary,
                               const GFitOptions& opts) {
  const int k = primary.k();
  const int d = primary.d();
  std::vector<ChoiceTask> extended;
  std::vector<SoftTarget> targets;
  extended.reserve(primary.size());
  targets.reserve(primary.size());
  for (const ChoiceTask& t : primary.tasks) {
    ChoiceTask ext;
    ext.features = Matrix::Zero(k, d + 1);
    ext.features.leftCols(d) = t.features;
    const int z = *t.ai_label;
    if (z >= 1) ext.features(z - 1, d) = 1.0;
    extended.push_back(std::move(ext));
    targets.push_back(SoftTarget::one_hot(*t.human_label, k));
  }
  MnlParams fitted = fit_mnl(extended, targets, opts.newton);
  ParametricGParams p;
  p.theta_check = fitted.beta.head(d);
  p.eta = fitted.beta(d);
  return GModel(p);
}

inline GModel fit_g_mlp(const Dataset& primary, const GFitOptions& opts,
                        std::vector<double>* loss_history) {
  MlpGParams params = MlpGParams::random_init(
      primary.k(), primary.d(), opts.seed, opts.mlp_init_range);
  const int q = params.param_count();
  const double n = static_cast<double>(primary.size());

  Vector theta = params.flatten();
  Vector m1 = Vector::Zero(q);
  Vector m2 = Vector::Zero(q);
  Vector grad(q), dlogits;

  for (int epoch = 1; epoch <= opts.mlp_epochs; ++epoch) {
    params.set_from(theta);
    grad.setZero();
    double loss = 0.0;
    for (const ChoiceTask& t : primary.tasks) {
      const MlpForward f = mlp_forward(params, t);
      const int y = *t.human_label;
      loss -= std::log(std::max(f.probs(y), 1e-300));
      dlogits = f.probs;  // d(-log g_y)/da = g - e_y
      dlogits(y) -= 1.0;
      grad += mlp_param_grad(params, f, dlogits);
    }
    loss /= n;
    grad /= n;
    if (loss_history) loss_history->push_back(loss);

    m1 = opts.adam_beta1 * m1 + (1.0 - opts.adam_beta1) * grad;
    m2 = opts.adam_beta2 * m2.array() +
         (1.0 - opts.adam_beta2) * grad.array().square();
    const double c1 = 1.0 - std::pow(opts.adam_beta1, epoch);
    const double c2 = 1.0 - std::pow(opts.adam_beta2, epoch);
    theta.array() -= opts.mlp_lr * (m1.array() / c1) /
                     ((m2.array() / c2).sqrt() + opts.adam_eps);
  }
  params.set_from(theta);
  return GModel(params);
}

}  // namespace detail

/// Step 1 of the augmented estimator: fit g on primary data. The parametric
/// family is estimated by Newton MLE; the MLP by full-batch Adam on
/// cross-entropy, deterministic given `opts.seed`.
inline GModel fit_g(const Dataset& primary, GVariant variant,
                    const GFitOptions& opts = {},
                    std::vector<double>* loss_history = nullptr) {
  if (primary.kind != DatasetKind::Primary)
    throw ValidationError("fit_g: requires a primary dataset");
  primary.validate();
  if (primary.size() == 0) throw ValidationError("fit_g: empty dataset");

  const int q = variant == GVariant::Parametric
                    ? primary.d() + 1
                    : MlpGParams::zeros(primary.k(), primary.d()).param_count();
  if (static_cast<int>(primary.size()) < q)
    std::cerr << "fit_g: warning: " << primary.size()
              << " tasks for " << q << " parameters\n";

  return variant == GVariant::Parametric
             ? detail::fit_g_parametric(primary, opts)
             : detail::fit_g_mlp(primary, opts, loss_history);
}

}  // namespace aae
