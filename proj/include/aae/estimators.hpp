#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "aae/choice.hpp"
#include "aae/error.hpp"
#include "aae/gmodel.hpp"

// The four estimators compared throughout: primary-only MLE, auxiliary-only
// MLE, naive pooling of both label sources, and the two-stage AI-augmented
// estimator (fit g on primary, then maximize the g-weighted soft
// log-likelihood over auxiliary tasks).

namespace aae {

enum class EstimatorKind { Primary, Auxiliary, Naive, AAE };

inline const char* to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Primary: return "primary";
    case EstimatorKind::Auxiliary: return "auxiliary";
    case EstimatorKind::Naive: return "naive";
    case EstimatorKind::AAE: return "aae";
  }
  return "unknown";
}

struct EstimatorResult {
  MnlParams beta_hat;
  EstimatorKind kind = EstimatorKind::Primary;
  std::optional<GModel> g_model;  // present iff kind == AAE
  std::size_t m = 0;              // primary rows used
  std::size_t n = 0;              // auxiliary rows used

  double rho() const {
    return m == 0 ? 0.0 : static_cast<double>(n) / static_cast<double>(m);
  }
};

/// Single-stage estimators. Primary uses y labels, Auxiliary uses z labels,
/// Naive pools both into one hard-label MLE.
inline EstimatorResult fit_baseline(const Dataset* primary,
                                    const Dataset* auxiliary,
                                    EstimatorKind mode,
                                    const FitOptions& opts = {}) {
  const bool needs_primary =
      mode == EstimatorKind::Primary || mode == EstimatorKind::Naive;
  const bool needs_auxiliary =
      mode == EstimatorKind::Auxiliary || mode == EstimatorKind::Naive;
  if (mode == EstimatorKind::AAE)
    throw ValidationError("fit_baseline: use fit_aae for the AAE");
  if (needs_primary && !primary)
    throw ValidationError("fit_baseline: mode requires a primary dataset");
  if (needs_auxiliary && !auxiliary)
    throw ValidationError("fit_baseline: mode requires an auxiliary dataset");
  if (primary) primary->validate();
  if (auxiliary) auxiliary->validate();

  std::vector<ChoiceTask> tasks;
  std::vector<SoftTarget> targets;
  std::size_t m = 0, n = 0;
  if (needs_primary) {
    m = primary->size();
    for (const ChoiceTask& t : primary->tasks) {
      tasks.push_back(t);
      targets.push_back(SoftTarget::one_hot(*t.human_label, t.k()));
    }
  }
  if (needs_auxiliary) {
    n = auxiliary->size();
    for (const ChoiceTask& t : auxiliary->tasks) {
      tasks.push_back(t);
      targets.push_back(SoftTarget::one_hot(*t.ai_label, t.k()));
    }
  }
  if (tasks.empty())
    throw ValidationError("fit_baseline: no tasks to fit");

  EstimatorResult result;
  result.beta_hat = fit_mnl(tasks, targets, opts);
  result.kind = mode;
  result.m = m;
  result.n = n;
  return result;
}

/// Step 2 in isolation: the fitted g is evaluated once per auxiliary task
/// and cached as soft targets, after which this is an ordinary soft-target
/// MLE over the auxiliary data only.
inline MnlParams aae_step2(const GModel& g, const Dataset& auxiliary,
                           const FitOptions& opts = {}) {
  if (auxiliary.kind != DatasetKind::Auxiliary)
    throw ValidationError("aae_step2: requires an auxiliary dataset");
  auxiliary.validate();
  if (auxiliary.size() == 0)
    throw ValidationError("aae_step2: empty auxiliary dataset");

  std::vector<SoftTarget> targets;
  targets.reserve(auxiliary.size());
  for (const ChoiceTask& t : auxiliary.tasks)
    targets.push_back(SoftTarget{g_probs(g, t)});
  return fit_mnl(auxiliary.tasks, targets, opts);
}

struct AaeOptions {
  FitOptions fit;    // Step 2
  GFitOptions g_fit; // Step 1
};

/// The two-stage AI-augmented estimator.
inline EstimatorResult fit_aae(const Dataset& primary,
                               const Dataset& auxiliary, GVariant g_variant,
                               const AaeOptions& opts = {}) {
  primary.validate();
  auxiliary.validate();
  if (primary.size() == 0 || auxiliary.size() == 0)
    throw ValidationError("fit_aae: both datasets must be nonempty");
  if (primary.k() != auxiliary.k() || primary.d() != auxiliary.d())
    throw ValidationError("fit_aae: primary/auxiliary dimension mismatch");

  EstimatorResult result;
  result.g_model = fit_g(primary, g_variant, opts.g_fit);
  result.beta_hat = aae_step2(*result.g_model, auxiliary, opts.fit);
  result.kind = EstimatorKind::AAE;
  result.m = primary.size();
  result.n = auxiliary.size();
  return result;
}

}  // namespace aae
