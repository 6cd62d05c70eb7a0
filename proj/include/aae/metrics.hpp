#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "aae/choice.hpp"
#include "aae/error.hpp"

// Coefficient-error metrics and the data-savings computation: how many
// human samples the augmented estimator replaces at equal error.

namespace aae {

/// Mean absolute percentage error against the reference coefficients,
/// with an epsilon-adjusted denominator to neutralize near-zero
/// coefficients:
///   (1/d) sum_j |bh_j - bs_j| / (|bs_j| + epsilon) * 100.
inline double mape(const MnlParams& beta_hat, const MnlParams& beta_star,
                   double epsilon) {
  beta_hat.validate();
  beta_star.validate();
  if (beta_hat.d() != beta_star.d())
    throw ValidationError("mape: dimension mismatch");
  if (epsilon < 0.0) throw ValidationError("mape: epsilon must be >= 0");
  double total = 0.0;
  for (int j = 0; j < beta_star.d(); ++j) {
    const double denom = std::abs(beta_star.beta(j)) + epsilon;
    if (denom == 0.0)
      throw ValidationError(
          "mape: epsilon = 0 with a zero reference coefficient");
    total += std::abs(beta_hat.beta(j) - beta_star.beta(j)) / denom;
  }
  return total / beta_star.d() * 100.0;
}

inline double mean_squared_error(const MnlParams& beta_hat,
                                 const MnlParams& beta_star) {
  if (beta_hat.d() != beta_star.d())
    throw ValidationError("mean_squared_error: dimension mismatch");
  return (beta_hat.beta - beta_star.beta).squaredNorm() / beta_star.d();
}

inline double l2_error(const MnlParams& beta_hat, const MnlParams& beta_star) {
  if (beta_hat.d() != beta_star.d())
    throw ValidationError("l2_error: dimension mismatch");
  return (beta_hat.beta - beta_star.beta).norm();
}

struct SavingsEntry {
  double n1 = 0.0;
  double n2 = 0.0;
  double percent = 0.0;
  bool extrapolated = false;
};

/// Per-comparison metric bundle; what the CLI emits for one estimate.
struct MetricsReport {
  Vector per_feature_ape;  // percent, epsilon-adjusted
  double mape = 0.0;
  double mse = 0.0;
  double epsilon = 0.0;
  std::vector<SavingsEntry> savings;
};

inline MetricsReport compare_params(const MnlParams& beta_hat,
                                    const MnlParams& beta_star,
                                    double epsilon) {
  MetricsReport report;
  report.epsilon = epsilon;
  report.mape = mape(beta_hat, beta_star, epsilon);
  report.mse = mean_squared_error(beta_hat, beta_star);
  report.per_feature_ape.resize(beta_star.d());
  for (int j = 0; j < beta_star.d(); ++j)
    report.per_feature_ape(j) =
        std::abs(beta_hat.beta(j) - beta_star.beta(j)) /
        (std::abs(beta_star.beta(j)) + epsilon) * 100.0;
  return report;
}

/// Mean estimation error of the primary-only estimator as a function of
/// the primary sample size.
struct ErrorCurve {
  std::vector<std::pair<double, double>> points;  // (size, mean error)

  void validate() const {
    if (points.size() < 2)
      throw ValidationError("ErrorCurve: need at least two points");
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!(points[i].first > 0.0) || !std::isfinite(points[i].second))
        throw ValidationError("ErrorCurve: sizes must be positive and errors finite");
      if (i > 0 && points[i].first <= points[i - 1].first)
        throw ValidationError("ErrorCurve: sizes must be strictly increasing");
    }
  }
};

namespace detail {

/// Pool-adjacent-violators projection onto non-increasing sequences.
inline std::vector<double> isotonic_non_increasing(
    const std::vector<double>& values) {
  std::vector<double> level;
  std::vector<int> count;
  for (double v : values) {
    level.push_back(v);
    count.push_back(1);
    while (level.size() > 1 && level[level.size() - 2] < level.back()) {
      const double merged =
          (level[level.size() - 2] * count[count.size() - 2] +
           level.back() * count.back()) /
          (count[count.size() - 2] + count.back());
      count[count.size() - 2] += count.back();
      level[level.size() - 2] = merged;
      level.pop_back();
      count.pop_back();
    }
  }
  std::vector<double> out;
  for (std::size_t b = 0; b < level.size(); ++b)
    out.insert(out.end(), count[b], level[b]);
  return out;
}

}  // namespace detail

/// Percentage of human data saved: locate the primary-only sample size n2
/// whose error matches `aae_error` (achieved with n1 human samples) and
/// return ((n2 - n1)/n2) * 100. The curve is isotonized first and inverted
/// by linear interpolation of error against log size; targets outside the
/// curve extrapolate along the boundary segment when allowed.
inline SavingsEntry data_savings(double aae_error, const ErrorCurve& curve,
                                 double n1, bool allow_extrapolation = false) {
  curve.validate();
  if (!(n1 > 0.0)) throw ValidationError("data_savings: n1 must be positive");
  if (!std::isfinite(aae_error))
    throw ValidationError("data_savings: target error must be finite");

  std::vector<double> raw;
  raw.reserve(curve.points.size());
  for (const auto& [size, error] : curve.points) raw.push_back(error);
  const std::vector<double> errors = detail::isotonic_non_increasing(raw);

  const auto log_size = [&](std::size_t i) {
    return std::log(curve.points[i].first);
  };
  const std::size_t last = errors.size() - 1;

  SavingsEntry entry;
  entry.n1 = n1;
  entry.extrapolated = aae_error > errors.front() || aae_error < errors[last];
  if (entry.extrapolated) {
    if (!allow_extrapolation)
      throw ValidationError(
          "data_savings: error curve does not bracket the target error "
          "and extrapolation is disabled");
    // Extend the nearest non-flat segment.
    std::size_t lo = 0, hi = 1;
    if (aae_error < errors[last]) {
      hi = last;
      lo = hi - 1;
      while (lo > 0 && errors[lo] == errors[hi]) --lo;
    } else {
      while (hi < last && errors[hi] == errors[lo]) ++hi;
    }
    if (errors[lo] == errors[hi])
      throw ValidationError("data_savings: error curve is flat; cannot invert");
    const double t = (errors[lo] - aae_error) / (errors[lo] - errors[hi]);
    entry.n2 = std::exp(log_size(lo) + t * (log_size(hi) - log_size(lo)));
  } else {
    // First bracketing segment; flat stretches resolve to their left edge
    // and knot hits return the knot size exactly.
    std::size_t seg = 0;
    while (seg < last && errors[seg + 1] > aae_error) ++seg;
    if (errors[seg] == aae_error || errors[seg] == errors[seg + 1]) {
      while (seg > 0 && errors[seg - 1] == aae_error) --seg;
      entry.n2 = curve.points[seg].first;
    } else if (errors[seg + 1] == aae_error) {
      entry.n2 = curve.points[seg + 1].first;
    } else {
      const double t =
          (errors[seg] - aae_error) / (errors[seg] - errors[seg + 1]);
      entry.n2 =
          std::exp(log_size(seg) + t * (log_size(seg + 1) - log_size(seg)));
    }
  }

  entry.percent = (entry.n2 - n1) / entry.n2 * 100.0;
  return entry;
}

}  // namespace aae
