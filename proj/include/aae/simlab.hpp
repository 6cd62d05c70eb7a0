#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "aae/choice.hpp"
#include "aae/error.hpp"
#include "aae/estimators.hpp"
#include "aae/gmodel.hpp"
#include "aae/inference.hpp"
#include "aae/metrics.hpp"
#include "aae/rng.hpp"
#include "aae/worlds.hpp"

// Simulation laboratory: dataset sampling from synthetic worlds, the
// population oracle for the best-in-class coefficients, the closed-form
// Example-1 oracle, the eta sweep over the parametric alignment grid, and
// the Monte Carlo benchmark harness.
//
// Everything is deterministic given the master seed. Work units derive
// child seeds by index, so parallel execution cannot change any result.

namespace aae {

namespace detail {

/// Index-based parallel for. Each invocation of `fn(i)` must only write
/// state owned by index i; the first exception is rethrown after join.
template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  if (threads <= 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    threads = hw == 0 ? 1 : static_cast<int>(hw);
  }
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }

  std::atomic<int> next(0);
  std::atomic<bool> failed(false);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      const int i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline ChoiceTask sample_task(const Example1World& world, Rng& rng) {
  ChoiceTask t = world.task();
  const int z = rng.bernoulli(world.alpha) ? 1 : 0;
  const int y = rng.bernoulli(world.p) ? z : 1 - z;
  t.ai_label = z;
  t.human_label = y;
  return t;
}

inline ChoiceTask sample_features(const AppendixCWorld& world, Rng& rng) {
  ChoiceTask t;
  t.features.resize(world.k, world.d());
  for (int j = 0; j < world.k; ++j)
    for (int c = 0; c < world.d(); ++c)
      t.features(j, c) = rng.uniform(-1.0, 1.0);
  return t;
}

inline ChoiceTask sample_task(const AppendixCWorld& world, Rng& rng) {
  ChoiceTask t = sample_features(world, rng);
  t.ai_label = rng.categorical(world.z_probs(t.features));
  t.human_label = rng.categorical(g_probs(world.true_g(), t));
  return t;
}

inline ChoiceTask sample_task(const FiniteSupportWorld& world, Rng& rng) {
  const int point = rng.categorical(world.x_probs);
  ChoiceTask t = world.task(point);
  const int z = rng.categorical(world.z_probs[point]);
  t.ai_label = z;
  t.human_label = rng.categorical(world.y_given_xz[point][z]);
  return t;
}

inline void validate_world(const WorldSpec& world) {
  std::visit([](const auto& w) { w.validate(); }, world);
}

}  // namespace detail

/// Draw i.i.d. primary and auxiliary datasets from the world. The two
/// datasets use independent child streams of `seed`; auxiliary tasks drop
/// the human label after sampling.
inline std::pair<Dataset, Dataset> sample_dataset(const WorldSpec& world,
                                                  std::size_t m,
                                                  std::size_t n,
                                                  std::uint64_t seed) {
  detail::validate_world(world);
  Dataset primary{DatasetKind::Primary, {}};
  Dataset auxiliary{DatasetKind::Auxiliary, {}};
  primary.tasks.reserve(m);
  auxiliary.tasks.reserve(n);

  Rng primary_rng(derive_seed(seed, 0));
  Rng auxiliary_rng(derive_seed(seed, 1));
  std::visit(
      [&](const auto& w) {
        for (std::size_t i = 0; i < m; ++i)
          primary.tasks.push_back(detail::sample_task(w, primary_rng));
        for (std::size_t i = 0; i < n; ++i) {
          ChoiceTask t = detail::sample_task(w, auxiliary_rng);
          t.human_label.reset();
          auxiliary.tasks.push_back(std::move(t));
        }
      },
      world);
  return {std::move(primary), std::move(auxiliary)};
}

struct OracleOptions {
  int draws = 100000;      // Monte Carlo size for continuous-x worlds
  std::uint64_t seed = 0;  // seed of the fixed expectation draw
  FitOptions fit;
};

namespace detail {

/// P(y | x) of an Appendix-C world at one feature matrix, marginalized
/// over the z-law.
inline SoftTarget appendixc_soft_target(const AppendixCWorld& world,
                                        const GModel& true_g,
                                        ChoiceTask& task) {
  const Vector pz = world.z_probs(task.features);
  Vector marginal = Vector::Zero(world.k + 1);
  for (int z = 1; z <= world.k; ++z) {
    if (pz(z) == 0.0) continue;
    task.ai_label = z;
    marginal += pz(z) * g_probs(true_g, task);
  }
  task.ai_label.reset();
  return SoftTarget{marginal};
}

}  // namespace detail

/// Best-in-class coefficients: the maximizer of the population soft
/// log-likelihood E_x[sum_j P(y=j|x) log sigma_j(x; beta)]. Exact on finite
/// supports; continuous-x worlds use a fixed seeded expectation draw.
inline MnlParams oracle_beta_star(const WorldSpec& world,
                                  const OracleOptions& opts = {}) {
  detail::validate_world(world);

  if (const auto* example1 = std::get_if<Example1World>(&world)) {
    const FiniteSupportWorld finite = to_finite_support(*example1);
    return oracle_beta_star(WorldSpec{finite}, opts);
  }

  if (const auto* finite = std::get_if<FiniteSupportWorld>(&world)) {
    std::vector<ChoiceTask> tasks;
    std::vector<SoftTarget> targets;
    std::vector<double> weights;
    for (int i = 0; i < finite->points(); ++i) {
      if (finite->x_probs(i) == 0.0) continue;
      tasks.push_back(finite->task(i));
      targets.push_back(SoftTarget{finite->y_marginal(i)});
      weights.push_back(finite->x_probs(i));
    }
    return fit_mnl(tasks, targets, opts.fit, nullptr, weights);
  }

  const auto& appendixc = std::get<AppendixCWorld>(world);
  const GModel true_g = appendixc.true_g();
  Rng rng(derive_seed(opts.seed, 0x0eac1eULL));
  std::vector<ChoiceTask> tasks;
  std::vector<SoftTarget> targets;
  tasks.reserve(opts.draws);
  targets.reserve(opts.draws);
  for (int i = 0; i < opts.draws; ++i) {
    ChoiceTask t = detail::sample_features(appendixc, rng);
    targets.push_back(detail::appendixc_soft_target(appendixc, true_g, t));
    tasks.push_back(std::move(t));
  }
  return fit_mnl(tasks, targets, opts.fit);
}

struct Example1Oracle {
  double beta_star = 0.0;
  double naive_limit = 0.0;
};

/// Closed forms for the one-product world. With q = alpha p +
/// (1-alpha)(1-p), the best-in-class coefficient is logit(q); pooling m
/// human labels with n AI labels drives the naive estimator to
/// logit(alpha rho/(1+rho) + q/(1+rho)) as both samples grow at n/m = rho.
inline Example1Oracle example1_oracle(double alpha, double p, double rho) {
  if (!(alpha > 0.0 && alpha < 1.0 && p > 0.0 && p < 1.0))
    throw ValidationError("example1_oracle: alpha, p must lie in (0,1)");
  if (!(rho >= 0.0) || !std::isfinite(rho))
    throw ValidationError("example1_oracle: rho must be finite and >= 0");
  const auto logit = [](double q) { return std::log(q / (1.0 - q)); };
  const double q = alpha * p + (1.0 - alpha) * (1.0 - p);
  Example1Oracle oracle;
  oracle.beta_star = logit(q);
  oracle.naive_limit = logit(alpha * rho / (1.0 + rho) + q / (1.0 + rho));
  return oracle;
}

// ---------------------------------------------------------------------------
// Eta sweep: dominance diagnostics across the alignment grid
// ---------------------------------------------------------------------------

struct EtaSweepConfig {
  int instances = 50;
  std::vector<double> eta_grid = {0.01, 0.1, 0.5, 1.0, 2.0, 3.0,
                                  4.0,  5.0, 6.0, 7.0, 8.0};
  int expectation_draws = 100000;
  std::uint64_t master_seed = 1;
  int d = 5;
  int k = 2;
  int threads = 0;
  int max_attempts = 20;  // oracle retries before giving up on an instance
  FitOptions fit;
};

struct EtaSweepRow {
  double eta = 0.0;
  int instance = 0;
  double min_eig = 0.0;
  double abs_prob_diff = 0.0;
};

struct EtaAggregateRow {
  double eta = 0.0;
  double min_eig_mean = 0.0, min_eig_min = 0.0, min_eig_max = 0.0;
  double apd_mean = 0.0, apd_min = 0.0, apd_max = 0.0;
};

struct EtaSweepResult {
  std::vector<EtaSweepRow> rows;  // eta-major, instance-minor
  std::vector<EtaAggregateRow> aggregates;
  int resampled = 0;  // instances redrawn after oracle non-convergence
};

/// For each instance draw theta_check, zeta ~ U[-2,2]^d and a fixed x
/// expectation sample; for each eta compute beta*, then the minimum
/// eigenvalue of E[r r'] (the population dominance matrix under the
/// parametric law) and the mean absolute probability difference
/// E[(1/k) sum_j |sigma_j(x; beta*) - g_j(x, z; theta*)|].
inline EtaSweepResult eta_sweep(const EtaSweepConfig& config) {
  if (config.instances < 1 || config.eta_grid.empty() ||
      config.expectation_draws < 1)
    throw ValidationError("eta_sweep: invalid configuration");

  const int n_eta = static_cast<int>(config.eta_grid.size());
  std::vector<std::vector<EtaSweepRow>> per_instance(config.instances);
  std::vector<int> attempts_used(config.instances, 0);

  detail::parallel_for(config.instances, config.threads, [&](int instance) {
    for (int attempt = 0;; ++attempt) {
      if (attempt >= config.max_attempts)
        throw NumericalError(
            "eta_sweep: instance " + std::to_string(instance) +
            " failed oracle convergence after " +
            std::to_string(config.max_attempts) + " attempts");
      const std::uint64_t seed = derive_seed(
          derive_seed(config.master_seed, instance), attempt);
      Rng rng(seed);

      AppendixCWorld world;
      world.k = config.k;
      world.theta_check.resize(config.d);
      world.zeta.resize(config.d);
      for (int c = 0; c < config.d; ++c)
        world.theta_check(c) = rng.uniform(-2.0, 2.0);
      for (int c = 0; c < config.d; ++c)
        world.zeta(c) = rng.uniform(-2.0, 2.0);

      // Fixed expectation draw, shared by every eta of this instance.
      std::vector<ChoiceTask> draws;
      draws.reserve(config.expectation_draws);
      for (int i = 0; i < config.expectation_draws; ++i)
        draws.push_back(detail::sample_features(world, rng));

      std::vector<EtaSweepRow> rows;
      rows.reserve(n_eta);
      try {
        for (double eta : config.eta_grid) {
          world.eta = eta;
          const GModel g_star = world.true_g();

          std::vector<SoftTarget> targets;
          targets.reserve(draws.size());
          for (ChoiceTask& t : draws)
            targets.push_back(
                detail::appendixc_soft_target(world, g_star, t));
          const MnlParams beta_star =
              fit_mnl(draws, targets, config.fit);

          Matrix moment = Matrix::Zero(config.d, config.d);
          double apd = 0.0;
          ChoiceTask labeled;
          for (const ChoiceTask& t : draws) {
            const Vector sigma = mnl_probs(t, beta_star);
            const Vector pz = world.z_probs(t.features);
            labeled = t;
            for (int z = 1; z <= config.k; ++z) {
              if (pz(z) == 0.0) continue;
              labeled.ai_label = z;
              const Vector g = g_probs(g_star, labeled);
              const Vector r = t.features.transpose() *
                               (sigma.tail(config.k) - g.tail(config.k));
              moment.noalias() += pz(z) * (r * r.transpose());
              apd += pz(z) *
                     (sigma.tail(config.k) - g.tail(config.k))
                         .cwiseAbs()
                         .sum() /
                     config.k;
            }
          }
          moment /= static_cast<double>(draws.size());
          apd /= static_cast<double>(draws.size());

          EtaSweepRow row;
          row.eta = eta;
          row.instance = instance;
          row.min_eig = detail::sorted_eigenvalues(moment).minCoeff();
          row.abs_prob_diff = apd;
          rows.push_back(row);
        }
      } catch (const NumericalError&) {
        continue;  // resample this instance with a fresh seed
      }
      per_instance[instance] = std::move(rows);
      attempts_used[instance] = attempt;
      return;
    }
  });

  EtaSweepResult result;
  for (int a : attempts_used) result.resampled += a;
  for (int e = 0; e < n_eta; ++e) {
    EtaAggregateRow agg;
    agg.eta = config.eta_grid[e];
    agg.min_eig_min = agg.apd_min = std::numeric_limits<double>::infinity();
    agg.min_eig_max = agg.apd_max = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < config.instances; ++i) {
      const EtaSweepRow& row = per_instance[i][e];
      result.rows.push_back(row);
      agg.min_eig_mean += row.min_eig;
      agg.apd_mean += row.abs_prob_diff;
      agg.min_eig_min = std::min(agg.min_eig_min, row.min_eig);
      agg.min_eig_max = std::max(agg.min_eig_max, row.min_eig);
      agg.apd_min = std::min(agg.apd_min, row.abs_prob_diff);
      agg.apd_max = std::max(agg.apd_max, row.abs_prob_diff);
    }
    agg.min_eig_mean /= config.instances;
    agg.apd_mean /= config.instances;
    result.aggregates.push_back(agg);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Monte Carlo benchmark
// ---------------------------------------------------------------------------

struct SimulationConfig {
  WorldSpec world;
  std::size_t m = 100;
  std::size_t n = 1000;
  int replications = 50;
  std::uint64_t master_seed = 1;
  std::vector<EstimatorKind> estimators = {
      EstimatorKind::Primary, EstimatorKind::Naive, EstimatorKind::AAE};
  GVariant g_variant = GVariant::Parametric;
  double mape_epsilon = 0.1;
  OracleOptions oracle;
  int threads = 0;

  SimulationConfig() {
    // Small primary samples occasionally separate; fall back to a ridge
    // penalty instead of dropping the replication.
    fit.ridge_fallback = true;
    g_fit.newton.ridge_fallback = true;
  }

  FitOptions fit;
  GFitOptions g_fit;
};

struct BenchmarkCell {
  bool ok = false;
  double mape = 0.0;
  double mse = 0.0;
  double l2 = 0.0;
  std::string error;
};

struct EstimatorSummary {
  EstimatorKind kind = EstimatorKind::Primary;
  std::vector<BenchmarkCell> cells;  // one per replication
  double mean_mape = 0.0, sd_mape = 0.0;
  double mean_mse = 0.0, mean_l2 = 0.0;
  int failures = 0;
};

struct BenchmarkResult {
  MnlParams beta_star;
  std::vector<EstimatorSummary> estimators;
  int replications = 0;
  double mape_epsilon = 0.0;
};

/// Fraction of replications where estimator `a` has strictly smaller MAPE
/// than `b`, over replications where both succeeded.
inline double paired_win_rate(const BenchmarkResult& result,
                              EstimatorKind a, EstimatorKind b) {
  const EstimatorSummary* sa = nullptr;
  const EstimatorSummary* sb = nullptr;
  for (const EstimatorSummary& s : result.estimators) {
    if (s.kind == a) sa = &s;
    if (s.kind == b) sb = &s;
  }
  if (!sa || !sb)
    throw ValidationError("paired_win_rate: estimator not in benchmark");
  int wins = 0, both = 0;
  for (std::size_t r = 0; r < sa->cells.size(); ++r) {
    if (!sa->cells[r].ok || !sb->cells[r].ok) continue;
    ++both;
    if (sa->cells[r].mape < sb->cells[r].mape) ++wins;
  }
  if (both == 0)
    throw NumericalError("paired_win_rate: no jointly successful replication");
  return static_cast<double>(wins) / both;
}

/// Replicated estimator comparison against the world's oracle
/// coefficients. Failures are recorded per replication, never fatal.
inline BenchmarkResult monte_carlo_benchmark(const SimulationConfig& config) {
  if (config.replications < 1)
    throw ValidationError("monte_carlo_benchmark: replications must be >= 1");
  if (config.estimators.empty())
    throw ValidationError("monte_carlo_benchmark: no estimators requested");
  detail::validate_world(config.world);

  BenchmarkResult result;
  result.replications = config.replications;
  result.mape_epsilon = config.mape_epsilon;

  OracleOptions oracle_opts = config.oracle;
  oracle_opts.seed = derive_seed(config.master_seed, 0xbe7a57a2ULL);
  result.beta_star = oracle_beta_star(config.world, oracle_opts);

  const int n_est = static_cast<int>(config.estimators.size());
  std::vector<std::vector<BenchmarkCell>> cells(
      config.replications, std::vector<BenchmarkCell>(n_est));

  detail::parallel_for(config.replications, config.threads, [&](int rep) {
    const std::uint64_t rep_seed = derive_seed(config.master_seed, rep + 1);
    auto [primary, auxiliary] =
        sample_dataset(config.world, config.m, config.n,
                       derive_seed(rep_seed, 1));
    for (int e = 0; e < n_est; ++e) {
      BenchmarkCell& cell = cells[rep][e];
      try {
        EstimatorResult fit;
        if (config.estimators[e] == EstimatorKind::AAE) {
          AaeOptions opts;
          opts.fit = config.fit;
          opts.g_fit = config.g_fit;
          opts.g_fit.seed = derive_seed(rep_seed, 2);
          fit = fit_aae(primary, auxiliary, config.g_variant, opts);
        } else {
          fit = fit_baseline(&primary, &auxiliary, config.estimators[e],
                             config.fit);
        }
        cell.mape = mape(fit.beta_hat, result.beta_star, config.mape_epsilon);
        cell.mse = mean_squared_error(fit.beta_hat, result.beta_star);
        cell.l2 = l2_error(fit.beta_hat, result.beta_star);
        cell.ok = true;
      } catch (const Error& err) {
        cell.ok = false;
        cell.error = err.what();
      }
    }
  });

  for (int e = 0; e < n_est; ++e) {
    EstimatorSummary summary;
    summary.kind = config.estimators[e];
    summary.cells.reserve(config.replications);
    double sum = 0.0, sum_sq = 0.0, sum_mse = 0.0, sum_l2 = 0.0;
    int ok_count = 0;
    for (int rep = 0; rep < config.replications; ++rep) {
      const BenchmarkCell& cell = cells[rep][e];
      summary.cells.push_back(cell);
      if (!cell.ok) {
        ++summary.failures;
        continue;
      }
      ++ok_count;
      sum += cell.mape;
      sum_sq += cell.mape * cell.mape;
      sum_mse += cell.mse;
      sum_l2 += cell.l2;
    }
    if (ok_count > 0) {
      summary.mean_mape = sum / ok_count;
      summary.mean_mse = sum_mse / ok_count;
      summary.mean_l2 = sum_l2 / ok_count;
      if (ok_count > 1)
        summary.sd_mape = std::sqrt(
            std::max(0.0, (sum_sq - sum * sum / ok_count) / (ok_count - 1)));
    }
    result.estimators.push_back(std::move(summary));
  }
  return result;
}

}  // namespace aae
