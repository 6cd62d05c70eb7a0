#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "aae/simlab.hpp"
#include "support.hpp"

using namespace aae;
using Catch::Approx;

namespace {

AppendixCWorld misaligned_world() {
  AppendixCWorld world;
  world.theta_check = Vector(3);
  world.theta_check << 0.8, -1.2, 0.5;
  world.zeta = Vector(3);
  world.zeta << 1.5, 0.3, -0.9;
  world.eta = 3.0;
  return world;
}

bool equal_datasets(const Dataset& a, const Dataset& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.tasks[i].features != b.tasks[i].features) return false;
    if (a.tasks[i].human_label != b.tasks[i].human_label) return false;
    if (a.tasks[i].ai_label != b.tasks[i].ai_label) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("sample_dataset determinism and label layout", "[simlab]") {
  const WorldSpec world{misaligned_world()};
  const auto [p1, a1] = sample_dataset(world, 50, 80, 91);
  const auto [p2, a2] = sample_dataset(world, 50, 80, 91);
  REQUIRE(equal_datasets(p1, p2));
  REQUIRE(equal_datasets(a1, a2));

  const auto [p3, a3] = sample_dataset(world, 50, 80, 92);
  REQUIRE_FALSE(equal_datasets(p1, p3));

  for (const ChoiceTask& t : p1.tasks) {
    REQUIRE(t.human_label.has_value());
    REQUIRE(t.ai_label.has_value());
  }
  for (const ChoiceTask& t : a1.tasks) {
    REQUIRE_FALSE(t.human_label.has_value());
    REQUIRE(t.ai_label.has_value());
    REQUIRE(*t.ai_label >= 1);  // the z-law has no outside option
  }
}

TEST_CASE("sampled frequencies match the world laws", "[simlab][montecarlo]") {
  SECTION("Example 1: P(z=1) lands in the CLT band") {
    const auto [primary, unused] =
        sample_dataset(WorldSpec{Example1World{0.3, 0.8}}, 100000, 0, 93);
    double z_ones = 0.0;
    for (const ChoiceTask& t : primary.tasks) z_ones += *t.ai_label;
    const double p_hat = z_ones / 100000.0;
    REQUIRE(std::abs(p_hat - 0.3) < 4.0 * std::sqrt(0.3 * 0.7 / 100000.0));
  }
  SECTION("finite-support world: y | (x, z) passes a chi-square test") {
    Rng rng(94);
    ParametricGParams g;
    g.theta_check = Vector(2);
    g.theta_check << 0.7, -0.9;
    g.eta = 1.5;
    std::vector<Matrix> support;
    for (int i = 0; i < 3; ++i) {
      Matrix x(2, 2);
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) x(r, c) = rng.uniform(-1.0, 1.0);
      support.push_back(x);
    }
    Vector x_probs(3);
    x_probs << 0.25, 0.4, 0.35;
    Vector zeta(2);
    zeta << 0.8, -0.5;
    const FiniteSupportWorld world =
        finite_support_from_g(std::move(support), x_probs, zeta, GModel(g));

    const int draws = 100000;
    const auto [primary, unused] =
        sample_dataset(WorldSpec{world}, draws, 0, 95);
    // Cells: (support point, z in {1,2}, y in {0,1,2}).
    double count[3][3][3] = {};
    for (const ChoiceTask& t : primary.tasks) {
      int point = -1;
      for (int i = 0; i < 3; ++i)
        if (t.features == world.support[i]) point = i;
      REQUIRE(point >= 0);
      count[point][*t.ai_label][*t.human_label] += 1.0;
    }
    double chi2 = 0.0;
    int dof = 0;
    for (int i = 0; i < 3; ++i) {
      for (int z = 1; z <= 2; ++z) {
        double cell_total = 0.0;
        for (int y = 0; y <= 2; ++y) cell_total += count[i][z][y];
        REQUIRE(cell_total > 0.0);
        for (int y = 0; y <= 2; ++y) {
          const double expected = cell_total * world.y_given_xz[i][z](y);
          chi2 += (count[i][z][y] - expected) * (count[i][z][y] - expected) /
                  expected;
        }
        dof += 2;  // 3 outcomes per (x, z) cell
      }
    }
    REQUIRE(dof == 12);
    REQUIRE(chi2 < 26.217);  // chi-square(12) quantile at the 1% level
  }
}

TEST_CASE("oracle_beta_star: closed forms and first-order condition",
          "[simlab]") {
  SECTION("Example 1 matches logit(q)") {
    const MnlParams beta = oracle_beta_star(WorldSpec{Example1World{0.3, 0.8}});
    REQUIRE(beta.beta(0) ==
            Approx(example1_oracle(0.3, 0.8, 1.0).beta_star).margin(1e-9));
  }
  SECTION("alpha = 1/2 gives beta* = 0") {
    const MnlParams beta = oracle_beta_star(WorldSpec{Example1World{0.5, 0.7}});
    REQUIRE(beta.beta(0) == Approx(0.0).margin(1e-10));
  }
  SECTION("well-specified world returns the generating coefficients") {
    AppendixCWorld world;
    world.theta_check = Vector(3);
    world.theta_check << 0.8, -1.2, 0.5;
    world.zeta = Vector(3);
    world.zeta << 1.5, 0.3, -0.9;
    world.eta = 0.0;  // y-law is exactly MNL(theta_check)
    OracleOptions opts;
    opts.draws = 20000;
    const MnlParams beta = oracle_beta_star(WorldSpec{world}, opts);
    REQUIRE((beta.beta - world.theta_check).lpNorm<Eigen::Infinity>() < 1e-6);
  }
  SECTION("the population score vanishes at beta*") {
    Rng rng(96);
    ParametricGParams g;
    g.theta_check = Vector(2);
    g.theta_check << 1.1, -0.4;
    g.eta = 2.0;
    std::vector<Matrix> support;
    for (int i = 0; i < 4; ++i) {
      Matrix x(2, 2);
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) x(r, c) = rng.uniform(-1.0, 1.0);
      support.push_back(x);
    }
    Vector x_probs(4);
    x_probs << 0.1, 0.2, 0.3, 0.4;
    Vector zeta(2);
    zeta << -0.6, 0.9;
    const FiniteSupportWorld world =
        finite_support_from_g(std::move(support), x_probs, zeta, GModel(g));
    const MnlParams beta_star = oracle_beta_star(WorldSpec{world});

    Vector score = Vector::Zero(2);
    for (int i = 0; i < world.points(); ++i)
      score += world.x_probs(i) *
               soft_score(world.task(i), SoftTarget{world.y_marginal(i)},
                          beta_star);
    REQUIRE(score.lpNorm<Eigen::Infinity>() < 1e-8);
  }
}

TEST_CASE("example1_oracle closed forms", "[simlab]") {
  SECTION("reference point (0.3, 0.8, 1)") {
    const Example1Oracle oracle = example1_oracle(0.3, 0.8, 1.0);
    REQUIRE(oracle.beta_star == Approx(-0.48954822531870577).margin(1e-12));
    REQUIRE(oracle.naive_limit == Approx(-0.66329421741026418).margin(1e-12));
  }
  SECTION("p -> 1 collapses the naive bias") {
    const Example1Oracle oracle = example1_oracle(0.3, 1.0 - 1e-6, 2.0);
    REQUIRE(std::abs(oracle.naive_limit - oracle.beta_star) < 1e-4);
  }
  SECTION("boundary parameters are rejected") {
    REQUIRE_THROWS_AS(example1_oracle(0.0, 0.8, 1.0), ValidationError);
    REQUIRE_THROWS_AS(example1_oracle(0.3, 1.0, 1.0), ValidationError);
    REQUIRE_THROWS_AS(example1_oracle(0.3, 0.8, -1.0), ValidationError);
  }
}

TEST_CASE("eta_sweep degenerate and small grids", "[simlab][montecarlo]") {
  SECTION("eta = 0 zeroes both metrics exactly") {
    EtaSweepConfig config;
    config.instances = 1;
    config.eta_grid = {0.0};
    config.expectation_draws = 2000;
    config.master_seed = 97;
    const EtaSweepResult result = eta_sweep(config);
    REQUIRE(result.rows.size() == 1);
    REQUIRE(std::abs(result.rows[0].min_eig) < 1e-12);
    REQUIRE(result.rows[0].abs_prob_diff < 1e-7);
  }
  SECTION("small sweep: positivity, monotone alignment, determinism") {
    EtaSweepConfig config;
    config.instances = 3;
    config.eta_grid = {0.01, 1.0, 8.0};
    config.expectation_draws = 20000;
    config.master_seed = 98;
    config.threads = 1;
    const EtaSweepResult serial = eta_sweep(config);
    REQUIRE(serial.rows.size() == 9);
    for (const EtaSweepRow& row : serial.rows) REQUIRE(row.min_eig > 0.0);
    for (std::size_t e = 1; e < serial.aggregates.size(); ++e)
      REQUIRE(serial.aggregates[e].apd_mean >
              serial.aggregates[e - 1].apd_mean);

    config.threads = 4;  // scheduling must not change any value
    const EtaSweepResult parallel = eta_sweep(config);
    REQUIRE(parallel.rows.size() == serial.rows.size());
    for (std::size_t i = 0; i < serial.rows.size(); ++i) {
      REQUIRE(parallel.rows[i].eta == serial.rows[i].eta);
      REQUIRE(parallel.rows[i].instance == serial.rows[i].instance);
      REQUIRE(parallel.rows[i].min_eig == serial.rows[i].min_eig);
      REQUIRE(parallel.rows[i].abs_prob_diff == serial.rows[i].abs_prob_diff);
    }
  }
}

TEST_CASE("monte_carlo_benchmark: ordering, trends, determinism",
          "[simlab][montecarlo]") {
  SECTION("misaligned world ranks AAE < primary-only < naive") {
    SimulationConfig config;
    config.world = misaligned_world();
    config.m = 100;
    config.n = 1000;
    config.replications = 20;
    config.master_seed = 99;
    const BenchmarkResult result = monte_carlo_benchmark(config);
    REQUIRE(result.estimators[0].kind == EstimatorKind::Primary);
    REQUIRE(result.estimators[2].kind == EstimatorKind::AAE);
    const double primary = result.estimators[0].mean_mape;
    const double naive = result.estimators[1].mean_mape;
    const double aae = result.estimators[2].mean_mape;
    REQUIRE(aae < primary);
    REQUIRE(primary < naive);
    REQUIRE(paired_win_rate(result, EstimatorKind::AAE,
                            EstimatorKind::Naive) >= 0.9);
  }
  SECTION("naive error does not shrink as auxiliary data grows") {
    std::vector<double> means;
    for (const std::size_t n : {500u, 2000u, 8000u}) {
      SimulationConfig config;
      config.world = misaligned_world();
      config.m = 100;
      config.n = n;
      config.replications = 30;
      config.master_seed = 100;
      config.estimators = {EstimatorKind::Naive};
      means.push_back(monte_carlo_benchmark(config).estimators[0].mean_mape);
    }
    REQUIRE(means[1] >= means[0]);
    REQUIRE(means[2] >= means[1]);
  }
  SECTION("AAE error shrinks when both samples scale fourfold") {
    const auto mean_l2 = [&](std::size_t m, std::size_t n) {
      SimulationConfig config;
      config.world = misaligned_world();
      config.m = m;
      config.n = n;
      config.replications = 30;
      config.master_seed = 101;
      config.estimators = {EstimatorKind::AAE};
      return monte_carlo_benchmark(config).estimators[0].mean_l2;
    };
    REQUIRE(mean_l2(400, 4000) < mean_l2(100, 1000));
  }
  SECTION("identical tables regardless of scheduling") {
    SimulationConfig config;
    config.world = misaligned_world();
    config.m = 60;
    config.n = 300;
    config.replications = 12;
    config.master_seed = 102;
    config.threads = 1;
    const BenchmarkResult serial = monte_carlo_benchmark(config);
    config.threads = 4;
    const BenchmarkResult parallel = monte_carlo_benchmark(config);
    for (std::size_t e = 0; e < serial.estimators.size(); ++e) {
      REQUIRE(serial.estimators[e].mean_mape ==
              parallel.estimators[e].mean_mape);
      for (std::size_t r = 0; r < serial.estimators[e].cells.size(); ++r)
        REQUIRE(serial.estimators[e].cells[r].mape ==
                parallel.estimators[e].cells[r].mape);
    }
  }
}
