// Command-line surface for the AI-augmented conjoint estimation library.
//
// Subcommands: fit, infer, simulate, sweep-eta, benchmark, savings.
// Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 I/O.

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aae/aae.hpp"

namespace {

using namespace aae;

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    if (item.empty()) continue;
    values.push_back(std::stod(item));
  }
  if (values.empty())
    throw ValidationError("expected a comma-separated list, got '" + text +
                          "'");
  return values;
}

Vector to_vector(const std::vector<double>& values) {
  Vector v(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) v(i) = values[i];
  return v;
}

void write_output(const std::string& out, const std::string& content) {
  if (out.empty())
    std::cout << content;
  else
    write_text_file(out, content);
}

EstimatorKind parse_estimator(const std::string& name) {
  if (name == "primary") return EstimatorKind::Primary;
  if (name == "auxiliary") return EstimatorKind::Auxiliary;
  if (name == "naive") return EstimatorKind::Naive;
  if (name == "aae") return EstimatorKind::AAE;
  throw ValidationError("unknown estimator '" + name + "'");
}

GVariant parse_g_variant(const std::string& name) {
  if (name == "parametric") return GVariant::Parametric;
  if (name == "mlp") return GVariant::Mlp;
  throw ValidationError("unknown g-model variant '" + name + "'");
}

// Shared world flags for simulate/benchmark.
struct WorldFlags {
  std::string world = "example1";
  double alpha = 0.3;
  double p = 0.8;
  std::string theta_check = "0.5,-1,0.8,-0.3,1.2";
  std::string zeta = "1.5,-0.7,0.2,0.9,-1.1";
  double eta = 3.0;
  int k = 2;

  void attach(CLI::App* cmd) {
    cmd->add_option("--world", world, "World kind: example1 | appendixc")
        ->check(CLI::IsMember({"example1", "appendixc"}));
    cmd->add_option("--alpha", alpha, "Example1: P(z=1)");
    cmd->add_option("--p", p, "Example1: P(y=z | z)");
    cmd->add_option("--theta-check", theta_check,
                    "AppendixC: comma-separated theta_check");
    cmd->add_option("--zeta", zeta, "AppendixC: comma-separated zeta");
    cmd->add_option("--eta", eta, "AppendixC: alignment coefficient");
    cmd->add_option("--k", k, "AppendixC: alternatives per task");
  }

  WorldSpec build() const {
    if (world == "example1") return Example1World{alpha, p};
    AppendixCWorld w;
    w.theta_check = to_vector(parse_double_list(theta_check));
    w.zeta = to_vector(parse_double_list(zeta));
    w.eta = eta;
    w.k = k;
    w.validate();
    return w;
  }
};

std::string estimator_report_csv(const EstimatorResult& result) {
  std::ostringstream out;
  out << "coefficient,value\n";
  for (int j = 0; j < result.beta_hat.d(); ++j)
    out << "beta_" << j + 1 << ',' << format_double(result.beta_hat.beta(j))
        << '\n';
  return out.str();
}

int run(int argc, char** argv) {
  CLI::App app{"AI-augmented estimation for choice-based conjoint analysis"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  std::string out, format = "json";
  app.add_option("--seed", seed, "Master seed")->capture_default_str();
  app.add_option("--out", out, "Output path (default: stdout)");
  app.add_option("--format", format, "Output format")
      ->check(CLI::IsMember({"json", "csv"}));

  // fit ----------------------------------------------------------------
  auto* fit_cmd = app.add_subcommand("fit", "Fit an estimator on CSV data");
  fit_cmd->fallthrough();
  std::string fit_estimator = "aae", fit_g_name = "parametric";
  std::string fit_primary, fit_auxiliary;
  int fit_epochs = 2000;
  fit_cmd->add_option("--estimator", fit_estimator,
                      "primary | auxiliary | naive | aae")
      ->check(CLI::IsMember({"primary", "auxiliary", "naive", "aae"}));
  fit_cmd->add_option("--g", fit_g_name, "AAE Step-1 model: parametric | mlp")
      ->check(CLI::IsMember({"parametric", "mlp"}));
  fit_cmd->add_option("--primary", fit_primary, "Primary dataset CSV");
  fit_cmd->add_option("--auxiliary", fit_auxiliary, "Auxiliary dataset CSV");
  fit_cmd->add_option("--epochs", fit_epochs, "MLP training epochs");

  // infer --------------------------------------------------------------
  auto* infer_cmd =
      app.add_subcommand("infer", "Fit the AAE and report plug-in asymptotics");
  infer_cmd->fallthrough();
  std::string infer_primary, infer_auxiliary, infer_g_name = "parametric";
  int infer_epochs = 2000;
  infer_cmd->add_option("--primary", infer_primary, "Primary dataset CSV")
      ->required();
  infer_cmd->add_option("--auxiliary", infer_auxiliary, "Auxiliary dataset CSV")
      ->required();
  infer_cmd->add_option("--g", infer_g_name, "parametric | mlp")
      ->check(CLI::IsMember({"parametric", "mlp"}));
  infer_cmd->add_option("--epochs", infer_epochs, "MLP training epochs");

  // simulate -----------------------------------------------------------
  auto* sim_cmd =
      app.add_subcommand("simulate", "Sample datasets from a synthetic world");
  sim_cmd->fallthrough();
  WorldFlags sim_world;
  sim_world.attach(sim_cmd);
  std::size_t sim_m = 100, sim_n = 1000;
  std::string sim_out_primary, sim_out_auxiliary;
  sim_cmd->add_option("--m", sim_m, "Primary sample size");
  sim_cmd->add_option("--n", sim_n, "Auxiliary sample size");
  sim_cmd->add_option("--out-primary", sim_out_primary, "Primary CSV path")
      ->required();
  sim_cmd
      ->add_option("--out-auxiliary", sim_out_auxiliary, "Auxiliary CSV path")
      ->required();

  // sweep-eta ----------------------------------------------------------
  auto* sweep_cmd = app.add_subcommand(
      "sweep-eta", "Dominance diagnostics across the eta grid");
  sweep_cmd->fallthrough();
  EtaSweepConfig sweep_cfg;
  std::string sweep_grid;
  sweep_cmd->add_option("--instances", sweep_cfg.instances,
                        "Random instances per eta");
  sweep_cmd->add_option("--draws", sweep_cfg.expectation_draws,
                        "Monte Carlo expectation draws per instance");
  sweep_cmd->add_option("--d", sweep_cfg.d, "Feature dimension");
  sweep_cmd->add_option("--k", sweep_cfg.k, "Alternatives per task");
  sweep_cmd->add_option("--eta-grid", sweep_grid,
                        "Comma-separated eta values");
  sweep_cmd->add_option("--threads", sweep_cfg.threads,
                        "Worker threads (0 = hardware)");

  // benchmark ----------------------------------------------------------
  auto* bench_cmd = app.add_subcommand(
      "benchmark", "Monte Carlo estimator comparison against the oracle");
  bench_cmd->fallthrough();
  WorldFlags bench_world;
  bench_world.attach(bench_cmd);
  std::size_t bench_m = 100, bench_n = 1000;
  int bench_reps = 50, bench_threads = 0;
  double bench_epsilon = 0.1;
  std::string bench_estimators = "primary,naive,aae";
  std::string bench_g = "parametric";
  bench_cmd->add_option("--m", bench_m, "Primary sample size");
  bench_cmd->add_option("--n", bench_n, "Auxiliary sample size");
  bench_cmd->add_option("--replications", bench_reps, "Replications");
  bench_cmd->add_option("--estimators", bench_estimators,
                        "Comma-separated estimator list");
  bench_cmd->add_option("--g", bench_g, "AAE Step-1 model")
      ->check(CLI::IsMember({"parametric", "mlp"}));
  bench_cmd->add_option("--epsilon", bench_epsilon,
                        "MAPE denominator adjustment");
  bench_cmd->add_option("--threads", bench_threads,
                        "Worker threads (0 = hardware)");

  // savings ------------------------------------------------------------
  auto* savings_cmd = app.add_subcommand(
      "savings", "Data savings from an error curve and a target error");
  savings_cmd->fallthrough();
  std::string savings_curve;
  double savings_error = 0.0, savings_n1 = 0.0;
  bool savings_extrapolate = false;
  savings_cmd->add_option("--curve", savings_curve, "Error curve CSV")
      ->required();
  savings_cmd->add_option("--aae-error", savings_error, "Target error")
      ->required();
  savings_cmd->add_option("--n1", savings_n1, "Primary size behind the target")
      ->required();
  savings_cmd->add_flag("--allow-extrapolation", savings_extrapolate,
                        "Extrapolate beyond the curve ends");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the parse error
    return code == 0 ? 0 : 2;
  }

  if (fit_cmd->parsed()) {
    const EstimatorKind kind = parse_estimator(fit_estimator);
    std::optional<Dataset> primary, auxiliary;
    if (!fit_primary.empty())
      primary = ingest_csv(fit_primary, DatasetKind::Primary);
    if (!fit_auxiliary.empty())
      auxiliary = ingest_csv(fit_auxiliary, DatasetKind::Auxiliary);
    EstimatorResult result;
    if (kind == EstimatorKind::AAE) {
      if (!primary || !auxiliary)
        throw ValidationError("fit: aae requires --primary and --auxiliary");
      AaeOptions opts;
      opts.g_fit.seed = seed;
      opts.g_fit.mlp_epochs = fit_epochs;
      result = fit_aae(*primary, *auxiliary, parse_g_variant(fit_g_name), opts);
    } else {
      result = fit_baseline(primary ? &*primary : nullptr,
                            auxiliary ? &*auxiliary : nullptr, kind);
    }
    write_output(out, format == "json" ? estimator_report_json(result, seed)
                                       : estimator_report_csv(result));
  } else if (infer_cmd->parsed()) {
    const Dataset primary = ingest_csv(infer_primary, DatasetKind::Primary);
    const Dataset auxiliary =
        ingest_csv(infer_auxiliary, DatasetKind::Auxiliary);
    AaeOptions opts;
    opts.g_fit.seed = seed;
    opts.g_fit.mlp_epochs = infer_epochs;
    const EstimatorResult result =
        fit_aae(primary, auxiliary, parse_g_variant(infer_g_name), opts);
    const AsymptoticReport report =
        estimate_asymptotics(primary, auxiliary, result.beta_hat,
                             *result.g_model);
    write_output(out, format == "json" ? asymptotic_report_json(report, seed)
                                       : asymptotic_report_csv(report));
  } else if (sim_cmd->parsed()) {
    const auto [primary, auxiliary] =
        sample_dataset(sim_world.build(), sim_m, sim_n, seed);
    emit_dataset_csv(primary, sim_out_primary);
    emit_dataset_csv(auxiliary, sim_out_auxiliary);
  } else if (sweep_cmd->parsed()) {
    if (!sweep_grid.empty())
      sweep_cfg.eta_grid = parse_double_list(sweep_grid);
    sweep_cfg.master_seed = seed;
    const EtaSweepResult result = eta_sweep(sweep_cfg);
    write_output(out, format == "json" ? sweep_json(result, seed)
                                       : sweep_csv(result));
  } else if (bench_cmd->parsed()) {
    SimulationConfig cfg;
    cfg.world = bench_world.build();
    cfg.m = bench_m;
    cfg.n = bench_n;
    cfg.replications = bench_reps;
    cfg.master_seed = seed;
    cfg.mape_epsilon = bench_epsilon;
    cfg.g_variant = parse_g_variant(bench_g);
    cfg.threads = bench_threads;
    cfg.estimators.clear();
    std::stringstream stream(bench_estimators);
    std::string name;
    while (std::getline(stream, name, ','))
      if (!name.empty()) cfg.estimators.push_back(parse_estimator(name));
    const BenchmarkResult result = monte_carlo_benchmark(cfg);
    write_output(out, format == "json" ? benchmark_json(result, seed)
                                       : benchmark_csv(result));
  } else if (savings_cmd->parsed()) {
    const ErrorCurve curve =
        parse_error_curve_csv(read_text_file(savings_curve));
    const SavingsEntry entry =
        data_savings(savings_error, curve, savings_n1, savings_extrapolate);
    if (format == "json") {
      write_output(out, savings_json(entry, seed));
    } else {
      std::ostringstream csv;
      csv << "n1,n2,percent,extrapolated\n"
          << format_double(entry.n1) << ',' << format_double(entry.n2) << ','
          << format_double(entry.percent) << ','
          << (entry.extrapolated ? 1 : 0) << '\n';
      write_output(out, csv.str());
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const aae::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
