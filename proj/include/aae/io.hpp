#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "aae/choice.hpp"
#include "aae/error.hpp"
#include "aae/estimators.hpp"
#include "aae/inference.hpp"
#include "aae/metrics.hpp"
#include "aae/simlab.hpp"

// Dataset CSV ingestion/emission and deterministic report serialization.
//
// Dataset CSV (long format, UTF-8, '.' decimal separator, header required):
//   task_id,alt,x_1,...,x_d,y,z
// One row per alternative with alt running 1..k within each task; the
// alt = 1 row carries the labels (y empty for auxiliary data).
//
// JSON reports: {"kind": ..., "seed": ..., "payload": ...} with matrices as
// row-major nested arrays plus explicit "rows"/"cols" fields. All floats
// are printed with 17 significant digits so reruns are byte-identical and
// round-trips are lossless.

namespace aae {

inline std::string format_double(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

inline void write_text_file(const std::string& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// ---------------------------------------------------------------------------
// Dataset CSV
// ---------------------------------------------------------------------------

inline std::string dataset_to_csv(const Dataset& dataset) {
  dataset.validate();
  std::ostringstream out;
  out << "task_id,alt";
  for (int c = 1; c <= dataset.d(); ++c) out << ",x_" << c;
  out << ",y,z\n";
  for (std::size_t i = 0; i < dataset.tasks.size(); ++i) {
    const ChoiceTask& t = dataset.tasks[i];
    for (int j = 0; j < t.k(); ++j) {
      out << i + 1 << ',' << j + 1;
      for (int c = 0; c < t.d(); ++c)
        out << ',' << format_double(t.features(j, c));
      if (j == 0) {
        out << ',';
        if (t.human_label) out << *t.human_label;
        out << ',';
        if (t.ai_label) out << *t.ai_label;
      } else {
        out << ",,";
      }
      out << '\n';
    }
  }
  return out.str();
}

inline void emit_dataset_csv(const Dataset& dataset, const std::string& path) {
  write_text_file(path, dataset_to_csv(dataset));
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(field);
  return fields;
}

inline double parse_feature(const std::string& text, std::size_t line_no) {
  if (text.empty())
    throw ValidationError("dataset CSV line " + std::to_string(line_no) +
                          ": empty feature value");
  std::size_t consumed = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &consumed);
  } catch (const std::exception&) {
    consumed = 0;
  }
  if (consumed != text.size() || !std::isfinite(value))
    throw ValidationError("dataset CSV line " + std::to_string(line_no) +
                          ": non-numeric feature '" + text + "'");
  return value;
}

inline int parse_label(const std::string& text, std::size_t line_no,
                       const char* name) {
  try {
    std::size_t consumed = 0;
    const int value = std::stoi(text, &consumed);
    if (consumed == text.size()) return value;
  } catch (const std::exception&) {
  }
  throw ValidationError("dataset CSV line " + std::to_string(line_no) +
                        ": invalid " + std::string(name) + " label '" + text +
                        "'");
}

}  // namespace detail

/// Parse the long-format dataset CSV. Auxiliary ingestion rejects files
/// carrying y labels; the y column itself may be present-but-empty or
/// absent entirely.
inline Dataset parse_dataset_csv(const std::string& text, DatasetKind kind) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw ValidationError("dataset CSV: empty file");

  const std::vector<std::string> header = detail::split_csv_line(line);
  if (header.size() < 4 || header[0] != "task_id" || header[1] != "alt")
    throw ValidationError(
        "dataset CSV: malformed header; expected task_id,alt,x_1..x_d,y,z");
  bool has_y = false;
  bool saw_labels = false;
  int d = 0;
  for (std::size_t c = 2; c < header.size(); ++c) {
    if (header[c] == "x_" + std::to_string(c - 1)) {
      d = static_cast<int>(c - 1);
    } else {
      const std::size_t rest = header.size() - c;
      if (rest == 2 && header[c] == "y" && header[c + 1] == "z") {
        has_y = true;
      } else if (rest == 1 && header[c] == "z") {
        has_y = false;
      } else {
        throw ValidationError("dataset CSV: malformed header at column '" +
                              header[c] + "'");
      }
      saw_labels = true;
      break;
    }
  }
  if (d == 0)
    throw ValidationError("dataset CSV: header has no feature columns");
  if (!saw_labels)
    throw ValidationError("dataset CSV: header is missing the label columns");
  if (kind == DatasetKind::Primary && !has_y)
    throw ValidationError("dataset CSV: primary data requires a y column");
  const std::size_t expected_fields = 2 + d + (has_y ? 2 : 1);

  Dataset dataset{kind, {}};
  std::vector<Eigen::RowVectorXd> rows;
  std::string cur_task_id;
  std::string y_text, z_text;
  std::size_t task_first_line = 0;
  std::size_t line_no = 1;

  auto flush_task = [&]() {
    if (rows.empty()) return;
    ChoiceTask task;
    const int k = static_cast<int>(rows.size());
    task.features.resize(k, d);
    for (int j = 0; j < k; ++j) task.features.row(j) = rows[j];

    if (z_text.empty())
      throw ValidationError("dataset CSV line " +
                            std::to_string(task_first_line) +
                            ": missing z label");
    task.ai_label = detail::parse_label(z_text, task_first_line, "z");
    if (kind == DatasetKind::Primary) {
      if (y_text.empty())
        throw ValidationError("dataset CSV line " +
                              std::to_string(task_first_line) +
                              ": primary data requires a y label");
      task.human_label = detail::parse_label(y_text, task_first_line, "y");
    } else if (!y_text.empty()) {
      throw ValidationError(
          "dataset CSV line " + std::to_string(task_first_line) +
          ": auxiliary data must not carry y labels (found '" + y_text + "')");
    }
    if (*task.ai_label < 0 || *task.ai_label > k ||
        (task.human_label && (*task.human_label < 0 || *task.human_label > k)))
      throw ValidationError("dataset CSV line " +
                            std::to_string(task_first_line) +
                            ": label outside {0.." + std::to_string(k) + "}");
    dataset.tasks.push_back(std::move(task));
    rows.clear();
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = detail::split_csv_line(line);
    if (fields.size() != expected_fields)
      throw ValidationError("dataset CSV line " + std::to_string(line_no) +
                            ": expected " + std::to_string(expected_fields) +
                            " fields, got " + std::to_string(fields.size()));
    const std::string& task_id = fields[0];
    const int alt = detail::parse_label(fields[1], line_no, "alt");

    if (task_id != cur_task_id) {
      flush_task();
      cur_task_id = task_id;
      task_first_line = line_no;
      if (alt != 1)
        throw ValidationError("dataset CSV line " + std::to_string(line_no) +
                              ": task must start at alt=1");
    } else if (alt != static_cast<int>(rows.size()) + 1) {
      throw ValidationError("dataset CSV line " + std::to_string(line_no) +
                            ": alternatives must be contiguous 1..k");
    }

    Eigen::RowVectorXd row(d);
    for (int c = 0; c < d; ++c)
      row(c) = detail::parse_feature(fields[2 + c], line_no);
    const std::string y_field = has_y ? fields[2 + d] : std::string();
    const std::string z_field = fields[2 + d + (has_y ? 1 : 0)];
    if (alt == 1) {
      y_text = y_field;
      z_text = z_field;
    } else if (!y_field.empty() || !z_field.empty()) {
      throw ValidationError("dataset CSV line " + std::to_string(line_no) +
                            ": labels are only allowed on the alt=1 row");
    }
    rows.push_back(std::move(row));
  }
  flush_task();
  if (dataset.tasks.empty())
    throw ValidationError("dataset CSV: no tasks found");
  for (const ChoiceTask& t : dataset.tasks)
    if (t.k() != dataset.k())
      throw ValidationError("dataset CSV: tasks have inconsistent k");
  dataset.validate();
  return dataset;
}

inline Dataset ingest_csv(const std::string& path, DatasetKind kind) {
  return parse_dataset_csv(read_text_file(path), kind);
}

// ---------------------------------------------------------------------------
// JSON / CSV report emission
// ---------------------------------------------------------------------------

namespace detail {

inline std::string json_vector(const Vector& v) {
  std::string out = "[";
  for (int i = 0; i < v.size(); ++i) {
    if (i > 0) out += ",";
    out += format_double(v(i));
  }
  return out + "]";
}

inline std::string json_matrix(const Matrix& m) {
  std::string out = "{\"rows\":" + std::to_string(m.rows()) +
                    ",\"cols\":" + std::to_string(m.cols()) + ",\"data\":[";
  for (int r = 0; r < m.rows(); ++r) {
    if (r > 0) out += ",";
    out += "[";
    for (int c = 0; c < m.cols(); ++c) {
      if (c > 0) out += ",";
      out += format_double(m(r, c));
    }
    out += "]";
  }
  return out + "]}";
}

inline std::string json_report(const std::string& kind, std::uint64_t seed,
                               const std::string& payload) {
  return "{\"kind\":\"" + kind + "\",\"seed\":" + std::to_string(seed) +
         ",\"payload\":" + payload + "}\n";
}

}  // namespace detail

inline std::string estimator_report_json(const EstimatorResult& result,
                                         std::uint64_t seed) {
  std::string payload = "{\"estimator\":\"" +
                        std::string(to_string(result.kind)) + "\"" +
                        ",\"beta_hat\":" + detail::json_vector(result.beta_hat.beta) +
                        ",\"m\":" + std::to_string(result.m) +
                        ",\"n\":" + std::to_string(result.n) +
                        ",\"rho\":" + format_double(result.rho());
  if (result.g_model && result.g_model->is_parametric()) {
    const auto& g = result.g_model->parametric();
    payload += ",\"g_model\":{\"variant\":\"parametric\",\"theta_check\":" +
               detail::json_vector(g.theta_check) +
               ",\"eta\":" + format_double(g.eta) + "}";
  } else if (result.g_model) {
    payload += ",\"g_model\":{\"variant\":\"mlp\",\"param_count\":" +
               std::to_string(result.g_model->param_count()) + "}";
  }
  payload += "}";
  return detail::json_report("estimator_result", seed, payload);
}

inline std::string asymptotic_report_json(const AsymptoticReport& report,
                                          std::uint64_t seed) {
  std::string payload =
      "{\"m\":" + std::to_string(report.m) +
      ",\"n\":" + std::to_string(report.n) +
      ",\"q\":" + std::to_string(report.q) +
      ",\"rho\":" + format_double(report.rho) +
      ",\"omega_hat\":" + detail::json_matrix(report.omega_hat) +
      ",\"gamma_hat\":" + detail::json_matrix(report.gamma_hat) +
      ",\"lambda_hat\":" + detail::json_matrix(report.lambda_hat) +
      ",\"j_hat\":" + detail::json_matrix(report.j_hat) +
      ",\"j_check_hat\":" + detail::json_matrix(report.j_check_hat) +
      ",\"var_aae\":" + detail::json_matrix(report.var_aae) +
      ",\"var_primary\":" + detail::json_matrix(report.var_primary) +
      ",\"dominance_eigs\":" + detail::json_vector(report.dominance_eigs) +
      "}";
  return detail::json_report("asymptotic_report", seed, payload);
}

/// Long-format CSV of the plug-in matrices: matrix,row,col,value.
inline std::string asymptotic_report_csv(const AsymptoticReport& report) {
  std::ostringstream out;
  out << "matrix,row,col,value\n";
  const auto emit = [&](const char* name, const Matrix& m) {
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c)
        out << name << ',' << r << ',' << c << ','
            << format_double(m(r, c)) << '\n';
  };
  emit("omega_hat", report.omega_hat);
  emit("gamma_hat", report.gamma_hat);
  emit("lambda_hat", report.lambda_hat);
  emit("j_hat", report.j_hat);
  emit("j_check_hat", report.j_check_hat);
  emit("var_aae", report.var_aae);
  emit("var_primary", report.var_primary);
  for (int i = 0; i < report.dominance_eigs.size(); ++i)
    out << "dominance_eigs," << i << ",0,"
        << format_double(report.dominance_eigs(i)) << '\n';
  return out.str();
}

/// Plot-ready long-format sweep table.
inline std::string sweep_csv(const EtaSweepResult& result) {
  std::ostringstream out;
  out << "eta,instance,min_eig,abs_prob_diff\n";
  for (const EtaSweepRow& row : result.rows)
    out << format_double(row.eta) << ',' << row.instance << ','
        << format_double(row.min_eig) << ','
        << format_double(row.abs_prob_diff) << '\n';
  return out.str();
}

inline std::string sweep_json(const EtaSweepResult& result,
                              std::uint64_t seed) {
  std::string payload = "{\"resampled\":" + std::to_string(result.resampled) +
                        ",\"rows\":[";
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const EtaSweepRow& row = result.rows[i];
    if (i > 0) payload += ",";
    payload += "{\"eta\":" + format_double(row.eta) +
               ",\"instance\":" + std::to_string(row.instance) +
               ",\"min_eig\":" + format_double(row.min_eig) +
               ",\"abs_prob_diff\":" + format_double(row.abs_prob_diff) + "}";
  }
  payload += "],\"aggregates\":[";
  for (std::size_t i = 0; i < result.aggregates.size(); ++i) {
    const EtaAggregateRow& agg = result.aggregates[i];
    if (i > 0) payload += ",";
    payload += "{\"eta\":" + format_double(agg.eta) +
               ",\"min_eig_mean\":" + format_double(agg.min_eig_mean) +
               ",\"min_eig_min\":" + format_double(agg.min_eig_min) +
               ",\"min_eig_max\":" + format_double(agg.min_eig_max) +
               ",\"abs_prob_diff_mean\":" + format_double(agg.apd_mean) +
               ",\"abs_prob_diff_min\":" + format_double(agg.apd_min) +
               ",\"abs_prob_diff_max\":" + format_double(agg.apd_max) + "}";
  }
  payload += "]}";
  return detail::json_report("eta_sweep", seed, payload);
}

inline std::string benchmark_csv(const BenchmarkResult& result) {
  std::ostringstream out;
  out << "estimator,replication,ok,mape,mse,l2\n";
  for (const EstimatorSummary& summary : result.estimators)
    for (std::size_t rep = 0; rep < summary.cells.size(); ++rep) {
      const BenchmarkCell& cell = summary.cells[rep];
      out << to_string(summary.kind) << ',' << rep << ','
          << (cell.ok ? 1 : 0) << ',' << format_double(cell.mape) << ','
          << format_double(cell.mse) << ',' << format_double(cell.l2) << '\n';
    }
  return out.str();
}

inline std::string benchmark_json(const BenchmarkResult& result,
                                  std::uint64_t seed) {
  std::string payload =
      "{\"replications\":" + std::to_string(result.replications) +
      ",\"mape_epsilon\":" + format_double(result.mape_epsilon) +
      ",\"beta_star\":" + detail::json_vector(result.beta_star.beta) +
      ",\"estimators\":[";
  for (std::size_t e = 0; e < result.estimators.size(); ++e) {
    const EstimatorSummary& s = result.estimators[e];
    if (e > 0) payload += ",";
    payload += "{\"estimator\":\"" + std::string(to_string(s.kind)) + "\"" +
               ",\"mean_mape\":" + format_double(s.mean_mape) +
               ",\"sd_mape\":" + format_double(s.sd_mape) +
               ",\"mean_mse\":" + format_double(s.mean_mse) +
               ",\"mean_l2\":" + format_double(s.mean_l2) +
               ",\"failures\":" + std::to_string(s.failures) + ",\"mape\":[";
    for (std::size_t rep = 0; rep < s.cells.size(); ++rep) {
      if (rep > 0) payload += ",";
      payload += s.cells[rep].ok ? format_double(s.cells[rep].mape) : "null";
    }
    payload += "]}";
  }
  payload += "]}";
  return detail::json_report("benchmark", seed, payload);
}

inline std::string metrics_report_json(const MetricsReport& report,
                                       std::uint64_t seed) {
  std::string payload =
      "{\"mape\":" + format_double(report.mape) +
      ",\"mse\":" + format_double(report.mse) +
      ",\"epsilon\":" + format_double(report.epsilon) +
      ",\"per_feature_ape\":" + detail::json_vector(report.per_feature_ape) +
      ",\"savings\":[";
  for (std::size_t i = 0; i < report.savings.size(); ++i) {
    const SavingsEntry& s = report.savings[i];
    if (i > 0) payload += ",";
    payload += "{\"n1\":" + format_double(s.n1) +
               ",\"n2\":" + format_double(s.n2) +
               ",\"percent\":" + format_double(s.percent) +
               ",\"extrapolated\":" + (s.extrapolated ? "true" : "false") +
               "}";
  }
  payload += "]}";
  return detail::json_report("metrics_report", seed, payload);
}

inline std::string savings_json(const SavingsEntry& entry,
                                std::uint64_t seed) {
  const std::string payload =
      "{\"n1\":" + format_double(entry.n1) +
      ",\"n2\":" + format_double(entry.n2) +
      ",\"percent\":" + format_double(entry.percent) +
      ",\"extrapolated\":" + (entry.extrapolated ? "true" : "false") + "}";
  return detail::json_report("data_savings", seed, payload);
}

/// Error-curve CSV: size,error rows, strictly increasing sizes.
inline ErrorCurve parse_error_curve_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw ValidationError("error curve CSV: empty file");
  const std::vector<std::string> header = detail::split_csv_line(line);
  if (header.size() != 2 || header[0] != "size" || header[1] != "error")
    throw ValidationError("error curve CSV: expected header 'size,error'");
  ErrorCurve curve;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = detail::split_csv_line(line);
    if (fields.size() != 2)
      throw ValidationError("error curve CSV line " +
                            std::to_string(line_no) + ": expected 2 fields");
    curve.points.emplace_back(detail::parse_feature(fields[0], line_no),
                              detail::parse_feature(fields[1], line_no));
  }
  curve.validate();
  return curve;
}

inline std::string error_curve_to_csv(const ErrorCurve& curve) {
  std::ostringstream out;
  out << "size,error\n";
  for (const auto& [size, error] : curve.points)
    out << format_double(size) << ',' << format_double(error) << '\n';
  return out.str();
}

}  // namespace aae
