// Copyright 2026 The PUMC Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <pumc/data.hpp>
#include <pumc/loss.hpp>
#include <pumc/solver.hpp>

#include <cstdint>
#include <fstream>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pumc {

/// Raised for invalid configuration or arguments (exit status 1).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Command { Synth, Fit, Eval, Bench };
enum class Algorithm { Accelerated, Basic };

/// Default regularization weight for an m x n problem: 0.7 (sqrt(m) + sqrt(n)).
double auto_lambda(Index rows, Index cols);

struct ExperimentConfig {
  Command command = Command::Bench;

  // Data source: synthetic (sizes, k, q) or a ratings file.
  std::string ratings_path;
  std::optional<double> threshold;
  std::vector<Index> sizes{500};
  Index k = 5;
  double q = 0.5;

  std::string regularizer = "tnn:5";
  std::vector<double> deltas{0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  int repetitions = 10;
  Algorithm algorithm = Algorithm::Accelerated;

  SolverParams solver;
  bool auto_lambda = true;        ///< lambda = auto_lambda(m, n) per cell
  double lambda_init_factor = 10; ///< lambda_0 = factor * lambda when not set explicitly
  bool explicit_lambda_init = false;
  std::optional<double> omega;    ///< empty means choose_omega(delta)

  std::string output = "bench.csv";
  bool curves = true;             ///< also write <output stem>.curves.csv
  int workers = 1;

  /// Throws UsageError on violated invariants.
  void validate() const;
};

/// Parses flat key=value text ('#' comments, blank lines ignored).
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

struct MetricsRecord {
  Index m = 0;
  Index n = 0;
  double delta = 0.0;
  int rep = 0;
  std::string regularizer;
  double mse = 0.0;
  double recovery_error = 0.0;
  double seconds = 0.0;
  Index final_rank = 0;
  int iterations = 0;
  double final_F = 0.0;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

inline constexpr const char* kMetricsHeader =
    "m,n,delta,rep,regularizer,mse,recovery_error,seconds,final_rank,iterations,final_F";

/// Path of the JSONL sidecar for a CSV report path.
std::string jsonl_sidecar(const std::string& csv_path);

std::string to_csv_line(const MetricsRecord& r);
std::string to_json_line(const MetricsRecord& r);

/// Writes the CSV report and its JSONL sidecar.
void emit_report(const std::vector<MetricsRecord>& records, const std::string& path);
std::vector<MetricsRecord> read_report_csv(const std::string& path);
std::vector<MetricsRecord> read_report_jsonl(const std::string& path);

/// Append-only writer shared by bench workers; flushes every record.
class ReportWriter {
 public:
  explicit ReportWriter(const std::string& csv_path);
  void append(const MetricsRecord& r);

 private:
  std::mutex mutex_;
  std::ofstream csv_;
  std::ofstream jsonl_;
};

/// One point of an MSE-vs-time curve.
struct CurvePoint {
  int iter = 0;
  double seconds = 0.0;
  double mse = 0.0;
  double objective = 0.0;
  Index rank = 0;
};

/// Everything produced by one bench cell.
struct CellResult {
  MetricsRecord record;
  std::vector<CurvePoint> curve;
  std::vector<std::string> notes;
};

/// Fits one (truth, delta) cell and evaluates it on the held-out positives.
CellResult run_cell(const ExperimentConfig& config, const BinaryMatrix& truth, double delta, int rep,
                    std::uint64_t seed, bool want_curve);

/// Runs the whole sweep; returns the records in cell order.
std::vector<MetricsRecord> run_bench(const ExperimentConfig& config, std::ostream& log);

/// A fitted model as stored on disk.
struct StoredModel {
  FactoredMatrix<double> factors;
  double elapsed_seconds = 0.0;
};

/// Model file: factors in text form, full double precision.
void write_model(const std::string& path, const StoredModel& model);
StoredModel read_model(const std::string& path);
void write_trace_csv(const std::string& path, const std::vector<TraceRecord>& trace);

std::string to_json(const EvaluationReport& report);

/// Entry point of the command-line tool. Returns the process exit status:
/// 0 success, 1 usage error, 2 runtime failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pumc
