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

#include <pumc/cli.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <thread>

namespace pumc {

namespace {

using json = nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char delim) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, delim)) out.push_back(trim(item));
  if (!s.empty() && s.back() == delim) out.emplace_back();
  return out;
}

double to_double(const std::string& text, const std::string& key) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw UsageError("bad number for '" + key + "': '" + text + "'");
  }
  if (used != text.size()) throw UsageError("bad number for '" + key + "': '" + text + "'");
  return v;
}

long long to_integer(const std::string& text, const std::string& key) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    throw UsageError("bad integer for '" + key + "': '" + text + "'");
  }
  if (used != text.size()) throw UsageError("bad integer for '" + key + "': '" + text + "'");
  return v;
}

bool to_bool(const std::string& text, const std::string& key) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw UsageError("bad flag for '" + key + "': '" + text + "'");
}

/// "auto" -> empty, anything else -> the number.
std::optional<double> auto_or_number(const std::string& text, const std::string& key) {
  if (text == "auto") return std::nullopt;
  return to_double(text, key);
}

ContinuationMode parse_continuation(const std::string& text) {
  if (text == "printed") return ContinuationMode::AsPrinted;
  if (text == "geometric") return ContinuationMode::Geometric;
  throw UsageError("continuation must be 'printed' or 'geometric'");
}

Algorithm parse_algorithm(const std::string& text) {
  if (text == "accel") return Algorithm::Accelerated;
  if (text == "basic") return Algorithm::Basic;
  throw UsageError("algorithm must be 'accel' or 'basic'");
}

std::string stem_of(const std::string& path) {
  const auto dot = path.rfind('.');
  const auto slash = path.rfind('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path;
  return path.substr(0, dot);
}

/// Solver parameters for one problem: fills lambda and lambda_0 when the
/// configuration leaves them automatic.
SolverParams cell_params(const ExperimentConfig& config, Index rows, Index cols, std::uint64_t seed) {
  SolverParams p = config.solver;
  if (config.auto_lambda) p.lambda = auto_lambda(rows, cols);
  if (!config.explicit_lambda_init)
    p.lambda_init = config.lambda_init_factor > 1.0 ? config.lambda_init_factor * p.lambda : -1.0;
  p.seed = seed;
  return p;
}

FitResult<double> run_fit(Algorithm algorithm, const BinaryMatrix& a, double omega,
                          const RegularizerSpec& spec, const SolverParams& params,
                          const IterationObserver<double>& observer) {
  return algorithm == Algorithm::Basic ? fit_basic<double>(a, omega, spec, params, observer)
                                       : fit_accel<double>(a, omega, spec, params, observer);
}

}  // namespace

double auto_lambda(Index rows, Index cols) {
  return 0.7 * (std::sqrt(static_cast<double>(rows)) + std::sqrt(static_cast<double>(cols)));
}

void ExperimentConfig::validate() const {
  if (deltas.empty()) throw UsageError("delta grid is empty");
  for (double d : deltas)
    if (!(d > 0.0 && d <= 1.0)) throw UsageError("delta values must lie in (0, 1]");
  if (repetitions < 1) throw UsageError("repetitions must be >= 1");
  if (workers < 1) throw UsageError("workers must be >= 1");
  if (ratings_path.empty()) {
    if (sizes.empty()) throw UsageError("no matrix sizes given");
    for (Index m : sizes)
      if (m <= k) throw UsageError("every m must exceed k");
  }
  if (k < 1) throw UsageError("k must be >= 1");
  if (omega && !(*omega > 0.0 && *omega < 1.0)) throw UsageError("omega must lie in (0, 1)");
  try {
    parse_regularizer(regularizer);
    SolverParams probe = solver;
    if (auto_lambda) probe.lambda = 1.0;
    if (!explicit_lambda_init) probe.lambda_init = -1.0;
    resolve_rho(probe, omega.value_or(0.25));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (!explicit_lambda_init && !(lambda_init_factor >= 0.0))
    throw UsageError("lambda0_factor must be >= 0");
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "command") {
      if (value != "bench") throw UsageError("config files drive the bench command only");
    } else if (key == "ratings") {
      c.ratings_path = value;
    } else if (key == "threshold") {
      c.threshold = auto_or_number(value, key);
    } else if (key == "m") {
      c.sizes.clear();
      for (const auto& s : split(value, ',')) c.sizes.push_back(to_integer(s, key));
    } else if (key == "k") {
      c.k = to_integer(value, key);
    } else if (key == "q") {
      c.q = to_double(value, key);
    } else if (key == "reg") {
      c.regularizer = value;
    } else if (key == "deltas") {
      c.deltas.clear();
      for (const auto& s : split(value, ',')) c.deltas.push_back(to_double(s, key));
    } else if (key == "reps") {
      c.repetitions = static_cast<int>(to_integer(value, key));
    } else if (key == "algorithm") {
      c.algorithm = parse_algorithm(value);
    } else if (key == "lambda") {
      const auto v = auto_or_number(value, key);
      c.auto_lambda = !v;
      c.solver.lambda = v.value_or(0.0);
    } else if (key == "lambda0") {
      const auto v = auto_or_number(value, key);
      c.explicit_lambda_init = v.has_value();
      c.solver.lambda_init = v.value_or(-1.0);
    } else if (key == "lambda0_factor") {
      c.lambda_init_factor = to_double(value, key);
    } else if (key == "upsilon") {
      c.solver.upsilon = to_double(value, key);
    } else if (key == "rho") {
      c.solver.rho = auto_or_number(value, key).value_or(0.0);
    } else if (key == "max_iter") {
      c.solver.max_iter = static_cast<int>(to_integer(value, key));
    } else if (key == "tol") {
      c.solver.tol = to_double(value, key);
    } else if (key == "power_iters") {
      c.solver.power_iters = static_cast<int>(to_integer(value, key));
    } else if (key == "continuation") {
      c.solver.continuation = parse_continuation(value);
    } else if (key == "seed") {
      c.solver.seed = static_cast<std::uint64_t>(to_integer(value, key));
    } else if (key == "omega") {
      c.omega = auto_or_number(value, key);
    } else if (key == "out") {
      c.output = value;
    } else if (key == "curves") {
      c.curves = to_bool(value, key);
    } else if (key == "workers") {
      c.workers = static_cast<int>(to_integer(value, key));
    } else {
      throw UsageError("unknown config key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config " + path);
  return parse_config(in);
}

std::string jsonl_sidecar(const std::string& csv_path) { return stem_of(csv_path) + ".jsonl"; }

std::string to_csv_line(const MetricsRecord& r) {
  std::ostringstream out;
  out << r.m << ',' << r.n << ',' << format_double(r.delta) << ',' << r.rep << ',' << r.regularizer
      << ',' << format_double(r.mse) << ',' << format_double(r.recovery_error) << ','
      << format_double(r.seconds) << ',' << r.final_rank << ',' << r.iterations << ','
      << format_double(r.final_F);
  return out.str();
}

std::string to_json_line(const MetricsRecord& r) {
  json j;
  j["m"] = r.m;
  j["n"] = r.n;
  j["delta"] = r.delta;
  j["rep"] = r.rep;
  j["regularizer"] = r.regularizer;
  j["mse"] = r.mse;
  j["recovery_error"] = r.recovery_error;
  j["seconds"] = r.seconds;
  j["final_rank"] = r.final_rank;
  j["iterations"] = r.iterations;
  j["final_F"] = r.final_F;
  return j.dump();
}

void emit_report(const std::vector<MetricsRecord>& records, const std::string& path) {
  std::ofstream csv(path);
  std::ofstream jsonl(jsonl_sidecar(path));
  if (!csv || !jsonl) throw std::runtime_error("cannot write report " + path);
  csv << kMetricsHeader << '\n';
  for (const auto& r : records) {
    csv << to_csv_line(r) << '\n';
    jsonl << to_json_line(r) << '\n';
  }
  if (!csv || !jsonl) throw std::runtime_error("report write failed: " + path);
}

std::vector<MetricsRecord> read_report_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != kMetricsHeader)
    throw std::runtime_error("report " + path + ": unexpected header");
  std::vector<MetricsRecord> out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 11) throw std::runtime_error("report " + path + ": bad row");
    MetricsRecord r;
    r.m = to_integer(f[0], "m");
    r.n = to_integer(f[1], "n");
    r.delta = to_double(f[2], "delta");
    r.rep = static_cast<int>(to_integer(f[3], "rep"));
    r.regularizer = f[4];
    r.mse = to_double(f[5], "mse");
    r.recovery_error = to_double(f[6], "recovery_error");
    r.seconds = to_double(f[7], "seconds");
    r.final_rank = to_integer(f[8], "final_rank");
    r.iterations = static_cast<int>(to_integer(f[9], "iterations"));
    r.final_F = to_double(f[10], "final_F");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<MetricsRecord> read_report_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<MetricsRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const json j = json::parse(line);
    MetricsRecord r;
    r.m = j.at("m").get<Index>();
    r.n = j.at("n").get<Index>();
    r.delta = j.at("delta").get<double>();
    r.rep = j.at("rep").get<int>();
    r.regularizer = j.at("regularizer").get<std::string>();
    r.mse = j.at("mse").get<double>();
    r.recovery_error = j.at("recovery_error").get<double>();
    r.seconds = j.at("seconds").get<double>();
    r.final_rank = j.at("final_rank").get<Index>();
    r.iterations = j.at("iterations").get<int>();
    r.final_F = j.at("final_F").get<double>();
    out.push_back(std::move(r));
  }
  return out;
}

ReportWriter::ReportWriter(const std::string& csv_path)
    : csv_(csv_path), jsonl_(jsonl_sidecar(csv_path)) {
  if (!csv_ || !jsonl_) throw std::runtime_error("cannot write report " + csv_path);
  csv_ << kMetricsHeader << '\n' << std::flush;
}

void ReportWriter::append(const MetricsRecord& r) {
  std::lock_guard<std::mutex> lock(mutex_);
  csv_ << to_csv_line(r) << '\n' << std::flush;
  jsonl_ << to_json_line(r) << '\n' << std::flush;
}

CellResult run_cell(const ExperimentConfig& config, const BinaryMatrix& truth, double delta, int rep,
                    std::uint64_t seed, bool want_curve) {
  const RegularizerSpec spec = parse_regularizer(config.regularizer);
  const SampleSplit split = sample_one_sided(truth, delta, derive_seed(seed, {0}));
  const BinaryMatrix a = split.observation();
  const double omega = config.omega.value_or(choose_omega(delta));
  const SolverParams params = cell_params(config, truth.rows(), truth.cols(), derive_seed(seed, {1}));

  CellResult cell;
  double observer_seconds = 0.0;
  IterationObserver<double> observer;
  if (want_curve) {
    observer = [&](const IterationView<double>& view) {
      const auto t0 = std::chrono::steady_clock::now();
      cell.curve.push_back(CurvePoint{view.iter, view.elapsed_seconds,
                                      masked_mse(view.model, truth, split.heldout), 0.0,
                                      view.model.rank()});
      observer_seconds +=
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
  }
  const auto t0 = std::chrono::steady_clock::now();
  FitResult<double> fit = run_fit(config.algorithm, a, omega, spec, params, observer);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() - observer_seconds;
  for (std::size_t i = 0; i < cell.curve.size() && i < fit.trace.size(); ++i)
    cell.curve[i].objective = fit.trace[i].objective;

  MetricsRecord& r = cell.record;
  r.m = truth.rows();
  r.n = truth.cols();
  r.delta = delta;
  r.rep = rep;
  r.regularizer = config.regularizer;
  r.mse = masked_mse(fit.model, truth, split.heldout);
  r.recovery_error = recovery_error(fit.model, truth);
  r.seconds = wall;
  r.final_rank = fit.model.rank();
  r.iterations = static_cast<int>(fit.trace.size());
  r.final_F = fit.trace.empty() ? fit.initial_objective : fit.trace.back().objective;
  cell.notes = std::move(fit.notes);
  return cell;
}

std::vector<MetricsRecord> run_bench(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  const std::uint64_t master = config.solver.seed;

  std::optional<BinaryMatrix> ratings;
  if (!config.ratings_path.empty()) {
    RatingsData data = ingest_ratings(config.ratings_path, config.threshold);
    log << "ratings: " << data.matrix.rows() << " x " << data.matrix.cols() << ", " << data.ratings
        << " ratings, threshold " << data.threshold << ", " << data.matrix.nnz() << " positives\n";
    for (const auto& w : data.warnings) log << "warning: " << w << '\n';
    ratings = std::move(data.matrix);
  }

  struct Cell {
    std::size_t size_index;
    std::size_t delta_index;
    int rep;
  };
  std::vector<Cell> cells;
  const std::size_t size_count = ratings ? 1 : config.sizes.size();
  for (std::size_t s = 0; s < size_count; ++s)
    for (std::size_t d = 0; d < config.deltas.size(); ++d)
      for (int r = 0; r < config.repetitions; ++r) cells.push_back({s, d, r});

  ReportWriter writer(config.output);
  std::ofstream curves;
  if (config.curves) {
    curves.open(stem_of(config.output) + ".curves.csv");
    if (!curves) throw std::runtime_error("cannot write curves for " + config.output);
    curves << "m,n,delta,rep,iter,seconds,mse,objective,rank\n" << std::flush;
  }

  std::vector<std::optional<MetricsRecord>> results(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex io_mutex;
  std::exception_ptr failure;

  auto worker = [&] {
    while (true) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= cells.size()) return;
      {
        std::lock_guard<std::mutex> lock(io_mutex);
        if (failure) return;
      }
      const Cell& c = cells[idx];
      try {
        const auto s = static_cast<std::uint64_t>(c.size_index);
        const auto rep = static_cast<std::uint64_t>(c.rep);
        const BinaryMatrix truth =
            ratings ? *ratings
                    : gen_synthetic(config.sizes[c.size_index], config.k, config.q,
                                    derive_seed(master, {1, s, rep}));
        const std::uint64_t seed =
            derive_seed(master, {2, s, static_cast<std::uint64_t>(c.delta_index), rep});
        CellResult cell =
            run_cell(config, truth, config.deltas[c.delta_index], c.rep, seed, config.curves);
        writer.append(cell.record);
        std::lock_guard<std::mutex> lock(io_mutex);
        if (config.curves) {
          for (const auto& p : cell.curve)
            curves << cell.record.m << ',' << cell.record.n << ',' << format_double(cell.record.delta)
                   << ',' << cell.record.rep << ',' << p.iter << ',' << format_double(p.seconds)
                   << ',' << format_double(p.mse) << ',' << format_double(p.objective) << ','
                   << p.rank << '\n';
          curves << std::flush;
        }
        log << "m=" << cell.record.m << " delta=" << cell.record.delta << " rep=" << cell.record.rep
            << " mse=" << cell.record.mse << " rank=" << cell.record.final_rank
            << " iters=" << cell.record.iterations << " seconds=" << cell.record.seconds << '\n';
        for (const auto& n : cell.notes) log << "note: " << n << '\n';
        results[idx] = std::move(cell.record);
      } catch (...) {
        std::lock_guard<std::mutex> lock(io_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  const int thread_count = std::min<int>(config.workers, static_cast<int>(cells.size()));
  if (thread_count <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < thread_count; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<MetricsRecord> out;
  out.reserve(results.size());
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

void write_model(const std::string& path, const StoredModel& model) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  const auto& f = model.factors;
  out << "pumc-model 1\n"
      << f.rows << ' ' << f.cols << ' ' << f.rank() << ' ' << format_double(model.elapsed_seconds)
      << '\n';
  auto write_row = [&](const auto& row) {
    for (Index j = 0; j < row.size(); ++j) out << (j ? " " : "") << format_double(row[j]);
    out << '\n';
  };
  write_row(f.values);
  for (Index i = 0; i < f.rows; ++i) write_row(f.left.row(i));
  for (Index i = 0; i < f.cols; ++i) write_row(f.right.row(i));
  if (!out) throw std::runtime_error("write failed: " + path);
}

StoredModel read_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string magic;
  int version = 0;
  Index rows = 0;
  Index cols = 0;
  Index rank = 0;
  StoredModel model;
  if (!(in >> magic >> version) || magic != "pumc-model" || version != 1)
    throw std::runtime_error(path + ": not a model file");
  if (!(in >> rows >> cols >> rank >> model.elapsed_seconds) || rows < 0 || cols < 0 || rank < 0 ||
      rank > std::min(rows, cols))
    throw std::runtime_error(path + ": bad model header");
  auto& f = model.factors;
  f = FactoredMatrix<double>::zero(rows, cols);
  f.values.resize(rank);
  f.left.resize(rows, rank);
  f.right.resize(cols, rank);
  for (Index j = 0; j < rank; ++j) in >> f.values[j];
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < rank; ++j) in >> f.left(i, j);
  for (Index i = 0; i < cols; ++i)
    for (Index j = 0; j < rank; ++j) in >> f.right(i, j);
  if (!in) throw std::runtime_error(path + ": truncated model file");
  return model;
}

void write_trace_csv(const std::string& path, const std::vector<TraceRecord>& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "iter,objective,lambda,rank,step_norm,elapsed_seconds,subspace_width,restarted\n";
  for (const auto& t : trace)
    out << t.iter << ',' << format_double(t.objective) << ',' << format_double(t.lambda) << ','
        << t.rank << ',' << format_double(t.step_norm) << ',' << format_double(t.elapsed_seconds)
        << ',' << t.subspace_width << ',' << (t.restarted ? 1 : 0) << '\n';
}

std::string to_json(const EvaluationReport& report) {
  json j;
  j["mse"] = report.mse;
  j["recovery_error"] = report.recovery_error;
  j["weighted_label_error"] = report.weighted_label_error;
  j["elapsed_seconds"] = report.elapsed_seconds;
  j["final_rank"] = report.final_rank;
  return j.dump(2);
}

namespace {

struct FitOptions {
  std::string input;
  std::string ratings;
  std::string threshold = "auto";
  double delta = 1.0;
  std::string omega = "auto";
  std::string reg = "tnn:5";
  std::string lambda = "auto";
  std::string lambda0 = "auto";
  double upsilon = 0.5;
  std::string rho = "auto";
  int max_iter = 500;
  double tol = 1e-5;
  int power_iters = 3;
  std::uint64_t seed = 0;
  std::string algorithm = "accel";
  std::string continuation = "printed";
  std::string out;
};

int do_synth(Index m, Index k, double q, std::uint64_t seed, const std::string& out_path,
             std::ostream& out) {
  const BinaryMatrix mat = gen_synthetic(m, k, q, seed);
  write_binary_matrix(out_path, mat);
  out << "wrote " << out_path << ": " << m << " x " << m << ", " << mat.nnz() << " positives\n";
  return 0;
}

int do_fit(const FitOptions& o, std::ostream& out) {
  if (o.input.empty() == o.ratings.empty()) throw UsageError("give exactly one of --input, --ratings");
  if (!(o.delta > 0.0 && o.delta <= 1.0)) throw UsageError("--delta must lie in (0, 1]");
  const std::optional<double> omega_opt = auto_or_number(o.omega, "omega");
  if (omega_opt && !(*omega_opt > 0.0 && *omega_opt < 1.0)) throw UsageError("--omega must lie in (0, 1)");
  RegularizerSpec spec;
  try {
    spec = parse_regularizer(o.reg);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  BinaryMatrix truth;
  if (!o.ratings.empty()) {
    RatingsData data = ingest_ratings(o.ratings, auto_or_number(o.threshold, "threshold"));
    for (const auto& w : data.warnings) out << "warning: " << w << '\n';
    truth = std::move(data.matrix);
  } else {
    truth = read_binary_matrix(o.input);
  }

  const SampleSplit split = sample_one_sided(truth, o.delta, derive_seed(o.seed, {0}));
  const BinaryMatrix a = split.observation();
  const double omega = omega_opt.value_or(choose_omega(o.delta));

  SolverParams p;
  const auto lambda = auto_or_number(o.lambda, "lambda");
  p.lambda = lambda.value_or(auto_lambda(truth.rows(), truth.cols()));
  const auto lambda0 = auto_or_number(o.lambda0, "lambda0");
  p.lambda_init = lambda0.value_or(lambda ? -1.0 : 10.0 * p.lambda);
  p.upsilon = o.upsilon;
  p.rho = auto_or_number(o.rho, "rho").value_or(0.0);
  p.max_iter = o.max_iter;
  p.tol = o.tol;
  p.power_iters = o.power_iters;
  p.seed = derive_seed(o.seed, {1});
  p.continuation = parse_continuation(o.continuation);
  try {
    resolve_rho(p, omega);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const auto t0 = std::chrono::steady_clock::now();
  FitResult<double> fit = run_fit(parse_algorithm(o.algorithm), a, omega, spec, p, {});
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  write_model(o.out, StoredModel{fit.model, wall});
  write_trace_csv(o.out + ".trace.csv", fit.trace);
  write_binary_matrix(o.out + ".observed", a);
  write_binary_matrix(o.out + ".heldout", BinaryMatrix(split.heldout));
  out << "fit " << truth.rows() << " x " << truth.cols() << ", |Omega| = " << a.nnz()
      << ", omega = " << omega << ", lambda = " << p.lambda << ": " << fit.trace.size()
      << " iterations, rank " << fit.model.rank() << ", "
      << (fit.converged ? "converged" : "hit max-iter") << ", " << wall << " s\n";
  for (const auto& n : fit.notes) out << "note: " << n << '\n';
  return 0;
}

int do_eval(const std::string& model_path, const std::string& truth_path,
            const std::string& heldout_path, const std::string& omega_text,
            const std::string& out_path, std::ostream& out) {
  const StoredModel model = read_model(model_path);
  const BinaryMatrix truth = read_binary_matrix(truth_path);
  const BinaryMatrix heldout = read_binary_matrix(heldout_path);
  const auto& x = model.factors;
  if (x.rows != truth.rows() || x.cols != truth.cols() || heldout.rows() != truth.rows() ||
      heldout.cols() != truth.cols())
    throw std::runtime_error("eval: shape mismatch between model, truth and held-out set");
  const BinaryMatrix a(truth.positives().minus(heldout.positives()));

  EvaluationReport report;
  report.mse = masked_mse(x, truth, heldout.positives());
  report.recovery_error = recovery_error(x, truth);
  const double observed_rate =
      truth.nnz() ? static_cast<double>(a.nnz()) / static_cast<double>(truth.nnz()) : 0.0;
  const double omega = auto_or_number(omega_text, "omega").value_or(
      observed_rate > 0.0 ? choose_omega(observed_rate) : 0.5);
  report.weighted_label_error = weighted_label_error(binarize_predictions(x), a, omega);
  report.elapsed_seconds = model.elapsed_seconds;
  report.final_rank = x.rank();

  const std::string text = to_json(report);
  if (out_path.empty() || out_path == "-") {
    out << text << '\n';
  } else {
    std::ofstream f(out_path);
    if (!f) throw std::runtime_error("cannot write " + out_path);
    f << text << '\n';
    out << "wrote " << out_path << '\n';
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Positive-unlabeled binary matrix completion", "pumc"};
  app.require_subcommand(1);

  Index m = 0;
  Index k = 5;
  double q = 0.5;
  std::uint64_t seed = 0;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "generate a synthetic 0-1 matrix");
  synth->add_option("--m", m, "matrix size (m x m)")->required()->check(CLI::PositiveNumber);
  synth->add_option("--k", k, "latent rank")->capture_default_str();
  synth->add_option("--q", q, "threshold on the latent product")->capture_default_str();
  synth->add_option("--seed", seed, "random seed")->capture_default_str();
  synth->add_option("--out", synth_out, "output binary-matrix file")->required();

  FitOptions fo;
  auto* fit = app.add_subcommand("fit", "sample observations and fit a model");
  fit->add_option("--input", fo.input, "binary-matrix file holding the full matrix M");
  fit->add_option("--ratings", fo.ratings, "ratings file (user,item,rating) instead of --input");
  fit->add_option("--threshold", fo.threshold, "ratings binarization threshold, auto = mean");
  fit->add_option("--delta", fo.delta, "sampling rate of the positives")->capture_default_str();
  fit->add_option("--omega", fo.omega, "loss weight, auto = delta / 2")->capture_default_str();
  fit->add_option("--reg", fo.reg, "tnn:<mu> | capped:<mu> | lsp:<mu> | nuclear")
      ->capture_default_str();
  fit->add_option("--lambda", fo.lambda, "final regularization weight")->capture_default_str();
  fit->add_option("--lambda0", fo.lambda0, "initial continuation weight")->capture_default_str();
  fit->add_option("--upsilon", fo.upsilon, "continuation decay")->capture_default_str();
  fit->add_option("--rho", fo.rho, "step denominator, auto = 1.01 beta")->capture_default_str();
  fit->add_option("--max-iter", fo.max_iter, "iteration cap")->capture_default_str();
  fit->add_option("--tol", fo.tol, "relative step-norm tolerance")->capture_default_str();
  fit->add_option("--power-iters", fo.power_iters, "power-method iterations")->capture_default_str();
  fit->add_option("--seed", fo.seed, "random seed")->capture_default_str();
  fit->add_option("--algorithm", fo.algorithm, "accel | basic")->capture_default_str();
  fit->add_option("--continuation", fo.continuation, "printed | geometric")->capture_default_str();
  fit->add_option("--out", fo.out, "model output path")->required();

  std::string model_path;
  std::string truth_path;
  std::string heldout_path;
  std::string eval_omega = "auto";
  std::string eval_out;
  auto* eval = app.add_subcommand("eval", "evaluate a fitted model");
  eval->add_option("--model", model_path, "model file written by fit")->required();
  eval->add_option("--truth", truth_path, "binary-matrix file holding M")->required();
  eval->add_option("--heldout", heldout_path, "binary-matrix file of held-out positives")
      ->required();
  eval->add_option("--omega", eval_omega, "weight for the label error, auto = observed rate / 2");
  eval->add_option("--out", eval_out, "JSON report path (default stdout)");

  std::string config_path;
  auto* bench = app.add_subcommand("bench", "run a benchmark sweep");
  bench->add_option("--config", config_path, "key=value configuration file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth) {
      if (k >= m) throw UsageError("--k must be smaller than --m");
      return do_synth(m, k, q, seed, synth_out, out);
    }
    if (*fit) return do_fit(fo, out);
    if (*eval) return do_eval(model_path, truth_path, heldout_path, eval_omega, eval_out, out);
    if (*bench) {
      const ExperimentConfig config = load_config(config_path);
      const auto records = run_bench(config, out);
      out << "wrote " << records.size() << " records to " << config.output << '\n';
      return 0;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace pumc
