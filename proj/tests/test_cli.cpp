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

#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace pumc;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "pumc_test_cli" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

int cli(std::vector<std::string> args, std::string* out_text = nullptr,
        std::string* err_text = nullptr) {
  args.insert(args.begin(), "pumc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

std::vector<std::string> lines_of(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

MetricsRecord sample_record() {
  MetricsRecord r;
  r.m = 500;
  r.n = 500;
  r.delta = 0.3;
  r.rep = 4;
  r.regularizer = "tnn:5";
  r.mse = 0.1234567890123456789;
  r.recovery_error = 1.0 / 3.0;
  r.seconds = 2.5e-3;
  r.final_rank = 6;
  r.iterations = 17;
  r.final_F = 12345.678901234567;
  return r;
}

ExperimentConfig small_bench(const std::filesystem::path& dir) {
  std::istringstream in("m = 60\nk = 3\ndeltas = 0.5, 0.9\nreps = 2\nseed = 11\nout = " +
                        (dir / "bench.csv").string() + "\n");
  return parse_config(in);
}

void strip_time(std::vector<MetricsRecord>& records) {
  for (auto& r : records) r.seconds = 0.0;
}

}  // namespace

TEST_CASE("emit_report") {
  const auto dir = scratch_dir("report");
  const std::string path = (dir / "r.csv").string();
  emit_report({}, path);
  CHECK(lines_of(path) == std::vector<std::string>{kMetricsHeader});
  CHECK(lines_of(jsonl_sidecar(path)).empty());

  emit_report({sample_record()}, path);
  CHECK(lines_of(path).size() == 2);
  CHECK(lines_of(jsonl_sidecar(path)).size() == 1);

  std::vector<MetricsRecord> many;
  for (int k = 0; k < 5; ++k) {
    MetricsRecord r = sample_record();
    r.rep = k;
    r.mse = 0.1 * k + 1e-17 * k;
    r.regularizer = k % 2 ? "lsp:1" : "nuclear";
    many.push_back(r);
  }
  emit_report(many, path);
  CHECK(read_report_csv(path) == many);
  CHECK(read_report_jsonl(jsonl_sidecar(path)) == many);
  CHECK(jsonl_sidecar("out/bench.csv") == "out/bench.jsonl");
}

TEST_CASE("parse_config") {
  std::istringstream in(
      "# sweep\nm = 500, 1000\nk = 5\nreg = lsp:1.0\ndeltas = 0.3,0.6\nreps = 3\nomega = 0.2\n"
      "lambda = 4.5\nlambda0 = 40\nupsilon = 0.6\nrho = auto\nmax_iter = 50\ntol = 1e-6\n"
      "power_iters = 2\ncontinuation = geometric\nseed = 9\nalgorithm = basic\nworkers = 2\n"
      "curves = false\nout = x.csv\n");
  const ExperimentConfig c = parse_config(in);
  CHECK(c.sizes == std::vector<Index>{500, 1000});
  CHECK(c.regularizer == "lsp:1.0");
  CHECK(c.deltas == std::vector<double>{0.3, 0.6});
  CHECK(c.repetitions == 3);
  CHECK(*c.omega == 0.2);
  CHECK_FALSE(c.auto_lambda);
  CHECK(c.solver.lambda == 4.5);
  CHECK(c.explicit_lambda_init);
  CHECK(c.solver.lambda_init == 40.0);
  CHECK(c.solver.upsilon == 0.6);
  CHECK(c.solver.rho == 0.0);
  CHECK(c.solver.max_iter == 50);
  CHECK(c.solver.power_iters == 2);
  CHECK(c.solver.continuation == ContinuationMode::Geometric);
  CHECK(c.solver.seed == 9);
  CHECK(c.algorithm == Algorithm::Basic);
  CHECK(c.workers == 2);
  CHECK_FALSE(c.curves);
  CHECK(c.output == "x.csv");

  auto bad = [](const std::string& text) {
    std::istringstream s(text);
    return parse_config(s);
  };
  CHECK_THROWS_AS(bad("deltas = 0.0, 0.5\n"), UsageError);
  CHECK_THROWS_AS(bad("deltas = 1.2\n"), UsageError);
  CHECK_THROWS_AS(bad("reps = 0\n"), UsageError);
  CHECK_THROWS_AS(bad("colour = blue\n"), UsageError);
  CHECK_THROWS_AS(bad("reg = tnn\n"), UsageError);
  CHECK_THROWS_AS(bad("upsilon = 1\n"), UsageError);
  CHECK_THROWS_AS(bad("lambda = 5\nlambda0 = 1\n"), UsageError);
  CHECK_THROWS_AS(bad("m = 4\nk = 5\n"), UsageError);
  CHECK_THROWS_AS(bad("just words\n"), UsageError);
}

TEST_CASE("bench writes one record per cell and is reproducible") {
  const auto dir = scratch_dir("bench");
  ExperimentConfig c = small_bench(dir);
  std::ostringstream log;
  auto first = run_bench(c, log);
  REQUIRE(first.size() == 4);
  CHECK(read_report_csv(c.output) == first);
  CHECK(read_report_jsonl(jsonl_sidecar(c.output)) == first);
  CHECK(lines_of((dir / "bench.curves.csv").string()).size() > 4);
  for (const auto& r : first) {
    CHECK(r.m == 60);
    CHECK(r.mse >= 0.0);
    CHECK(r.iterations >= 1);
  }

  auto second = run_bench(c, log);
  c.workers = 2;
  auto parallel = run_bench(c, log);
  strip_time(first);
  strip_time(second);
  strip_time(parallel);
  CHECK(first == second);
  CHECK(first == parallel);
}

TEST_CASE("bench grid arithmetic") {
  const auto dir = scratch_dir("grid");
  std::istringstream in("m = 500\nreps = 10\ncurves = false\nout = " + (dir / "g.csv").string() + "\n");
  const ExperimentConfig c = parse_config(in);
  CHECK(c.deltas.size() == 7);
  std::ostringstream log;
  CHECK(run_bench(c, log).size() == 70);
  CHECK(lines_of(c.output).size() == 71);
}

TEST_CASE("bench on a ratings file") {
  const auto dir = scratch_dir("ratings");
  const std::string ratings = (dir / "r.tsv").string();
  {
    std::ofstream f(ratings);
    for (int u = 1; u <= 30; ++u)
      for (int i = 1; i <= 20; ++i)
        if ((u * 7 + i * 3) % 5 != 0) f << u << '\t' << i << '\t' << 1 + (u + i) % 5 << '\n';
  }
  std::istringstream in("ratings = " + ratings + "\ndeltas = 0.5\nreps = 1\nout = " +
                        (dir / "b.csv").string() + "\n");
  std::ostringstream log;
  const auto records = run_bench(parse_config(in), log);
  REQUIRE(records.size() == 1);
  CHECK(records[0].m == 30);
  CHECK(records[0].n == 20);
}

TEST_CASE("model files round trip exactly") {
  const auto dir = scratch_dir("model");
  FactoredMatrix<double> f = FactoredMatrix<double>::zero(4, 3);
  f.left = DenseMatrix<double>::Identity(4, 2);
  f.right = DenseMatrix<double>::Identity(3, 2);
  f.values.resize(2);
  f.values << 2.0 / 3.0, 1e-300;
  const std::string path = (dir / "m.txt").string();
  write_model(path, {f, 1.25});
  const StoredModel back = read_model(path);
  CHECK(back.elapsed_seconds == 1.25);
  CHECK(back.factors.values == f.values);
  CHECK(back.factors.left == f.left);
  CHECK(back.factors.right == f.right);
  write_model(path, {FactoredMatrix<double>::zero(4, 3), 0.0});
  CHECK(read_model(path).factors.rank() == 0);
}

TEST_CASE("command line round trip") {
  const auto dir = scratch_dir("cli");
  const std::string truth = (dir / "m.txt").string();
  const std::string model = (dir / "model.txt").string();
  const std::string report = (dir / "report.json").string();
  REQUIRE(cli({"synth", "--m", "80", "--k", "3", "--seed", "2", "--out", truth}) == 0);
  REQUIRE(cli({"fit", "--input", truth, "--delta", "0.6", "--reg", "lsp:1.0", "--seed", "4",
               "--out", model}) == 0);
  CHECK(std::filesystem::exists(model + ".trace.csv"));
  REQUIRE(cli({"eval", "--model", model, "--truth", truth, "--heldout", model + ".heldout", "--out",
               report}) == 0);
  std::ifstream in(report);
  const auto j = nlohmann::json::parse(in);
  for (const char* key : {"mse", "recovery_error", "weighted_label_error", "elapsed_seconds"}) {
    CHECK(j.at(key).get<double>() >= 0.0);
  }
  CHECK(j.at("final_rank").get<int>() >= 0);
}

TEST_CASE("fully observed data has no test mask") {
  const auto dir = scratch_dir("full");
  const std::string truth = (dir / "m.txt").string();
  const std::string model = (dir / "model.txt").string();
  REQUIRE(cli({"synth", "--m", "40", "--k", "3", "--out", truth}) == 0);
  REQUIRE(cli({"fit", "--input", truth, "--delta", "1", "--lambda", "0", "--omega", "0.5",
               "--out", model}) == 0);
  // The fit reproduces the data.
  const StoredModel fitted = read_model(model);
  const BinaryMatrix m = read_binary_matrix(truth);
  CHECK(recovery_error(fitted.factors, m) < 1e-6);
  std::string err;
  CHECK(cli({"eval", "--model", model, "--truth", truth, "--heldout", model + ".heldout"}, nullptr,
            &err) == 2);
  CHECK(err.find("degenerate test mask") != std::string::npos);
}

TEST_CASE("exit codes") {
  const auto dir = scratch_dir("codes");
  std::string out;
  CHECK(cli({"--help"}, &out) == 0);
  CHECK(cli({}) == 1);
  CHECK(cli({"frobnicate"}) == 1);
  CHECK(cli({"synth", "--m", "10"}) == 1);
  CHECK(cli({"synth", "--m", "5", "--k", "6", "--out", (dir / "x").string()}) == 1);
  CHECK(cli({"fit", "--input", "missing.txt", "--reg", "bogus", "--out", "x"}) == 1);
  CHECK(cli({"fit", "--input", "missing.txt", "--out", (dir / "x").string()}) == 2);
  const std::string cfg = (dir / "bad.cfg").string();
  std::ofstream(cfg) << "deltas = 0\n";
  CHECK(cli({"bench", "--config", cfg}) == 1);
  CHECK(cli({"bench", "--config", (dir / "absent.cfg").string()}) == 1);
}
