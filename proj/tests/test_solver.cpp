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


#include <pumc/data.hpp>
#include <pumc/solver.hpp>

#include <doctest.h>

#include "oracles.hpp"

#include <random>

using namespace pumc;
using oracle::Matrix;

namespace {

struct Instance {
  BinaryMatrix truth;
  SampleSplit split;
  BinaryMatrix a;
};

Instance synthetic(Index m, double delta, std::uint64_t seed) {
  BinaryMatrix truth = gen_synthetic(m, 5, 0.5, seed);
  SampleSplit split = sample_one_sided(truth, delta, seed + 1);
  BinaryMatrix a = split.observation();
  return {std::move(truth), std::move(split), std::move(a)};
}

bool same_path(const std::vector<TraceRecord>& x, const std::vector<TraceRecord>& y) {
  if (x.size() != y.size()) return false;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k].objective != y[k].objective || x[k].lambda != y[k].lambda || x[k].rank != y[k].rank ||
        x[k].step_norm != y[k].step_norm || x[k].subspace_width != y[k].subspace_width ||
        x[k].restarted != y[k].restarted)
      return false;
  }
  return true;
}

const RegularizerSpec kAll[] = {RegularizerSpec::tnn(5), RegularizerSpec::capped_l1(1.0),
                                RegularizerSpec::lsp(1.0), RegularizerSpec::nuclear()};

}  // namespace

TEST_CASE("continuation_lambda") {
  CHECK(continuation_lambda(10.0, 1.0, 0.5, 1) == doctest::Approx(5.5));
  CHECK(continuation_lambda(10.0, 1.0, 0.5, 200) == doctest::Approx(1.0));
  CHECK(continuation_lambda(2.0, 2.0, 0.5, 3) == 2.0);
  double lam = 10.0;
  for (int t = 1; t < 20; ++t) {
    const double next = continuation_lambda(lam, 1.0, 0.7, t);
    CHECK(next <= lam);
    CHECK(next >= 1.0);
    lam = next;
  }
}

TEST_CASE("momentum_update") {
  MomentumState s;
  CHECK(s.extrapolation() == 0.0);
  s = momentum_update(s);
  CHECK(s.alpha_curr == doctest::Approx(0.5 * (std::sqrt(5.0) + 1.0)));
  CHECK(s.extrapolation() == 0.0);
  for (int t = 0; t < 100; ++t) {
    const MomentumState next = momentum_update(s);
    CHECK(next.alpha_curr > s.alpha_curr);
    CHECK(next.extrapolation() >= 0.0);
    CHECK(next.extrapolation() < 1.0);
    s = next;
  }
  CHECK(s.alpha_curr > 40.0);
}

TEST_CASE("resolve_rho validates parameters") {
  SolverParams p;
  CHECK(resolve_rho(p, 0.25) == doctest::Approx(1.01 * 1.5));
  p.rho = 1.4;
  CHECK_THROWS(resolve_rho(p, 0.25));
  p.rho = 2.0;
  CHECK(resolve_rho(p, 0.25) == 2.0);
  p = {};
  p.lambda = 2.0;
  p.lambda_init = 1.0;
  CHECK_THROWS(resolve_rho(p, 0.25));
  p = {};
  p.upsilon = 1.0;
  CHECK_THROWS(resolve_rho(p, 0.25));
  p = {};
  p.lambda = -1.0;
  CHECK_THROWS(resolve_rho(p, 0.25));
}

TEST_CASE("fit_basic boundary behavior") {
  SolverParams p;
  p.lambda = 1.0;
  const BinaryMatrix zero(20, 15, {});
  const auto r = fit_basic<double>(zero, 0.3, RegularizerSpec::nuclear(), p);
  CHECK(r.model.rank() == 0);
  CHECK(r.trace.size() == 1);
  CHECK(r.converged);

  std::mt19937_64 rng(1);
  const BinaryMatrix a = oracle::random_binary(20, 15, 0.3, rng);
  p.lambda = 0.0;
  p.max_iter = 5;
  p.tol = 0.0;
  const auto r0 = fit_basic<double>(a, 0.5, RegularizerSpec::nuclear(), p);
  p.max_iter = 10;
  const auto r1 = fit_basic<double>(a, 0.5, RegularizerSpec::nuclear(), p);
  const double e0 = (r0.model.dense() - oracle::dense(a)).norm();
  const double e1 = (r1.model.dense() - oracle::dense(a)).norm();
  CHECK(e1 < e0);
  CHECK(e1 < 1e-8);

  CHECK_THROWS(fit_basic<double>(BinaryMatrix(2001, 3, {}), 0.3, RegularizerSpec::nuclear(), p));
}

TEST_CASE("fit_accel on an empty observation returns zero") {
  SolverParams p;
  p.lambda = 1.0;
  const auto r = fit_accel<double>(BinaryMatrix(30, 20, {}), 0.3, RegularizerSpec::tnn(5), p);
  CHECK(r.model.rank() == 0);
  CHECK(r.trace.size() == 1);
  CHECK(r.converged);
}

TEST_CASE("fit_basic objective never increases") {
  for (const auto& spec : kAll) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const Instance inst = synthetic(50, 0.5, 100 + seed);
      SolverParams p;
      p.lambda = 5.0;
      p.max_iter = 60;
      const auto r = fit_basic<double>(inst.a, 0.25, spec, p);
      double prev = r.initial_objective;
      for (const auto& t : r.trace) {
        CHECK(t.objective <= prev + 1e-9);
        prev = t.objective;
      }
      // Step sizes: minimum bounded by the average descent.
      double min_step = std::numeric_limits<double>::infinity();
      double min_f = r.initial_objective;
      for (const auto& t : r.trace) {
        min_step = std::min(min_step, t.step_norm);
        min_f = std::min(min_f, t.objective);
      }
      const double bound = 2.0 * (r.initial_objective - min_f) /
                           ((r.rho - r.beta) * static_cast<double>(r.trace.size()));
      CHECK(min_step <= bound);
    }
  }
}

TEST_CASE("step norms are summable") {
  const Instance inst = synthetic(60, 0.5, 7);
  SolverParams p;
  p.lambda = 5.0;
  p.max_iter = 400;
  p.tol = 1e-8;
  const auto r = fit_basic<double>(inst.a, 0.25, RegularizerSpec::tnn(5), p);
  REQUIRE(r.converged);
  double total = 0.0;
  double tail = 0.0;
  const std::size_t quarter = r.trace.size() * 3 / 4;
  for (std::size_t k = 0; k < r.trace.size(); ++k) {
    total += r.trace[k].step_norm;
    if (k >= quarter) tail += r.trace[k].step_norm;
  }
  CHECK(std::isfinite(total));
  CHECK(tail < 0.01 * total);
}

TEST_CASE("basic and accelerated solvers reach comparable fits") {
  // The problem is nonconvex, so the two paths may stop at different
  // stationary points; the held-out error is what has to agree.
  for (std::uint64_t seed : {21, 23, 25}) {
    const Instance inst = synthetic(50, 0.5, seed);
    SolverParams p;
    p.lambda = 8.0;
    p.max_iter = 3000;
    p.tol = 1e-12;
    const auto basic = fit_basic<double>(inst.a, 0.25, RegularizerSpec::tnn(5), p);
    const auto accel = fit_accel<double>(inst.a, 0.25, RegularizerSpec::tnn(5), p);
    CHECK(basic.model.rank() == accel.model.rank());
    CHECK(accel.trace.back().step_norm <= 1e-8);
    const double mb = masked_mse(basic.model, inst.truth, inst.split.heldout);
    const double ma = masked_mse(accel.model, inst.truth, inst.split.heldout);
    CHECK(std::abs(ma - mb) <= 0.05 * mb);
  }
}

TEST_CASE("fit_accel trace invariants and determinism") {
  const Instance inst = synthetic(80, 0.6, 5);
  SolverParams p;
  p.lambda = 6.0;
  p.lambda_init = 60.0;
  p.max_iter = 40;
  p.seed = 9;
  for (const auto& spec : kAll) {
    const auto r1 = fit_accel<double>(inst.a, 0.3, spec, p);
    const auto r2 = fit_accel<double>(inst.a, 0.3, spec, p);
    CHECK(same_path(r1.trace, r2.trace));
    CHECK(r1.trace.size() <= 40);
    for (const auto& t : r1.trace) {
      CHECK(t.rank <= 80);
      CHECK(t.lambda >= p.lambda);
      CHECK(t.lambda <= p.lambda_init);
    }
    CHECK(r1.model.values.minCoeff() > 0.0);
  }
}

TEST_CASE("continuation schedules") {
  const Instance inst = synthetic(40, 0.6, 8);
  SolverParams p;
  p.lambda = 2.0;
  p.lambda_init = 20.0;
  p.upsilon = 0.8;
  p.max_iter = 6;
  p.tol = 0.0;
  const auto printed = fit_accel<double>(inst.a, 0.3, RegularizerSpec::nuclear(), p);
  double lam = p.lambda_init;
  for (const auto& t : printed.trace) {
    lam = (lam - p.lambda) * std::pow(p.upsilon, t.iter) + p.lambda;
    CHECK(t.lambda == doctest::Approx(lam));
  }
  p.continuation = ContinuationMode::Geometric;
  const auto geometric = fit_accel<double>(inst.a, 0.3, RegularizerSpec::nuclear(), p);
  for (const auto& t : geometric.trace)
    CHECK(t.lambda == doctest::Approx((p.lambda_init - p.lambda) * std::pow(p.upsilon, t.iter) + p.lambda));
}

TEST_CASE("accelerated step equals full thresholding of the gradient point") {
  const Instance inst = synthetic(120, 0.5, 13);
  SolverParams p;
  p.lambda = 10.0;
  p.max_iter = 30;
  p.power_iters = 25;
  const auto spec = RegularizerSpec::tnn(5);
  int checked = 0;
  IterationObserver<double> observer = [&](const IterationView<double>& v) {
    const Matrix z = v.gradient_point->materialize();
    const auto svd = oracle::jacobi_svd(z);
    const double gamma = threshold_gamma<double>(spec, v.eta, svd.s);
    const Index a = rank_select<double>(svd.s, gamma);
    if (a == 0 || v.model.rank() == 0) return;
    const Matrix& w = v.basis->matrix();
    const Matrix uk = svd.u.leftCols(a);
    if ((uk - w * (w.transpose() * uk)).norm() > 1e-9) return;
    if (v.model.rank() != a) return;
    ++checked;
    const Matrix full = gsvt_full(z, spec, v.eta);
    CHECK((v.model.dense() - full).norm() <= 1e-6);
  };
  fit_accel<double>(inst.a, 0.25, spec, p, observer);
  CHECK(checked > 0);
}
