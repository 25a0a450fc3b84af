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

#include <pumc/binary_matrix.hpp>
#include <pumc/loss.hpp>
#include <pumc/matrix_core.hpp>
#include <pumc/regularizers.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace pumc {

enum class ContinuationMode {
  AsPrinted,  ///< lambda_t = (lambda_{t-1} - lambda) upsilon^t + lambda
  Geometric,  ///< lambda_t = (lambda_0 - lambda) upsilon^t + lambda
};

enum class StopReason { Tolerance, MaxIter };

struct SolverParams {
  double lambda = 0.0;       ///< final regularization weight
  double lambda_init = -1;   ///< lambda_0; negative means "no continuation"
  double upsilon = 0.5;      ///< continuation decay, in (0, 1)
  double rho = 0.0;          ///< step denominator; <= 0 selects 1.01 * beta
  int max_iter = 500;
  double tol = 1e-5;         ///< relative step-norm stopping threshold
  int power_iters = 3;
  std::uint64_t seed = 0;
  ContinuationMode continuation = ContinuationMode::AsPrinted;
  int subspace_buffer = 5;
  int restart_after = 5;     ///< consecutive F increases before a momentum restart
  Index full_svd_cap = 2000; ///< fit_basic refuses larger matrices
};

/// Default step denominator margin over beta.
inline constexpr double kRhoMargin = 1.01;

/// Validates params and returns the rho to use for this omega.
inline double resolve_rho(const SolverParams& p, double omega) {
  const double beta = lipschitz_beta(omega);
  if (!(p.lambda >= 0.0) || !std::isfinite(p.lambda))
    throw std::invalid_argument("solver: lambda must be finite and >= 0");
  if (p.lambda_init >= 0.0 && p.lambda_init < p.lambda)
    throw std::invalid_argument("solver: lambda_init must be >= lambda");
  if (!(p.upsilon > 0.0 && p.upsilon < 1.0))
    throw std::invalid_argument("solver: upsilon must lie in (0, 1)");
  if (p.max_iter < 1) throw std::invalid_argument("solver: max_iter must be >= 1");
  if (!(p.tol >= 0.0)) throw std::invalid_argument("solver: tol must be >= 0");
  if (p.power_iters < 1) throw std::invalid_argument("solver: power_iters must be >= 1");
  if (p.rho <= 0.0) return kRhoMargin * beta;
  if (!(p.rho > beta)) throw std::invalid_argument("solver: rho must exceed beta");
  return p.rho;
}

/// One continuation step; monotonically approaches lambda_final from above.
inline double continuation_lambda(double lambda_prev, double lambda_final, double upsilon, int t) {
  return (lambda_prev - lambda_final) * std::pow(upsilon, t) + lambda_final;
}

struct MomentumState {
  double alpha_prev = 1.0;
  double alpha_curr = 1.0;
  /// c_t = (alpha_{t-1} - 1) / alpha_t
  double extrapolation() const { return (alpha_prev - 1.0) / alpha_curr; }
};

inline MomentumState momentum_update(const MomentumState& s) {
  return {s.alpha_curr, 0.5 * (std::sqrt(4.0 * s.alpha_curr * s.alpha_curr + 1.0) + 1.0)};
}

struct TraceRecord {
  int iter = 0;
  double objective = 0.0;     ///< F(X_{t+1}) at lambda_t
  double lambda = 0.0;        ///< lambda_t
  Index rank = 0;             ///< rank of X_{t+1}
  double step_norm = 0.0;     ///< ||X_{t+1} - X_t||_F^2
  double elapsed_seconds = 0.0;
  Index subspace_width = 0;
  bool restarted = false;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

template <typename Scalar>
struct FitResult {
  FactoredMatrix<Scalar> model;
  std::vector<TraceRecord> trace;
  bool converged = false;
  StopReason stop_reason = StopReason::MaxIter;
  double initial_objective = 0.0;  ///< F(X_1) = F(0)
  double rho = 0.0;
  double beta = 0.0;
  std::vector<std::string> notes;
};

/// Read-only view of one iteration, handed to an optional observer.
template <typename Scalar>
struct IterationView {
  int iter;
  const LowRankPlusSparse<Scalar>* gradient_point;  ///< Z_ig (accelerated path only)
  const OrthonormalBasis<Scalar>* basis;            ///< W (accelerated path only)
  const FactoredMatrix<Scalar>& model;              ///< X_{t+1}
  Scalar eta;
  Scalar gamma;
  double elapsed_seconds;
};

template <typename Scalar>
using IterationObserver = std::function<void(const IterationView<Scalar>&)>;

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(Clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(Clock::now() - start_).count() - paused_;
  }
  template <typename F>
  void excluding(F&& f) {
    const auto t0 = Clock::now();
    f();
    paused_ += std::chrono::duration<double>(Clock::now() - t0).count();
  }

 private:
  using Clock = std::chrono::steady_clock;
  Clock::time_point start_;
  double paused_ = 0.0;
};

/// Relative step-norm test; a zero iterate pair only converges once the
/// continuation has settled.
inline bool step_converged(double step_sq, double norm_prev_sq, double norm_next_sq, double tol,
                           bool lambda_settled) {
  if (!lambda_settled) return false;
  const double scale = std::max(norm_prev_sq, norm_next_sq);
  if (scale == 0.0) return true;
  return std::sqrt(step_sq / scale) < tol;
}

inline void add_notes(std::vector<std::string>& out, const Diagnostics& diag) {
  for (const auto& n : diag.notes)
    if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
}

template <typename Scalar>
DenseMatrix<Scalar> gaussian(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseMatrix<Scalar> out(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = Scalar(normal(rng));
  return out;
}

}  // namespace detail

/// Reference proximal iteration with a full SVD per step and constant lambda.
template <typename Scalar = double>
FitResult<Scalar> fit_basic(const BinaryMatrix& a, double omega, const RegularizerSpec& spec,
                            const SolverParams& params,
                            const IterationObserver<Scalar>& observer = {}) {
  const double rho = resolve_rho(params, omega);
  const Index m = a.rows();
  const Index n = a.cols();
  if (std::max(m, n) > params.full_svd_cap)
    throw std::invalid_argument("fit_basic: matrix too large for full SVD; use fit_accel");

  FitResult<Scalar> result;
  result.rho = rho;
  result.beta = lipschitz_beta(omega);
  const Scalar lambda(params.lambda);
  const Scalar eta = lambda / Scalar(rho);

  auto x = FactoredMatrix<Scalar>::zero(m, n);
  result.initial_objective = static_cast<double>(objective(x, a, omega, lambda, spec));
  detail::Stopwatch clock;

  for (int t = 1; t <= params.max_iter; ++t) {
    const DenseMatrix<Scalar> xd = x.dense();
    const DenseMatrix<Scalar> z = xd - weighted_loss_grad(xd, a, omega) / Scalar(rho);
    const auto svd = small_svd(z);
    const auto [cols, vals] = detail::threshold_spectrum<Scalar>(spec, svd.s, svd.s.size(), eta);
    FactoredMatrix<Scalar> next{m, n, detail::select_columns(svd.u, cols), vals,
                                detail::select_columns(svd.v, cols)};

    TraceRecord rec;
    rec.iter = t;
    rec.step_norm = static_cast<double>(squared_distance(next, x));
    rec.objective = static_cast<double>(objective(next, a, omega, lambda, spec));
    rec.lambda = params.lambda;
    rec.rank = next.rank();
    rec.subspace_width = std::min(m, n);
    if (!std::isfinite(rec.objective)) throw std::runtime_error("fit_basic: objective diverged");
    const double prev_sq = static_cast<double>(x.squared_norm());
    x = std::move(next);
    rec.elapsed_seconds = clock.seconds();
    result.trace.push_back(rec);
    if (observer)
      clock.excluding([&] {
        observer(IterationView<Scalar>{t, nullptr, nullptr, x, eta, Scalar(0), rec.elapsed_seconds});
      });

    if (detail::step_converged(rec.step_norm, prev_sq, static_cast<double>(x.squared_norm()),
                               params.tol, true)) {
      result.converged = true;
      result.stop_reason = StopReason::Tolerance;
      break;
    }
  }
  result.model = std::move(x);
  return result;
}

/// Accelerated proximal solver: momentum extrapolation, gradient point kept
/// as low-rank plus sparse, warm-started power method, projected GSVT with
/// automatic rank selection, and lambda continuation.
template <typename Scalar = double>
FitResult<Scalar> fit_accel(const BinaryMatrix& a, double omega, const RegularizerSpec& spec,
                            const SolverParams& params,
                            const IterationObserver<Scalar>& observer = {}) {
  const double rho = resolve_rho(params, omega);
  const Index m = a.rows();
  const Index n = a.cols();
  FitResult<Scalar> result;
  result.rho = rho;
  result.beta = lipschitz_beta(omega);
  const double lambda_final = params.lambda;
  const double lambda0 = params.lambda_init >= 0.0 ? params.lambda_init : params.lambda;

  auto x_curr = FactoredMatrix<Scalar>::zero(m, n);
  auto x_prev = x_curr;
  result.initial_objective =
      static_cast<double>(objective(x_curr, a, omega, Scalar(lambda0), spec));

  if (a.nnz() == 0) {
    result.model = std::move(x_curr);
    result.trace.push_back(TraceRecord{1, 0.0, lambda_final, 0, 0.0, 0.0, 0, false});
    result.converged = true;
    result.stop_reason = StopReason::Tolerance;
    return result;
  }

  std::mt19937_64 rng(params.seed);
  DenseMatrix<Scalar> v_curr = detail::gaussian<Scalar>(n, 1, rng);
  DenseMatrix<Scalar> v_prev = detail::gaussian<Scalar>(n, 1, rng);
  MomentumState momentum;
  double lambda_t = lambda0;
  double f_prev = result.initial_objective;
  int increases = 0;

  const auto& omega_set = a.positives();
  const Scalar c3 = Scalar(2.0 * (1.0 - omega) / rho);
  const Scalar c4 = Scalar(2.0 * (1.0 - 2.0 * omega) / rho);
  const Index limit = std::min(m, n);
  Diagnostics diag;
  detail::Stopwatch clock;

  for (int t = 1; t <= params.max_iter; ++t) {
    // Gradient point Z_ig = c1 X_t + c2 X_{t-1} + c3 A + c4 P_Omega(Z_t - A).
    const Scalar ct = Scalar(momentum.extrapolation());
    const Scalar c1 = (Scalar(1) + ct) * (Scalar(1) - c3);
    const Scalar c2 = ct * (c3 - Scalar(1));
    const DenseVector<Scalar> xc = x_curr.sample(omega_set.entries());
    const DenseVector<Scalar> xp =
        ct != Scalar(0) ? x_prev.sample(omega_set.entries()) : DenseVector<Scalar>();
    std::vector<typename SparseCoo<Scalar>::Triplet> triples;
    triples.reserve(omega_set.size());
    Index k = 0;
    for (const Entry& e : omega_set) {
      Scalar zij = (Scalar(1) + ct) * xc[k];
      if (ct != Scalar(0)) zij -= ct * xp[k];
      triples.emplace_back(e.row, e.col, c3 + c4 * (zij - Scalar(1)));
      ++k;
    }
    std::vector<LowRankTerm<Scalar>> terms;
    if (x_curr.rank() > 0) terms.push_back(LowRankTerm<Scalar>::from(x_curr, c1));
    if (x_prev.rank() > 0 && c2 != Scalar(0)) terms.push_back(LowRankTerm<Scalar>::from(x_prev, c2));
    const LowRankPlusSparse<Scalar> z_ig(m, n, std::move(terms),
                                         SparseCoo<Scalar>(m, n, std::move(triples)));

    // Warm start Y_t = QR([V_t, V_{t-1}]) topped up with Gaussian directions.
    const Index width =
        std::min(limit, 2 * std::max<Index>(x_curr.rank(), 1) + params.subspace_buffer);
    DenseMatrix<Scalar> start(n, v_curr.cols() + v_prev.cols() + width);
    start << v_curr, v_prev, detail::gaussian<Scalar>(n, width, rng);
    const auto y = qr_orthonormalize(start);
    const DenseMatrix<Scalar> y_block = y.matrix().leftCols(std::min(width, y.cols()));

    if (params.continuation == ContinuationMode::AsPrinted)
      lambda_t = continuation_lambda(lambda_t, lambda_final, params.upsilon, t);
    else
      lambda_t = continuation_lambda(lambda0, lambda_final, params.upsilon, t);
    const Scalar eta = Scalar(lambda_t / rho);

    ProjectedStep<Scalar> step;
    std::optional<OrthonormalBasis<Scalar>> basis;
    try {
      basis.emplace(power_method(z_ig, y_block, params.power_iters, &diag));
      step = projected_threshold(z_ig, *basis, spec, eta, &diag);
    } catch (const EmptyBasisError&) {
      diag.note("fit_accel: gradient point vanished on the warm-start subspace");
      step.model = FactoredMatrix<Scalar>::zero(m, n);
      step.right_basis = v_curr;
    }

    TraceRecord rec;
    rec.iter = t;
    rec.lambda = lambda_t;
    rec.rank = step.model.rank();
    rec.subspace_width = y_block.cols();
    rec.step_norm = static_cast<double>(squared_distance(step.model, x_curr));
    rec.objective = static_cast<double>(objective(step.model, a, omega, Scalar(lambda_t), spec));
    if (!std::isfinite(rec.objective)) throw std::runtime_error("fit_accel: objective diverged");

    // Momentum restart after restart_after consecutive increases of F.
    increases = rec.objective > f_prev ? increases + 1 : 0;
    f_prev = rec.objective;
    momentum = momentum_update(momentum);
    if (increases >= params.restart_after) {
      momentum = MomentumState{};
      increases = 0;
      rec.restarted = true;
    }

    const double prev_sq = static_cast<double>(x_curr.squared_norm());
    x_prev = std::move(x_curr);
    x_curr = std::move(step.model);
    v_prev = std::move(v_curr);
    v_curr = std::move(step.right_basis);
    if (v_curr.cols() == 0) v_curr = detail::gaussian<Scalar>(n, 1, rng);

    rec.elapsed_seconds = clock.seconds();
    result.trace.push_back(rec);
    if (observer)
      clock.excluding([&] {
        observer(IterationView<Scalar>{t, &z_ig, basis ? &*basis : nullptr, x_curr, eta, step.gamma,
                                       rec.elapsed_seconds});
      });

    const double gap = lambda_t - lambda_final;
    const bool settled = gap <= params.tol * std::max(lambda0 - lambda_final, 0.0);
    if (detail::step_converged(rec.step_norm, prev_sq, static_cast<double>(x_curr.squared_norm()),
                               params.tol, settled)) {
      result.converged = true;
      result.stop_reason = StopReason::Tolerance;
      break;
    }
  }
  detail::add_notes(result.notes, diag);
  result.model = std::move(x_curr);
  return result;
}

}  // namespace pumc
