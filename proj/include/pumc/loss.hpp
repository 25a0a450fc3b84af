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
#include <pumc/matrix_core.hpp>
#include <pumc/regularizers.hpp>

#include <algorithm>
#include <cmath>

namespace pumc {

// The omega-weighted square loss over an observation A whose ones are the
// observed set Omega:
//
//   L(X) = (1 - omega) ||X - A||_F^2 + (2 omega - 1) ||P_Omega(X - A)||_F^2
//
// Every function takes X either dense or factored; the factored overloads
// never touch all m x n entries.

/// Largest dense matrix for which the spectrum is computed on demand.
inline constexpr Index kMaxDenseSpectrum = 2000;

namespace detail {

inline void require_omega(double omega) {
  if (!(omega > 0.0 && omega < 1.0)) throw std::invalid_argument("omega must lie in (0, 1)");
}

template <typename Derived>
void require_shape(const Eigen::MatrixBase<Derived>& x, const BinaryMatrix& a, const char* who) {
  if (x.rows() != a.rows() || x.cols() != a.cols())
    throw std::invalid_argument(std::string(who) + ": shape mismatch");
}

template <typename Scalar>
void require_shape(const FactoredMatrix<Scalar>& x, const BinaryMatrix& a, const char* who) {
  if (x.rows != a.rows() || x.cols != a.cols())
    throw std::invalid_argument(std::string(who) + ": shape mismatch");
}

/// sum over `set` of (X_ij - 1)^2 and X_ij, for a factored X.
template <typename Scalar>
std::pair<Scalar, Scalar> residual_on_ones(const FactoredMatrix<Scalar>& x,
                                           const ObservationSet& set) {
  const DenseVector<Scalar> vals = x.sample(set.entries());
  return {(vals.array() - Scalar(1)).square().sum(), vals.sum()};
}

}  // namespace detail

/// 2 max(omega, 1 - omega): the Lipschitz constant of the loss gradient.
inline double lipschitz_beta(double omega) {
  detail::require_omega(omega);
  return 2.0 * std::max(omega, 1.0 - omega);
}

/// Weight selection for sampling rate delta: omega = delta / 2.
inline double choose_omega(double delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must lie in (0, 1]");
  return delta / 2.0;
}

template <typename Derived>
typename Derived::Scalar weighted_loss(const Eigen::MatrixBase<Derived>& x, const BinaryMatrix& a,
                                       double omega) {
  using Scalar = typename Derived::Scalar;
  detail::require_omega(omega);
  detail::require_shape(x, a, "weighted_loss");
  Scalar total = x.squaredNorm();
  Scalar on_omega(0);
  for (const Entry& e : a.positives()) {
    const Scalar v = x(e.row, e.col);
    total += Scalar(1) - Scalar(2) * v;  // (v - 1)^2 - v^2
    on_omega += (v - Scalar(1)) * (v - Scalar(1));
  }
  return Scalar(1 - omega) * total + Scalar(2 * omega - 1) * on_omega;
}

template <typename Scalar>
Scalar weighted_loss(const FactoredMatrix<Scalar>& x, const BinaryMatrix& a, double omega) {
  detail::require_omega(omega);
  detail::require_shape(x, a, "weighted_loss");
  const auto [on_omega, sum_omega] = detail::residual_on_ones(x, a.positives());
  const Scalar total =
      x.squared_norm() - Scalar(2) * sum_omega + static_cast<Scalar>(a.nnz());
  return Scalar(1 - omega) * std::max(total, Scalar(0)) + Scalar(2 * omega - 1) * on_omega;
}

/// Dense gradient 2(1 - omega)(X - A) + 2(2 omega - 1) P_Omega(X - A).
template <typename Derived>
DenseMatrix<typename Derived::Scalar> weighted_loss_grad(const Eigen::MatrixBase<Derived>& x,
                                                         const BinaryMatrix& a, double omega) {
  using Scalar = typename Derived::Scalar;
  detail::require_omega(omega);
  detail::require_shape(x, a, "weighted_loss_grad");
  DenseMatrix<Scalar> g = Scalar(2 * (1 - omega)) * x;
  for (const Entry& e : a.positives())
    g(e.row, e.col) += -Scalar(2 * (1 - omega)) + Scalar(2 * (2 * omega - 1)) * (x(e.row, e.col) - 1);
  return g;
}

/// Structured gradient for a factored X: one low-rank term plus a sparse
/// correction supported on Omega.
template <typename Scalar>
LowRankPlusSparse<Scalar> weighted_loss_grad(const FactoredMatrix<Scalar>& x, const BinaryMatrix& a,
                                             double omega) {
  detail::require_omega(omega);
  detail::require_shape(x, a, "weighted_loss_grad");
  const DenseVector<Scalar> vals = x.sample(a.positives().entries());
  std::vector<typename SparseCoo<Scalar>::Triplet> triples;
  triples.reserve(a.nnz());
  Index k = 0;
  for (const Entry& e : a.positives()) {
    triples.emplace_back(e.row, e.col,
                         -Scalar(2 * (1 - omega)) + Scalar(2 * (2 * omega - 1)) * (vals[k++] - 1));
  }
  std::vector<LowRankTerm<Scalar>> terms;
  if (x.rank() > 0) terms.push_back(LowRankTerm<Scalar>::from(x, Scalar(2 * (1 - omega))));
  return LowRankPlusSparse<Scalar>(x.rows, x.cols, std::move(terms),
                                   SparseCoo<Scalar>(x.rows, x.cols, std::move(triples)));
}

/// F(X) = L(X) + lambda * r_n(X). The factored overload reads the spectrum
/// from the factors; the dense one computes it when X is small enough.
template <typename Scalar>
Scalar objective(const FactoredMatrix<Scalar>& x, const BinaryMatrix& a, double omega,
                 Scalar lambda, const RegularizerSpec& spec) {
  return weighted_loss(x, a, omega) + penalty_value<Scalar>(spec, x.values, lambda);
}

template <typename Derived>
typename Derived::Scalar objective(const Eigen::MatrixBase<Derived>& x, const BinaryMatrix& a,
                                   double omega, typename Derived::Scalar lambda,
                                   const RegularizerSpec& spec) {
  using Scalar = typename Derived::Scalar;
  if (std::max(x.rows(), x.cols()) > kMaxDenseSpectrum)
    throw std::invalid_argument("objective requires spectrum");
  const Scalar reg = lambda == Scalar(0) ? Scalar(0)
                                         : penalty_value<Scalar>(
                                               spec, small_svd(x).s, lambda);
  return weighted_loss(x, a, omega) + reg;
}

/// (1 / mn) ||X - M||_F^2.
template <typename Derived>
typename Derived::Scalar recovery_error(const Eigen::MatrixBase<Derived>& x, const BinaryMatrix& m) {
  using Scalar = typename Derived::Scalar;
  detail::require_shape(x, m, "recovery_error");
  Scalar total = x.squaredNorm();
  for (const Entry& e : m.positives()) total += Scalar(1) - Scalar(2) * x(e.row, e.col);
  return std::max(total, Scalar(0)) / Scalar(x.rows() * x.cols());
}

template <typename Scalar>
Scalar recovery_error(const FactoredMatrix<Scalar>& x, const BinaryMatrix& m) {
  detail::require_shape(x, m, "recovery_error");
  const DenseVector<Scalar> vals = x.sample(m.positives().entries());
  const Scalar total = x.squared_norm() - Scalar(2) * vals.sum() + static_cast<Scalar>(m.nnz());
  return std::max(total, Scalar(0)) / Scalar(x.rows * x.cols);
}

namespace detail {

template <typename Scalar>
Scalar masked_ratio(const DenseVector<Scalar>& x_vals, const BinaryMatrix& m,
                    const ObservationSet& mask) {
  Scalar num(0);
  Scalar den(0);
  Index k = 0;
  for (const Entry& e : mask) {
    const Scalar truth = m(e.row, e.col) ? Scalar(1) : Scalar(0);
    const Scalar d = x_vals[k++] - truth;
    num += d * d;
    den += truth;
  }
  if (!(den > Scalar(0))) throw std::invalid_argument("degenerate test mask");
  return num / den;
}

}  // namespace detail

/// ||P_mask(X - M)||_F^2 / ||P_mask(M)||_F^2 over a held-out mask.
template <typename Derived>
typename Derived::Scalar masked_mse(const Eigen::MatrixBase<Derived>& x, const BinaryMatrix& m,
                                    const ObservationSet& mask) {
  using Scalar = typename Derived::Scalar;
  detail::require_shape(x, m, "masked_mse");
  DenseVector<Scalar> vals(static_cast<Index>(mask.size()));
  Index k = 0;
  for (const Entry& e : mask) vals[k++] = x(e.row, e.col);
  return detail::masked_ratio(vals, m, mask);
}

template <typename Scalar>
Scalar masked_mse(const FactoredMatrix<Scalar>& x, const BinaryMatrix& m, const ObservationSet& mask) {
  detail::require_shape(x, m, "masked_mse");
  return detail::masked_ratio<Scalar>(x.sample(mask.entries()), m, mask);
}

/// Empirical mean of (1 - omega) I(x=1, a=0) + omega I(x=0, a=1).
inline double weighted_label_error(const BinaryMatrix& xbin, const BinaryMatrix& a, double omega) {
  detail::require_omega(omega);
  if (xbin.rows() != a.rows() || xbin.cols() != a.cols())
    throw std::invalid_argument("weighted_label_error: shape mismatch");
  const std::size_t both = xbin.positives().intersect(a.positives()).size();
  const double false_pos = static_cast<double>(xbin.nnz() - both);
  const double false_neg = static_cast<double>(a.nnz() - both);
  const double total = static_cast<double>(a.rows()) * static_cast<double>(a.cols());
  return ((1.0 - omega) * false_pos + omega * false_neg) / total;
}

/// Flat evaluation summary.
struct EvaluationReport {
  double mse = 0.0;
  double recovery_error = 0.0;
  double weighted_label_error = 0.0;
  double elapsed_seconds = 0.0;
  Index final_rank = 0;
};

}  // namespace pumc
