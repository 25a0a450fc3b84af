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

#include <pumc/matrix_core.hpp>

#include <cmath>
#include <numeric>
#include <string>
#include <string_view>

namespace pumc {

enum class RegularizerKind { TNN, CappedL1, LSP, Nuclear };

/// Which spectral surrogate, plus its shape parameter mu.
/// For TNN, mu is the (integral) number of leading singular values left
/// unpenalized; mu = 0 penalizes all of them.
struct RegularizerSpec {
  RegularizerKind kind = RegularizerKind::Nuclear;
  double mu = 1.0;

  static RegularizerSpec tnn(int leading) { return checked({RegularizerKind::TNN, double(leading)}); }
  static RegularizerSpec capped_l1(double mu) { return checked({RegularizerKind::CappedL1, mu}); }
  static RegularizerSpec lsp(double mu) { return checked({RegularizerKind::LSP, mu}); }
  static RegularizerSpec nuclear() { return {RegularizerKind::Nuclear, 1.0}; }

  static RegularizerSpec checked(RegularizerSpec spec) {
    if (!std::isfinite(spec.mu)) throw std::invalid_argument("regularizer: mu must be finite");
    switch (spec.kind) {
      case RegularizerKind::TNN:
        if (spec.mu < 0 || spec.mu != std::floor(spec.mu))
          throw std::invalid_argument("regularizer: tnn mu must be a nonnegative integer");
        break;
      case RegularizerKind::CappedL1:
      case RegularizerKind::LSP:
        if (!(spec.mu > 0)) throw std::invalid_argument("regularizer: mu must be > 0");
        break;
      case RegularizerKind::Nuclear:
        break;
    }
    return spec;
  }

  /// Number of unpenalized leading values (TNN only; 0 otherwise).
  Index leading() const { return kind == RegularizerKind::TNN ? static_cast<Index>(mu) : 0; }

  friend bool operator==(const RegularizerSpec&, const RegularizerSpec&) = default;
};

/// Parses "tnn:5", "capped:1.0", "lsp:1.0" or "nuclear".
RegularizerSpec parse_regularizer(std::string_view text);
std::string to_string(const RegularizerSpec& spec);

/// One scalar proximal subproblem: sigma is the index-th largest singular
/// value (1-based), eta = lambda / rho.
template <typename Scalar>
struct ProxInput {
  Scalar sigma;
  Scalar eta;
  Index index = 1;
};

namespace detail {

/// eta * r(s) for the index-th singular value.
template <typename Scalar>
Scalar weighted_penalty(const RegularizerSpec& spec, Scalar s, Scalar eta, Index index) {
  using std::log;
  using std::min;
  switch (spec.kind) {
    case RegularizerKind::TNN:
      return index <= spec.leading() ? Scalar(0) : eta * s;
    case RegularizerKind::CappedL1:
      return eta * min(s, Scalar(spec.mu));
    case RegularizerKind::LSP:
      return eta * log(s / Scalar(spec.mu) + Scalar(1));
    case RegularizerKind::Nuclear:
      return eta * s;
  }
  return Scalar(0);
}

template <typename Scalar>
Scalar prox_objective(const RegularizerSpec& spec, Scalar s, const ProxInput<Scalar>& in) {
  const Scalar d = s - in.sigma;
  return Scalar(0.5) * d * d + weighted_penalty(spec, s, in.eta, in.index);
}

template <typename Scalar>
void require_sorted_spectrum(const DenseVector<Scalar>& sigmas, const char* who) {
  for (Index i = 0; i < sigmas.size(); ++i) {
    if (!std::isfinite(sigmas[i]) || sigmas[i] < Scalar(0))
      throw std::invalid_argument(std::string(who) + ": singular values must be finite and >= 0");
    if (i > 0 && sigmas[i] > sigmas[i - 1])
      throw std::invalid_argument(std::string(who) + ": singular values must be nonincreasing");
  }
}

}  // namespace detail

/// sum_i eta * r(sigma_i) over a nonincreasing spectrum.
template <typename Scalar>
Scalar penalty_value(const RegularizerSpec& spec, const DenseVector<Scalar>& sigmas,
                     Scalar eta) {
  detail::require_sorted_spectrum<Scalar>(sigmas, "penalty_value");
  Scalar total(0);
  for (Index i = 0; i < sigmas.size(); ++i)
    total += detail::weighted_penalty(spec, sigmas[i], eta, i + 1);
  return total;
}

/// argmin_{s >= 0} 1/2 (s - sigma)^2 + eta r(s), in closed form.
template <typename Scalar>
Scalar scalar_prox(const RegularizerSpec& spec, const ProxInput<Scalar>& in) {
  using std::max;
  using std::min;
  using std::sqrt;
  detail::require(std::isfinite(in.sigma) && std::isfinite(in.eta) && in.sigma >= Scalar(0) &&
                      in.eta >= Scalar(0) && in.index >= 1,
                  "scalar_prox: invalid input");
  const Scalar sigma = in.sigma;
  const Scalar eta = in.eta;
  switch (spec.kind) {
    case RegularizerKind::TNN:
      if (in.index <= spec.leading()) return sigma;
      return max(sigma - eta, Scalar(0));
    case RegularizerKind::Nuclear:
      return max(sigma - eta, Scalar(0));
    case RegularizerKind::CappedL1: {
      const Scalar mu(spec.mu);
      const Scalar below = min(max(sigma - eta, Scalar(0)), mu);
      const Scalar above = max(sigma, mu);
      // Ties go to the larger candidate.
      return detail::prox_objective(spec, below, in) < detail::prox_objective(spec, above, in)
                 ? below
                 : above;
    }
    case RegularizerKind::LSP: {
      // Stationary points solve s^2 + (mu - sigma) s + (eta - sigma mu) = 0.
      const Scalar mu(spec.mu);
      const Scalar disc = (sigma + mu) * (sigma + mu) - Scalar(4) * eta;
      if (disc < Scalar(0)) return Scalar(0);
      const Scalar root = Scalar(0.5) * ((sigma - mu) + sqrt(disc));
      if (!(root > Scalar(0))) return Scalar(0);
      return detail::prox_objective(spec, root, in) <= detail::prox_objective(spec, Scalar(0), in)
                 ? root
                 : Scalar(0);
    }
  }
  return Scalar(0);
}

template <typename Scalar>
Scalar scalar_prox(const RegularizerSpec& spec, Scalar sigma, Scalar eta, Index index = 1) {
  return scalar_prox(spec, ProxInput<Scalar>{sigma, eta, index});
}

/// Cutoff gamma: scalar_prox returns 0 for every sigma <= gamma.
/// TNN uses min(sigma_{mu+1}, eta), treating a missing sigma_{mu+1} as 0.
template <typename Scalar>
Scalar threshold_gamma(const RegularizerSpec& spec, Scalar eta,
                       const DenseVector<Scalar>& sigmas,
                       Diagnostics* diag = nullptr) {
  using std::min;
  using std::sqrt;
  switch (spec.kind) {
    case RegularizerKind::TNN: {
      const Index next = spec.leading();  // 0-based position of sigma_{mu+1}
      if (next >= sigmas.size()) {
        if (diag) diag->note("threshold_gamma: sigma_{mu+1} unavailable, using gamma = 0");
        return Scalar(0);
      }
      return min(sigmas[next], eta);
    }
    case RegularizerKind::CappedL1:
      return min(eta, sqrt(Scalar(2) * Scalar(spec.mu) * eta));
    case RegularizerKind::LSP:
      return min(eta / Scalar(spec.mu), Scalar(spec.mu));
    case RegularizerKind::Nuclear:
      return eta;
  }
  return eta;
}

/// Number of singular values strictly above gamma.
template <typename Scalar>
Index rank_select(const DenseVector<Scalar>& sigmas, Scalar gamma) {
  Index count = 0;
  for (Index i = 0; i < sigmas.size(); ++i)
    if (sigmas[i] > gamma) ++count;
  return count;
}

namespace detail {

/// Applies the scalar prox to the first `count` values of a sorted spectrum and
/// keeps the positive outputs. Returns the kept source positions and values.
template <typename Scalar>
std::pair<std::vector<Index>, DenseVector<Scalar>> threshold_spectrum(
    const RegularizerSpec& spec, const DenseVector<Scalar>& sigmas, Index count, Scalar eta) {
  std::vector<Index> keep;
  std::vector<Scalar> vals;
  for (Index i = 0; i < count; ++i) {
    const Scalar s = scalar_prox(spec, sigmas[i], eta, i + 1);
    if (s > Scalar(0)) {
      keep.push_back(i);
      vals.push_back(s);
    }
  }
  // The prox is nondecreasing in sigma, so the order is preserved; sort anyway
  // to guarantee the FactoredMatrix invariant.
  std::vector<std::size_t> order(keep.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });
  std::vector<Index> cols(keep.size());
  DenseVector<Scalar> out(static_cast<Index>(keep.size()));
  for (std::size_t k = 0; k < order.size(); ++k) {
    cols[k] = keep[order[k]];
    out[static_cast<Index>(k)] = vals[order[k]];
  }
  return {std::move(cols), std::move(out)};
}

template <typename Scalar>
DenseMatrix<Scalar> select_columns(const DenseMatrix<Scalar>& m, const std::vector<Index>& cols) {
  DenseMatrix<Scalar> out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Index>(k)) = m.col(cols[k]);
  return out;
}

}  // namespace detail

/// Generalized singular value thresholding via a full SVD (reference path).
template <typename Derived>
DenseMatrix<typename Derived::Scalar> gsvt_full(const Eigen::MatrixBase<Derived>& z,
                                                const RegularizerSpec& spec,
                                                typename Derived::Scalar eta) {
  using Scalar = typename Derived::Scalar;
  if (!z.allFinite()) throw std::invalid_argument("gsvt_full: non-finite input");
  const auto svd = small_svd(z);
  const auto [cols, vals] = detail::threshold_spectrum<Scalar>(spec, svd.s, svd.s.size(), eta);
  if (cols.empty()) return DenseMatrix<Scalar>::Zero(z.rows(), z.cols());
  return detail::select_columns(svd.u, cols) * vals.asDiagonal() *
         detail::select_columns(svd.v, cols).transpose();
}

/// Everything the projected thresholding step produces; the solver reuses
/// the reduced spectrum and right basis for its warm start.
template <typename Scalar>
struct ProjectedStep {
  FactoredMatrix<Scalar> model;
  DenseVector<Scalar> sigmas;       ///< spectrum of W^T Z
  DenseMatrix<Scalar> right_basis;  ///< right singular vectors of W^T Z
  Scalar gamma = Scalar(0);
  Index above_gamma = 0;
};

template <typename Scalar>
ProjectedStep<Scalar> projected_threshold(const LowRankPlusSparse<Scalar>& z,
                                          const OrthonormalBasis<Scalar>& w,
                                          const RegularizerSpec& spec, Scalar eta,
                                          Diagnostics* diag = nullptr) {
  detail::require(w.rows() == z.rows(), "gsvt_projected: dimension mismatch");
  const DenseMatrix<Scalar> reduced = z.apply_transpose(w.matrix()).transpose();  // k x n
  auto svd = small_svd(reduced);
  ProjectedStep<Scalar> step;
  step.gamma = threshold_gamma<Scalar>(spec, eta, svd.s, diag);
  step.above_gamma = rank_select<Scalar>(svd.s, step.gamma);
  const auto [cols, vals] = detail::threshold_spectrum<Scalar>(spec, svd.s, step.above_gamma, eta);
  step.model.rows = z.rows();
  step.model.cols = z.cols();
  step.model.left = w.matrix() * detail::select_columns(svd.u, cols);
  step.model.values = vals;
  step.model.right = detail::select_columns(svd.v, cols);
  step.sigmas = std::move(svd.s);
  step.right_basis = std::move(svd.v);
  return step;
}

/// W * prox(W^T Z) in factored form, keeping the values above gamma.
template <typename Scalar>
FactoredMatrix<Scalar> gsvt_projected(const LowRankPlusSparse<Scalar>& z,
                                      const OrthonormalBasis<Scalar>& w, const RegularizerSpec& spec,
                                      Scalar eta, Diagnostics* diag = nullptr) {
  return projected_threshold(z, w, spec, eta, diag).model;
}

}  // namespace pumc
