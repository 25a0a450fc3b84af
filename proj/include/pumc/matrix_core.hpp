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

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <compare>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pumc {

using Index = Eigen::Index;

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// A (row, col) position, 0-based. Ordered row-major.
struct Entry {
  Index row = 0;
  Index col = 0;
  friend auto operator<=>(const Entry&, const Entry&) = default;
};

/// Thrown when orthonormalization has nothing left to span.
class EmptyBasisError : public std::runtime_error {
 public:
  EmptyBasisError() : std::runtime_error("empty basis") {}
};

/// Free-form notes collected during a computation (clamps, fallbacks).
struct Diagnostics {
  std::vector<std::string> notes;
  void note(std::string message) { notes.push_back(std::move(message)); }
};

namespace detail {

inline void require(bool condition, const char* message) {
  if (!condition) throw std::invalid_argument(message);
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// SparseCoo

/// Immutable m x n sparse matrix built from (i, j, value) triples.
/// Duplicate positions are rejected, never summed.
template <typename Scalar>
class SparseCoo {
 public:
  using Triplet = Eigen::Triplet<Scalar, Index>;
  using Storage = Eigen::SparseMatrix<Scalar, Eigen::RowMajor, Index>;

  SparseCoo() = default;
  SparseCoo(Index rows, Index cols) : rows_(rows), cols_(cols), csr_(rows, cols) {
    detail::require(rows >= 0 && cols >= 0, "SparseCoo: negative dimension");
  }

  SparseCoo(Index rows, Index cols, std::vector<Triplet> triples)
      : rows_(rows), cols_(cols), triples_(std::move(triples)), csr_(rows, cols) {
    detail::require(rows >= 0 && cols >= 0, "SparseCoo: negative dimension");
    std::sort(triples_.begin(), triples_.end(), [](const Triplet& a, const Triplet& b) {
      return a.row() != b.row() ? a.row() < b.row() : a.col() < b.col();
    });
    for (std::size_t k = 0; k < triples_.size(); ++k) {
      const auto& t = triples_[k];
      if (t.row() < 0 || t.row() >= rows || t.col() < 0 || t.col() >= cols)
        throw std::invalid_argument("SparseCoo: index out of range");
      if (!std::isfinite(t.value())) throw std::invalid_argument("SparseCoo: non-finite value");
      if (k > 0 && triples_[k - 1].row() == t.row() && triples_[k - 1].col() == t.col())
        throw std::invalid_argument("SparseCoo: duplicate entry");
    }
    csr_.setFromTriplets(triples_.begin(), triples_.end());
    csr_.makeCompressed();
  }

  /// Identity pattern of size n (ones on the diagonal).
  static SparseCoo identity(Index n) {
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) t.emplace_back(i, i, Scalar(1));
    return SparseCoo(n, n, std::move(t));
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index nonZeros() const { return static_cast<Index>(triples_.size()); }
  const std::vector<Triplet>& triples() const { return triples_; }
  const Storage& storage() const { return csr_; }

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Triplet> triples_;
  Storage csr_;
};

// ---------------------------------------------------------------------------
// FactoredMatrix

/// X = left * diag(values) * right^T with orthonormal left (m x r) and
/// right (n x r) and nonincreasing positive values; values are therefore the
/// nonzero singular values of X.
template <typename Scalar>
struct FactoredMatrix {
  using Matrix = DenseMatrix<Scalar>;
  using Vector = DenseVector<Scalar>;

  Index rows = 0;
  Index cols = 0;
  Matrix left;
  Vector values;
  Matrix right;

  static FactoredMatrix zero(Index m, Index n) {
    return FactoredMatrix{m, n, Matrix(m, 0), Vector(0), Matrix(n, 0)};
  }

  Index rank() const { return values.size(); }

  Matrix dense() const {
    if (rank() == 0) return Matrix::Zero(rows, cols);
    return left * values.asDiagonal() * right.transpose();
  }

  /// ||X||_F^2, exact because the factors are orthonormal.
  Scalar squared_norm() const { return values.squaredNorm(); }

  Scalar coeff(Index i, Index j) const {
    Scalar v(0);
    for (Index k = 0; k < rank(); ++k) v += left(i, k) * values[k] * right(j, k);
    return v;
  }

  /// Values of X at the given positions, O(|entries| * r).
  Vector sample(std::span<const Entry> entries) const {
    Vector out = Vector::Zero(static_cast<Index>(entries.size()));
    if (rank() == 0) return out;
    // Column-major transposes make each row of the factors contiguous.
    const Matrix lt = (left * values.asDiagonal()).transpose();
    const Matrix rt = right.transpose();
    for (std::size_t k = 0; k < entries.size(); ++k)
      out[static_cast<Index>(k)] = lt.col(entries[k].row).dot(rt.col(entries[k].col));
    return out;
  }
};

/// <X, Y>_F for two factored matrices, without forming either.
template <typename Scalar>
Scalar inner_product(const FactoredMatrix<Scalar>& x, const FactoredMatrix<Scalar>& y) {
  detail::require(x.rows == y.rows && x.cols == y.cols, "inner_product: dimension mismatch");
  if (x.rank() == 0 || y.rank() == 0) return Scalar(0);
  const DenseMatrix<Scalar> lu = x.left.transpose() * y.left;
  const DenseMatrix<Scalar> rv = x.right.transpose() * y.right;
  return (x.values.asDiagonal() * lu * y.values.asDiagonal()).cwiseProduct(rv).sum();
}

/// ||X - Y||_F^2 for two factored matrices.
template <typename Scalar>
Scalar squared_distance(const FactoredMatrix<Scalar>& x, const FactoredMatrix<Scalar>& y) {
  const Scalar d = x.squared_norm() + y.squared_norm() - Scalar(2) * inner_product(x, y);
  return std::max(d, Scalar(0));
}

// ---------------------------------------------------------------------------
// LowRankPlusSparse

/// One term coeff * left * right^T, left m x r, right n x r.
template <typename Scalar>
struct LowRankTerm {
  DenseMatrix<Scalar> left;
  DenseMatrix<Scalar> right;
  Scalar coeff = Scalar(1);

  static LowRankTerm from(const FactoredMatrix<Scalar>& x, Scalar coeff) {
    return LowRankTerm{x.left * x.values.asDiagonal(), x.right, coeff};
  }
};

/// Sum of low-rank terms plus one sparse term, never materialized:
/// products cost O((m + n) r + nnz) per column.
template <typename Scalar>
class LowRankPlusSparse {
 public:
  using Matrix = DenseMatrix<Scalar>;
  using Vector = DenseVector<Scalar>;

  LowRankPlusSparse(Index rows, Index cols, std::vector<LowRankTerm<Scalar>> terms,
                    SparseCoo<Scalar> sparse)
      : rows_(rows), cols_(cols), terms_(std::move(terms)), sparse_(std::move(sparse)) {
    detail::require(sparse_.rows() == rows && sparse_.cols() == cols,
                    "LowRankPlusSparse: sparse part dimension mismatch");
    for (const auto& t : terms_) {
      detail::require(t.left.rows() == rows && t.right.rows() == cols &&
                          t.left.cols() == t.right.cols(),
                      "LowRankPlusSparse: factor dimension mismatch");
      detail::require(t.left.allFinite() && t.right.allFinite() && std::isfinite(t.coeff),
                      "LowRankPlusSparse: non-finite factor");
    }
  }

  LowRankPlusSparse(Index rows, Index cols)
      : LowRankPlusSparse(rows, cols, {}, SparseCoo<Scalar>(rows, cols)) {}

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  const std::vector<LowRankTerm<Scalar>>& terms() const { return terms_; }
  const SparseCoo<Scalar>& sparse() const { return sparse_; }

  /// Z * B for B n x k.
  Matrix apply(const Eigen::Ref<const Matrix>& b) const {
    detail::require(b.rows() == cols_, "matvec: dimension mismatch");
    Matrix out = sparse_.storage() * b;
    for (const auto& t : terms_) {
      if (t.left.cols() == 0) continue;
      out.noalias() += t.coeff * (t.left * (t.right.transpose() * b));
    }
    return out;
  }

  /// Z^T * B for B m x k.
  Matrix apply_transpose(const Eigen::Ref<const Matrix>& b) const {
    detail::require(b.rows() == rows_, "transpose_matvec: dimension mismatch");
    Matrix out = sparse_.storage().transpose() * b;
    for (const auto& t : terms_) {
      if (t.left.cols() == 0) continue;
      out.noalias() += t.coeff * (t.right * (t.left.transpose() * b));
    }
    return out;
  }

  /// Dense m x n copy; for tests and small reference paths only.
  Matrix materialize() const {
    Matrix out = Matrix(sparse_.storage());
    for (const auto& t : terms_) out.noalias() += t.coeff * t.left * t.right.transpose();
    return out;
  }

 private:
  Index rows_;
  Index cols_;
  std::vector<LowRankTerm<Scalar>> terms_;
  SparseCoo<Scalar> sparse_;
};

template <typename Scalar>
DenseVector<Scalar> matvec(const LowRankPlusSparse<Scalar>& op,
                           const DenseVector<Scalar>& b) {
  detail::require(b.allFinite(), "matvec: non-finite input");
  return op.apply(b);
}

template <typename Scalar>
DenseVector<Scalar> transpose_matvec(const LowRankPlusSparse<Scalar>& op,
                                     const DenseVector<Scalar>& b) {
  detail::require(b.allFinite(), "transpose_matvec: non-finite input");
  return op.apply_transpose(b);
}

// ---------------------------------------------------------------------------
// Orthonormal bases

/// m x k matrix with orthonormal columns.
template <typename Scalar>
class OrthonormalBasis {
 public:
  using Matrix = DenseMatrix<Scalar>;

  /// Wraps columns the caller guarantees to be orthonormal.
  static OrthonormalBasis trusted(Matrix q) { return OrthonormalBasis(std::move(q)); }

  const Matrix& matrix() const { return q_; }
  Index rows() const { return q_.rows(); }
  Index cols() const { return q_.cols(); }

 private:
  explicit OrthonormalBasis(Matrix q) : q_(std::move(q)) {}
  Matrix q_;
};

/// Relative column norm below which a column counts as dependent.
inline constexpr double kDependentColumnTol = 1e-12;

/// Gram-Schmidt with one re-orthogonalization pass. Each column is scaled to
/// unit norm first; columns whose residual falls below 1e-12 are dropped.
template <typename Derived>
OrthonormalBasis<typename Derived::Scalar> qr_orthonormalize(const Eigen::MatrixBase<Derived>& r) {
  using Scalar = typename Derived::Scalar;
  using Matrix = DenseMatrix<Scalar>;
  detail::require(r.allFinite(), "qr_orthonormalize: non-finite input");
  const Index m = r.rows();
  Matrix q(m, std::min(m, r.cols()));
  Index kept = 0;
  for (Index j = 0; j < r.cols() && kept < m; ++j) {
    const Scalar norm = r.col(j).norm();
    if (!(norm > Scalar(0))) continue;
    DenseVector<Scalar> v = r.col(j) / norm;
    for (int pass = 0; pass < 2 && kept > 0; ++pass) {
      const DenseVector<Scalar> proj = q.leftCols(kept).transpose() * v;
      v.noalias() -= q.leftCols(kept) * proj;
    }
    const Scalar residual = v.norm();
    if (residual < Scalar(kDependentColumnTol)) continue;
    q.col(kept++) = v / residual;
  }
  if (kept == 0) throw EmptyBasisError();
  return OrthonormalBasis<Scalar>::trusted(q.leftCols(kept));
}

/// Subspace iteration with re-orthonormalization every step:
/// W = QR(Z Y), then H - 1 refinements W = QR(Z (Z^T W)).
template <typename Scalar>
OrthonormalBasis<Scalar> power_method(const LowRankPlusSparse<Scalar>& z,
                                      const DenseMatrix<Scalar>& y, int iterations,
                                      Diagnostics* diag = nullptr) {
  detail::require(iterations >= 1, "power_method: iterations must be >= 1");
  detail::require(y.cols() >= 1, "power_method: empty start block");
  detail::require(y.rows() == z.cols(), "power_method: dimension mismatch");
  const Index limit = std::min(z.rows(), z.cols());
  Index k = y.cols();
  if (k > limit) {
    if (diag) diag->note("power_method: width " + std::to_string(k) + " clamped to " +
                         std::to_string(limit));
    k = limit;
  }
  auto w = qr_orthonormalize(z.apply(y.leftCols(k)));
  for (int h = 1; h < iterations; ++h) {
    const DenseMatrix<Scalar> zt_w = z.apply_transpose(w.matrix());
    w = qr_orthonormalize(z.apply(zt_w));
  }
  return w;
}

// ---------------------------------------------------------------------------
// Small exact SVD

template <typename Scalar>
struct SvdResult {
  DenseMatrix<Scalar> u;
  DenseVector<Scalar> s;  ///< nonincreasing, nonnegative
  DenseMatrix<Scalar> v;
};

/// Thin exact SVD B = U diag(s) V^T of a reduced matrix.
template <typename Derived>
SvdResult<typename Derived::Scalar> small_svd(const Eigen::MatrixBase<Derived>& b) {
  using Scalar = typename Derived::Scalar;
  using Matrix = DenseMatrix<Scalar>;
  if (!b.allFinite()) throw std::invalid_argument("small_svd: non-finite entries");
  if (b.rows() == 0 || b.cols() == 0)
    return {Matrix(b.rows(), 0), DenseVector<Scalar>(0), Matrix(b.cols(), 0)};
  Eigen::BDCSVD<Matrix> svd(b.derived().eval(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

}  // namespace pumc
