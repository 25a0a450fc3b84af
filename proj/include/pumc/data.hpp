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

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace pumc {

/// M_ij = 1 iff (M1 M2)_ij >= q, with M1 (m x k) and M2 (k x m) standard
/// normal. Deterministic per seed.
BinaryMatrix gen_synthetic(Index m, Index k, double q, std::uint64_t seed);

/// Observed positives, held-out positives and the rate they came from.
struct SampleSplit {
  ObservationSet observed;  ///< Omega, a subset of the positives of M
  ObservationSet heldout;   ///< positives of M that were not observed
  double delta = 0.0;

  /// The observation matrix A (ones exactly on Omega).
  BinaryMatrix observation() const { return BinaryMatrix(observed); }
};

/// One-sided sampling: exactly round(delta |Omega_1|) positives of M, drawn
/// uniformly without replacement. Zeros of M are never observed.
SampleSplit sample_one_sided(const BinaryMatrix& truth, double delta, std::uint64_t seed);

/// A ratings file turned into a 0-1 matrix, plus the id mapping.
struct RatingsData {
  BinaryMatrix matrix;
  std::vector<std::string> users;  ///< row index -> original user id
  std::vector<std::string> items;  ///< column index -> original item id
  std::size_t ratings = 0;         ///< valid records parsed
  std::size_t malformed = 0;
  std::size_t duplicates = 0;
  double threshold = 0.0;          ///< positive iff rating >= threshold
  std::vector<std::string> warnings;
};

/// Reads user,item,rating records (CSV, TSV, semicolon or whitespace; header
/// optional). Without an explicit threshold the mean rating is used.
RatingsData ingest_ratings(const std::string& path, std::optional<double> threshold = std::nullopt);
RatingsData parse_ratings(std::istream& in, std::optional<double> threshold = std::nullopt);

template <typename Derived>
BinaryMatrix binarize_predictions(const Eigen::MatrixBase<Derived>& x,
                                  typename Derived::Scalar cut = typename Derived::Scalar(0.5)) {
  return BinaryMatrix::from_dense(x, cut);
}

template <typename Scalar>
BinaryMatrix binarize_predictions(const FactoredMatrix<Scalar>& x, Scalar cut = Scalar(0.5)) {
  std::vector<Entry> pos;
  constexpr Index kChunk = 256;
  for (Index r0 = 0; r0 < x.rows; r0 += kChunk) {
    const Index len = std::min(kChunk, x.rows - r0);
    DenseMatrix<Scalar> block = DenseMatrix<Scalar>::Zero(len, x.cols);
    if (x.rank() > 0)
      block = x.left.middleRows(r0, len) * x.values.asDiagonal() * x.right.transpose();
    for (Index i = 0; i < len; ++i)
      for (Index j = 0; j < x.cols; ++j)
        if (block(i, j) >= cut) pos.push_back({r0 + i, j});
  }
  return BinaryMatrix(x.rows, x.cols, std::move(pos));
}

/// Binary-matrix text format: "m n nnz", then nnz lines "i j" (1-based).
void write_binary_matrix(std::ostream& out, const BinaryMatrix& m);
void write_binary_matrix(const std::string& path, const BinaryMatrix& m);
BinaryMatrix read_binary_matrix(std::istream& in);
BinaryMatrix read_binary_matrix(const std::string& path);

/// Deterministic 64-bit mixer (SplitMix64 finalizer).
std::uint64_t mix_seed(std::uint64_t value);
/// Seed derived from a master seed and a list of coordinates.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> coords);

}  // namespace pumc
