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

#include <algorithm>
#include <iterator>
#include <span>
#include <vector>

namespace pumc {

/// A sorted, duplicate-free set of positions in an m x n grid.
class ObservationSet {
 public:
  ObservationSet() = default;
  ObservationSet(Index rows, Index cols, std::vector<Entry> entries)
      : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    detail::require(rows >= 0 && cols >= 0, "ObservationSet: negative dimension");
    std::sort(entries_.begin(), entries_.end());
    for (std::size_t k = 0; k < entries_.size(); ++k) {
      const Entry& e = entries_[k];
      if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols)
        throw std::invalid_argument("ObservationSet: index out of range");
      if (k > 0 && entries_[k - 1] == e)
        throw std::invalid_argument("ObservationSet: duplicate entry");
    }
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::span<const Entry> entries() const { return entries_; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  bool contains(Entry e) const { return std::binary_search(entries_.begin(), entries_.end(), e); }
  bool contains(Index i, Index j) const { return contains(Entry{i, j}); }

  /// Entries of this set that are not in `other`.
  ObservationSet minus(const ObservationSet& other) const {
    std::vector<Entry> out;
    out.reserve(entries_.size());
    std::set_difference(entries_.begin(), entries_.end(), other.entries_.begin(),
                        other.entries_.end(), std::back_inserter(out));
    return ObservationSet(rows_, cols_, std::move(out), Sorted{});
  }

  /// Entries present in both sets.
  ObservationSet intersect(const ObservationSet& other) const {
    std::vector<Entry> out;
    std::set_intersection(entries_.begin(), entries_.end(), other.entries_.begin(),
                          other.entries_.end(), std::back_inserter(out));
    return ObservationSet(rows_, cols_, std::move(out), Sorted{});
  }

  friend bool operator==(const ObservationSet&, const ObservationSet&) = default;

 private:
  struct Sorted {};
  ObservationSet(Index rows, Index cols, std::vector<Entry> entries, Sorted)
      : rows_(rows), cols_(cols), entries_(std::move(entries)) {}

  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Entry> entries_;
};

/// A 0-1 matrix stored as its dimensions and the set of positive positions.
class BinaryMatrix {
 public:
  BinaryMatrix() = default;
  BinaryMatrix(Index rows, Index cols, std::vector<Entry> positives)
      : positives_(rows, cols, std::move(positives)) {}
  explicit BinaryMatrix(ObservationSet positives) : positives_(std::move(positives)) {}

  /// Entry (i, j) is one iff dense(i, j) >= cut.
  template <typename Derived>
  static BinaryMatrix from_dense(const Eigen::MatrixBase<Derived>& x,
                                 typename Derived::Scalar cut = typename Derived::Scalar(0.5)) {
    std::vector<Entry> pos;
    for (Index i = 0; i < x.rows(); ++i)
      for (Index j = 0; j < x.cols(); ++j)
        if (x(i, j) >= cut) pos.push_back({i, j});
    return BinaryMatrix(x.rows(), x.cols(), std::move(pos));
  }

  Index rows() const { return positives_.rows(); }
  Index cols() const { return positives_.cols(); }
  std::size_t nnz() const { return positives_.size(); }
  double density() const {
    const double total = static_cast<double>(rows()) * static_cast<double>(cols());
    return total > 0 ? static_cast<double>(nnz()) / total : 0.0;
  }
  const ObservationSet& positives() const { return positives_; }
  bool operator()(Index i, Index j) const { return positives_.contains(i, j); }

  template <typename Scalar = double>
  DenseMatrix<Scalar> dense() const {
    DenseMatrix<Scalar> out = DenseMatrix<Scalar>::Zero(rows(), cols());
    for (const Entry& e : positives_) out(e.row, e.col) = Scalar(1);
    return out;
  }

  friend bool operator==(const BinaryMatrix&, const BinaryMatrix&) = default;

 private:
  ObservationSet positives_;
};

}  // namespace pumc
