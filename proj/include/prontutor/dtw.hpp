// Copyright 2026 The prontutor Authors
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

#ifndef PRONTUTOR_DTW_HPP_
#define PRONTUTOR_DTW_HPP_

#include <algorithm>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "prontutor/common.hpp"

namespace prontutor {

/// One cell of a warping path: learner frame i matched to reference frame j.
struct PathCell {
  Eigen::Index learner;
  Eigen::Index reference;
  friend bool operator==(const PathCell&, const PathCell&) = default;
};

template <typename Scalar>
struct WarpingPath {
  /// Sum of local distances over all cells, accumulated from the start.
  Scalar cost = 0;
  /// Cells from (0, 0) to (rows - 1, cols - 1).
  std::vector<PathCell> cells;
  /// Local distance at each cell, parallel to cells.
  std::vector<Scalar> local;
};

/// Pairwise Euclidean distances between the rows of two feature matrices.
template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic>
pairwise_distances(const Eigen::MatrixBase<DerivedA>& a,
                   const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> d(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      d(i, j) = (a.row(i) - b.row(j)).norm();
    }
  }
  return d;
}

/// Boundary-constrained DTW over a precomputed local distance matrix.
///
/// Steps into (i, j) come from (i-1, j-1) diagonal, (i, j-1) insert (advance
/// the reference only) or (i-1, j) delete (advance the learner only), all with
/// unit weight. Ties prefer diagonal, then insert, then delete, so the path is
/// reproducible bit for bit.
template <typename Derived>
WarpingPath<typename Derived::Scalar> dtw_path(const Eigen::MatrixBase<Derived>& local) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index rows = local.rows();
  const Eigen::Index cols = local.cols();
  if (rows == 0 || cols == 0) {
    throw Error(ErrorCode::kValidation, "DTW over an empty sequence");
  }
  constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();
  // 0 = diagonal, 1 = insert, 2 = delete
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> acc(rows, cols);
  Eigen::Matrix<unsigned char, Eigen::Dynamic, Eigen::Dynamic> step(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (i == 0 && j == 0) {
        acc(0, 0) = local(0, 0);
        step(0, 0) = 0;
        continue;
      }
      const Scalar diag = (i > 0 && j > 0) ? acc(i - 1, j - 1) : kInf;
      const Scalar ins = j > 0 ? acc(i, j - 1) : kInf;
      const Scalar del = i > 0 ? acc(i - 1, j) : kInf;
      Scalar best = diag;
      unsigned char s = 0;
      if (ins < best) {
        best = ins;
        s = 1;
      }
      if (del < best) {
        best = del;
        s = 2;
      }
      acc(i, j) = best + local(i, j);
      step(i, j) = s;
    }
  }

  WarpingPath<Scalar> path;
  path.cost = acc(rows - 1, cols - 1);
  Eigen::Index i = rows - 1, j = cols - 1;
  while (true) {
    path.cells.push_back({i, j});
    path.local.push_back(local(i, j));
    if (i == 0 && j == 0) break;
    switch (step(i, j)) {
      case 0: --i; --j; break;
      case 1: --j; break;
      default: --i; break;
    }
  }
  std::reverse(path.cells.begin(), path.cells.end());
  std::reverse(path.local.begin(), path.local.end());
  return path;
}

/// DTW between two feature matrices (frames as rows) under Euclidean distance.
template <typename DerivedA, typename DerivedB>
WarpingPath<typename DerivedA::Scalar> dtw(const Eigen::MatrixBase<DerivedA>& learner,
                                           const Eigen::MatrixBase<DerivedB>& reference) {
  if (learner.cols() != reference.cols()) {
    throw Error(ErrorCode::kValidation, "DTW feature dimension mismatch");
  }
  return dtw_path(pairwise_distances(learner, reference));
}

}  // namespace prontutor

#endif  // PRONTUTOR_DTW_HPP_
