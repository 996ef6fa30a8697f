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

#ifndef PRONTUTOR_ADAPTATION_HPP_
#define PRONTUTOR_ADAPTATION_HPP_

#include <limits>
#include <optional>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "prontutor/aligner.hpp"
#include "prontutor/common.hpp"
#include "prontutor/dsp.hpp"

namespace prontutor {

/// x -> A x + b on column vectors.
template <typename Scalar>
struct AffineTransform {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> A;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> b;

  static AffineTransform identity(Eigen::Index dim) {
    return {Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Identity(dim, dim),
            Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(dim)};
  }

  Eigen::Index dimension() const { return b.size(); }

  /// Applies to every row of a frames-as-rows matrix.
  template <typename Derived>
  FeatureMatrix<Scalar> apply_rows(const Eigen::MatrixBase<Derived>& rows) const {
    FeatureMatrix<Scalar> out = rows * A.transpose();
    out.rowwise() += b.transpose();
    return out;
  }

  bool is_finite() const { return A.allFinite() && b.allFinite(); }
};

inline constexpr int kAffineRefinementSteps = 20;

/// Sum of squared residuals ||A x_i + b - y_i||^2 over paired rows.
template <typename Scalar, typename DerivedX, typename DerivedY>
Scalar affine_residual(const AffineTransform<Scalar>& t, const Eigen::MatrixBase<DerivedX>& x,
                       const Eigen::MatrixBase<DerivedY>& y) {
  return (t.apply_rows(x) - y).squaredNorm();
}

/// Closed-form ridge least squares for min sum ||A x_i + b - y_i||^2 with rows
/// x_i, y_i. The ridge term is applied to the augmented normal matrix,
/// including the bias column. Throws Error(kInsufficientData) with fewer than
/// D + 1 pairs and Error(kRankDeficient) when the regularised system is still
/// not positive definite.
template <typename DerivedX, typename DerivedY>
AffineTransform<typename DerivedX::Scalar> fit_affine(
    const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y,
    typename DerivedX::Scalar ridge) {
  using Scalar = typename DerivedX::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (y.rows() != n || y.cols() != d) {
    throw Error(ErrorCode::kValidation, "paired frame shapes differ");
  }
  if (n < d + 1) {
    throw Error(ErrorCode::kInsufficientData,
                "insufficient enrollment: " + std::to_string(n) + " frame pairs, need " +
                    std::to_string(d + 1));
  }
  Matrix aug(n, d + 1);
  aug.leftCols(d) = x;
  aug.col(d).setOnes();
  Matrix normal = aug.transpose() * aug;
  normal.diagonal().array() += ridge;
  Eigen::LLT<Matrix> llt(normal);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kRankDeficient, "enrollment system is rank deficient");
  }
  // Solves (G + ridge I) W^T = aug^T y for W = [A b], then refines towards the
  // unregularised normal equations by iterated Tikhonov steps. Each step
  // shrinks the ridge bias by ridge / (ridge + eigenvalue); null directions
  // of G are left where the ridge solution put them.
  const Matrix rhs = aug.transpose() * y;
  Matrix gram = normal;
  gram.diagonal().array() -= ridge;
  Matrix wt = llt.solve(rhs);
  for (int it = 0; it < kAffineRefinementSteps; ++it) {
    const Matrix step = llt.solve(rhs - gram * wt);
    wt += step;
    if (step.norm() <= std::numeric_limits<Scalar>::epsilon() * wt.norm()) break;
  }
  AffineTransform<Scalar> t{wt.topRows(d).transpose(), wt.row(d).transpose()};
  if (!t.is_finite()) {
    throw Error(ErrorCode::kRankDeficient, "enrollment system is rank deficient");
  }
  return t;
}

/// Per-speaker (or per-gender, when shared) affine feature transform.
struct SpeakerTransform {
  AffineTransform<double> affine;
  Voice voice = Voice::kMale;
  std::size_t enrollment_frame_count = 0;

  static SpeakerTransform identity(Eigen::Index dim, Voice voice);
};

struct EnrollmentUtterance {
  FeatureSequence learner;
  const WordReferenceModel* model = nullptr;
};

struct AdaptationParams {
  double ridge = 1e-6;
  /// Alternations of align and fit; stops early once the paths repeat.
  int max_iterations = 8;
};

/// Aligns every learner utterance to its voice-matched reference, pairs the
/// frames along each path and fits the affine map learner -> reference. The
/// alignment is redone under the current estimate until the frame pairing
/// stops changing.
SpeakerTransform estimate_transform(std::span<const EnrollmentUtterance> enrollment,
                                    Voice voice, const AdaptationParams& params = {});

FeatureSequence apply_transform(const SpeakerTransform& t, const FeatureSequence& f);

/// Template set for a declared voice. Unspecified falls back to male and logs
/// a warning.
Voice select_voice_model(std::optional<Voice> declared);

// Flat record: {"dim", "A" (row-major), "b", "voice", "frames"}.
std::string serialize_transform(const SpeakerTransform& t);
SpeakerTransform parse_transform(std::string_view text);

}  // namespace prontutor

#endif  // PRONTUTOR_ADAPTATION_HPP_
