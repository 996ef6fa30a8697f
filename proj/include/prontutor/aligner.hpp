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

#ifndef PRONTUTOR_ALIGNER_HPP_
#define PRONTUTOR_ALIGNER_HPP_

#include <array>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "prontutor/common.hpp"
#include "prontutor/curriculum.hpp"
#include "prontutor/dsp.hpp"
#include "prontutor/dtw.hpp"

namespace prontutor {

struct SpeakerTransform;

/// Reference renderings keyed by (phoneme, voice). The first rendering of
/// each key becomes the template; later ones are used for calibration.
class ReferenceClipSet {
 public:
  void add(Phoneme p, Voice v, AudioClip clip);
  /// Empty span when nothing was added for the key.
  std::span<const AudioClip> renderings(Phoneme p, Voice v) const;
  bool empty() const { return clips_.empty(); }

  /// Every inventory phoneme in both voices, rendered synthetically. All
  /// renderings of one key are identical.
  static ReferenceClipSet synthetic(int renderings_per_voice = 2,
                                    int duration_ms = kDefaultPhonemeMs);

 private:
  std::map<std::pair<std::size_t, Voice>, std::vector<AudioClip>> clips_;
};

struct PhonemeTemplate {
  Phoneme phoneme;
  FeatureSequence frames;
  Voice voice;
};

/// Spread of the per-frame alignment cost of a second reference rendering
/// against the templates, per phoneme.
struct PhonemeCalibration {
  double mean = 0.0;
  double sd = 0.0;
};

inline constexpr double kCalibrationSdFloor = 1e-3;

struct WordReferenceModel {
  PronLexEntry entry;
  /// Indexed by voice; one template per phoneme in entry order.
  std::array<std::vector<PhonemeTemplate>, 2> templates;
  std::array<std::vector<PhonemeCalibration>, 2> calibration;

  const std::vector<PhonemeTemplate>& templates_for(Voice v) const {
    return templates[static_cast<std::size_t>(v)];
  }
  const std::vector<PhonemeCalibration>& calibration_for(Voice v) const {
    return calibration[static_cast<std::size_t>(v)];
  }
  const FrameSpec& frame_spec() const { return templates[0].front().frames.frame_spec; }
};

/// Templates are the MFCCs of the first rendering per (phoneme, voice).
/// Calibration aligns the word built from the second rendering of each
/// phoneme (or the first, when only one exists) against the templates, and
/// records the mean and standard deviation of the per-frame path distances
/// inside each phoneme segment. The deviation is floored at
/// kCalibrationSdFloor.
WordReferenceModel build_reference_model(const PronLexEntry& entry,
                                         const ReferenceClipSet& clips,
                                         const FrameSpec& spec);

/// Learner frame range [start, end).
struct Segment {
  Eigen::Index start = 0;
  Eigen::Index end = 0;
  Eigen::Index size() const { return end - start; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

struct AlignmentResult {
  std::vector<Phoneme> phonemes;
  std::vector<Segment> segments;
  /// Mean local distance over path cells whose learner frame lies in the segment.
  std::vector<double> per_phoneme_cost;
  double path_cost = 0.0;
  /// path_cost / learner frames
  double total_cost = 0.0;
  WarpingPath<double> path;
};

/// Aligns the learner against the concatenated templates of `voice`.
/// Segment k starts at the first learner frame whose path cell touches
/// template k; starts are then pushed apart so that every segment is
/// non-empty. Throws when the learner has fewer frames than the word has
/// phonemes.
AlignmentResult force_align(const FeatureSequence& learner,
                            const WordReferenceModel& model, Voice voice);

struct ScoringParams {
  /// Score temperature: a phoneme whose cost equals tau scores 100/e.
  double tau = 10.0;
  /// Words are accepted when word_score >= fraction * 100 * |phonemes|.
  double word_accept_fraction = 0.6;
  /// Likert margin m = margin_fraction * calibration mean.
  double margin_fraction = 0.05;
  double good_band_sd = 2.0;
  double fair_band_sd = 4.0;
  /// Calibration deviations below sd_floor_fraction * tau are raised to it.
  /// Identical reference renderings can calibrate a phoneme to a deviation
  /// near zero, and the bands would then flag any cost leaking in from a
  /// neighbouring segment.
  double sd_floor_fraction = 0.1;

  double word_threshold(std::size_t phonemes) const {
    return word_accept_fraction * 100.0 * static_cast<double>(phonemes);
  }
};

struct PhonemeScore {
  Phoneme phoneme;
  double cost = 0.0;
  /// 100 * exp(-cost / tau), clamped below at 0.01.
  double acoustic_score = 100.0;

  friend bool operator==(const PhonemeScore&, const PhonemeScore&) = default;
};

inline constexpr double kMinAcousticScore = 0.01;

double acoustic_score(double cost, double tau);

std::vector<PhonemeScore> score_phonemes(const AlignmentResult& a,
                                         const ScoringParams& params);

struct LikertFeedback {
  /// 1..3 per phoneme, 3 = matches the reference.
  std::vector<int> ratings;
  std::vector<PhonemeScore> scores;
  double word_score = 0.0;
  bool accepted = false;

  int worst_rating() const;

  friend bool operator==(const LikertFeedback&, const LikertFeedback&) = default;
};

LikertFeedback to_likert(std::span<const PhonemeScore> scores,
                         const WordReferenceModel& model, Voice voice,
                         const ScoringParams& params);

/// Median alignment cost between templates of distinct phonemes in one
/// voice. Used as the default tau.
double default_tau(const ReferenceClipSet& clips, const FrameSpec& spec,
                   Voice voice = Voice::kMale);

/// Full pipeline for one utterance: features, transform, alignment, scoring.
/// The transform's voice selects the template set.
LikertFeedback score_utterance(const AudioClip& clip, const WordReferenceModel& model,
                               const SpeakerTransform& transform,
                               const ScoringParams& params);

/// Scores a whole test: clips[i] is an utterance of models[i]->entry.
TestScores batch_score(std::span<const AudioClip> clips,
                       std::span<const WordReferenceModel* const> models,
                       const SpeakerTransform& transform, const ScoringParams& params,
                       std::string participant = {}, Phase phase = Phase::kPre);

}  // namespace prontutor

#endif  // PRONTUTOR_ALIGNER_HPP_
