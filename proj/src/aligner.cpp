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

#include "prontutor/aligner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "prontutor/adaptation.hpp"

namespace prontutor {
namespace {

constexpr std::array<Voice, 2> kVoices = {Voice::kMale, Voice::kFemale};

std::string key_name(Phoneme p, Voice v) {
  return "phoneme " + std::string(p.symbol()) + " voice " + std::string(to_string(v));
}

FeatureSequence concatenated_templates(const std::vector<PhonemeTemplate>& tpls,
                                       std::vector<Eigen::Index>& starts) {
  std::vector<FeatureSequence> parts;
  parts.reserve(tpls.size());
  starts.clear();
  Eigen::Index at = 0;
  for (const auto& t : tpls) {
    starts.push_back(at);
    at += t.frames.frames();
    parts.push_back(t.frames);
  }
  return concatenate(parts);
}

}  // namespace

void ReferenceClipSet::add(Phoneme p, Voice v, AudioClip clip) {
  clips_[{p.index(), v}].push_back(std::move(clip));
}

std::span<const AudioClip> ReferenceClipSet::renderings(Phoneme p, Voice v) const {
  auto it = clips_.find({p.index(), v});
  if (it == clips_.end()) return {};
  return it->second;
}

ReferenceClipSet ReferenceClipSet::synthetic(int renderings_per_voice, int duration_ms) {
  ReferenceClipSet set;
  for (auto symbol : phoneme_inventory()) {
    const Phoneme p(symbol);
    for (Voice v : kVoices) {
      const AudioClip clip = synth_phoneme_signal(p, duration_ms, v);
      for (int r = 0; r < renderings_per_voice; ++r) set.add(p, v, clip);
    }
  }
  return set;
}

WordReferenceModel build_reference_model(const PronLexEntry& entry,
                                         const ReferenceClipSet& clips,
                                         const FrameSpec& spec) {
  WordReferenceModel model;
  model.entry = entry;
  for (Voice v : kVoices) {
    auto& tpls = model.templates[static_cast<std::size_t>(v)];
    std::vector<AudioClip> second;
    for (Phoneme p : entry.phonemes) {
      const auto r = clips.renderings(p, v);
      if (r.empty()) {
        throw Error(ErrorCode::kNotFound, "missing reference clip for " + key_name(p, v));
      }
      if (frame_count(r.front().samples.size(), spec) < 2) {
        throw Error(ErrorCode::kValidation,
                    "reference clip too short for " + key_name(p, v));
      }
      tpls.push_back({p, mfcc(r.front(), spec), v});
      second.push_back(r.size() > 1 ? r[1] : r[0]);
    }

    const FeatureSequence rendered = mfcc(concatenate(second), spec);
    const AlignmentResult a = force_align(rendered, model, v);
    auto& calib = model.calibration[static_cast<std::size_t>(v)];
    calib.assign(entry.phonemes.size(), {});
    std::vector<std::vector<double>> locals(entry.phonemes.size());
    std::size_t seg = 0;
    for (std::size_t c = 0; c < a.path.cells.size(); ++c) {
      const Eigen::Index i = a.path.cells[c].learner;
      while (i >= a.segments[seg].end) ++seg;
      locals[seg].push_back(a.path.local[c]);
    }
    for (std::size_t k = 0; k < locals.size(); ++k) {
      const auto& xs = locals[k];
      const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
      double ss = 0.0;
      for (double x : xs) ss += (x - mean) * (x - mean);
      const double sd = xs.size() > 1 ? std::sqrt(ss / (xs.size() - 1)) : 0.0;
      calib[k] = {mean, std::max(sd, kCalibrationSdFloor)};
    }
  }
  return model;
}

AlignmentResult force_align(const FeatureSequence& learner, const WordReferenceModel& model,
                            Voice voice) {
  const auto& tpls = model.templates_for(voice);
  const auto num_phonemes = static_cast<Eigen::Index>(tpls.size());
  const Eigen::Index frames = learner.frames();
  if (num_phonemes == 0) throw Error(ErrorCode::kValidation, "model has no templates");
  if (frames < num_phonemes) {
    throw Error(ErrorCode::kValidation,
                "learner has " + std::to_string(frames) + " frames, fewer than " +
                    std::to_string(num_phonemes) + " phonemes");
  }
  std::vector<Eigen::Index> tstart;
  const FeatureSequence reference = concatenated_templates(tpls, tstart);
  if (reference.dimension() != learner.dimension()) {
    throw Error(ErrorCode::kValidation, "learner feature dimension does not match model");
  }

  AlignmentResult out;
  out.path = dtw(learner.vectors, reference.vectors);
  out.path_cost = out.path.cost;
  out.total_cost = out.path_cost / static_cast<double>(frames);
  for (const auto& t : tpls) out.phonemes.push_back(t.phoneme);

  // First learner frame touching each template.
  std::vector<Eigen::Index> start(num_phonemes + 1, -1);
  for (const auto& cell : out.path.cells) {
    const auto k = static_cast<std::size_t>(
        std::upper_bound(tstart.begin(), tstart.end(), cell.reference) - tstart.begin() - 1);
    if (start[k] < 0) start[k] = cell.learner;
  }
  start[0] = 0;
  start[num_phonemes] = frames;
  for (Eigen::Index k = 1; k < num_phonemes; ++k) {
    start[k] = std::max(start[k], start[k - 1] + 1);
  }
  for (Eigen::Index k = num_phonemes - 1; k >= 1; --k) {
    start[k] = std::min(start[k], start[k + 1] - 1);
  }
  for (Eigen::Index k = 0; k < num_phonemes; ++k) out.segments.push_back({start[k], start[k + 1]});

  std::vector<double> sum(num_phonemes, 0.0);
  std::vector<int> count(num_phonemes, 0);
  std::size_t seg = 0;
  for (std::size_t c = 0; c < out.path.cells.size(); ++c) {
    while (out.path.cells[c].learner >= out.segments[seg].end) ++seg;
    sum[seg] += out.path.local[c];
    ++count[seg];
  }
  for (Eigen::Index k = 0; k < num_phonemes; ++k) out.per_phoneme_cost.push_back(sum[k] / count[k]);
  return out;
}

double acoustic_score(double cost, double tau) {
  return std::max(kMinAcousticScore, 100.0 * std::exp(-cost / tau));
}

std::vector<PhonemeScore> score_phonemes(const AlignmentResult& a, const ScoringParams& params) {
  std::vector<PhonemeScore> out;
  out.reserve(a.phonemes.size());
  for (std::size_t k = 0; k < a.phonemes.size(); ++k) {
    out.push_back({a.phonemes[k], a.per_phoneme_cost[k],
                   acoustic_score(a.per_phoneme_cost[k], params.tau)});
  }
  return out;
}

int LikertFeedback::worst_rating() const {
  return ratings.empty() ? 3 : *std::min_element(ratings.begin(), ratings.end());
}

LikertFeedback to_likert(std::span<const PhonemeScore> scores, const WordReferenceModel& model,
                         Voice voice, const ScoringParams& params) {
  const auto& calib = model.calibration_for(voice);
  if (scores.size() != calib.size()) {
    throw Error(ErrorCode::kValidation, "score count " + std::to_string(scores.size()) +
                                            " does not match " + std::to_string(calib.size()) +
                                            " phonemes");
  }
  LikertFeedback fb;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    const auto& c = calib[k];
    const double margin = params.margin_fraction * c.mean;
    const double sd = std::max(c.sd, params.sd_floor_fraction * params.tau);
    int rating = 1;
    if (scores[k].cost <= c.mean + params.good_band_sd * sd + margin) {
      rating = 3;
    } else if (scores[k].cost <= c.mean + params.fair_band_sd * sd + margin) {
      rating = 2;
    }
    fb.ratings.push_back(rating);
    fb.scores.push_back(scores[k]);
    fb.word_score += scores[k].acoustic_score;
  }
  fb.accepted = fb.word_score >= params.word_threshold(scores.size());
  return fb;
}

double default_tau(const ReferenceClipSet& clips, const FrameSpec& spec, Voice voice) {
  std::vector<FeatureSequence> feats;
  for (auto symbol : phoneme_inventory()) {
    const auto r = clips.renderings(Phoneme(symbol), voice);
    if (!r.empty()) feats.push_back(mfcc(r.front(), spec));
  }
  if (feats.size() < 2) {
    throw Error(ErrorCode::kInsufficientData, "need two phonemes to calibrate tau");
  }
  std::vector<double> costs;
  for (std::size_t a = 0; a < feats.size(); ++a) {
    for (std::size_t b = 0; b < feats.size(); ++b) {
      if (a == b) continue;
      costs.push_back(dtw(feats[a].vectors, feats[b].vectors).cost /
                      static_cast<double>(feats[a].frames()));
    }
  }
  const auto mid = costs.begin() + static_cast<std::ptrdiff_t>(costs.size() / 2);
  std::nth_element(costs.begin(), mid, costs.end());
  return *mid;
}

LikertFeedback score_utterance(const AudioClip& clip, const WordReferenceModel& model,
                               const SpeakerTransform& transform,
                               const ScoringParams& params) {
  const FeatureSequence raw = mfcc(clip, model.frame_spec());
  const FeatureSequence adapted = apply_transform(transform, raw);
  const AlignmentResult a = force_align(adapted, model, transform.voice);
  const auto scores = score_phonemes(a, params);
  return to_likert(scores, model, transform.voice, params);
}

TestScores batch_score(std::span<const AudioClip> clips,
                       std::span<const WordReferenceModel* const> models,
                       const SpeakerTransform& transform, const ScoringParams& params,
                       std::string participant, Phase phase) {
  if (clips.size() != models.size()) {
    throw Error(ErrorCode::kValidation, "pairing mismatch: " + std::to_string(clips.size()) +
                                            " clips for " + std::to_string(models.size()) +
                                            " words");
  }
  TestScores out{std::move(participant), phase, 0.0, 0};
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const LikertFeedback fb = score_utterance(clips[i], *models[i], transform, params);
    out.total += fb.word_score;
    if (fb.accepted) ++out.words_accepted;
  }
  return out;
}

}  // namespace prontutor
