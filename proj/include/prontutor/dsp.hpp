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

#ifndef PRONTUTOR_DSP_HPP_
#define PRONTUTOR_DSP_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "prontutor/common.hpp"
#include "prontutor/curriculum.hpp"

namespace prontutor {

inline constexpr int kSampleRate = 16000;

/// Mono 16-bit PCM at kSampleRate.
struct AudioClip {
  std::vector<std::int16_t> samples;
  int sample_rate = kSampleRate;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  friend bool operator==(const AudioClip&, const AudioClip&) = default;
};

/// Frontend constants. These are engine choices, not measured values.
struct FrameSpec {
  double frame_length_ms = 25.0;
  double hop_ms = 10.0;
  int fft_size = 512;
  int num_filters = 26;
  int num_cepstra = 13;
  double preemphasis = 0.97;
  double log_floor = 1e-10;
  /// Append delta and delta-delta coefficients (3 * num_cepstra dims).
  bool deltas = false;

  int frame_samples() const;
  int hop_samples() const;
  int dimension() const { return deltas ? 3 * num_cepstra : num_cepstra; }
  /// Throws Error(kValidation) on inconsistent values.
  void validate() const;

  friend bool operator==(const FrameSpec&, const FrameSpec&) = default;
};

/// Row-major so that one frame is one contiguous row.
template <typename Scalar>
using FeatureMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Time-ordered feature vectors, one row per frame.
struct FeatureSequence {
  FeatureMatrix<double> vectors;
  FrameSpec frame_spec;

  Eigen::Index frames() const { return vectors.rows(); }
  Eigen::Index dimension() const { return vectors.cols(); }
};

/// Concatenates sequences along time. All inputs must share dimension.
FeatureSequence concatenate(std::span<const FeatureSequence> parts);

/// floor((n - frame) / hop) + 1, or 0 when n < frame.
std::size_t frame_count(std::size_t num_samples, const FrameSpec& spec);

// WAV I/O. Only RIFF/WAVE PCM-16 mono at 16 kHz is accepted; anything else is
// rejected with a message naming the offending field.
AudioClip parse_wav(std::span<const std::uint8_t> bytes);
AudioClip read_wav(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_wav(const AudioClip& clip);
void write_wav(const AudioClip& clip, const std::filesystem::path& path);

/// Triangular mel filterbank, num_filters x (fft_size / 2 + 1).
Eigen::MatrixXd mel_filterbank(const FrameSpec& spec, int sample_rate = kSampleRate);

/// Per-frame filterbank energies over the magnitude spectrum of the
/// pre-emphasised, Hamming-windowed frames (frames x num_filters).
Eigen::MatrixXd mel_energies(const AudioClip& clip, const FrameSpec& spec);

/// Log-mel energies floored at spec.log_floor, orthonormal DCT-II, first
/// num_cepstra coefficients. Throws when the clip is shorter than one frame.
FeatureSequence mfcc(const AudioClip& clip, const FrameSpec& spec);

// Synthetic speech. Each phoneme renders as a fixed pair of sinusoids; the
// tables are the test oracle for the whole pipeline, standing in for
// recorded reference speakers.

inline constexpr int kDefaultPhonemeMs = 120;
inline constexpr double kFemaleFrequencyRatio = 1.2;

/// Base (male) tone pair for a phoneme. Low tones sit in 300..900 Hz and high
/// tones in 1500..3000 Hz on a 150 Hz grid, so that a detune of up to 0.5
/// never carries a low tone onto a high one.
std::pair<double, double> phoneme_tones(Phoneme p, Voice voice);

/// Renders a phoneme with both tones scaled by (1 + detune). 10 ms raised
/// cosine onset and offset. duration_ms >= 40.
AudioClip synth_phoneme_signal(Phoneme p, int duration_ms, Voice voice,
                               double detune = 0.0);

/// Per-phoneme corruption for simulated learners.
struct ErrorModel {
  /// Detune fraction per phoneme position, each in [0, 0.5]. Empty = none.
  std::vector<double> detune;
  int phoneme_ms = kDefaultPhonemeMs;
};

AudioClip synth_word_utterance(const PronLexEntry& entry, Voice voice,
                               const ErrorModel& errors = {});

AudioClip concatenate(std::span<const AudioClip> clips);

/// Deterministic white noise, for rejection tests.
AudioClip synth_noise(int duration_ms, double amplitude, std::uint64_t seed);

}  // namespace prontutor

#endif  // PRONTUTOR_DSP_HPP_
