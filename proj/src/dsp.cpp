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

#include "prontutor/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

#include <unsupported/Eigen/FFT>

#include "prontutor/random.hpp"

namespace prontutor {
namespace {

constexpr double kPi = std::numbers::pi;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

std::int16_t to_pcm(double x) {
  return static_cast<std::int16_t>(std::lround(std::clamp(x, -32768.0, 32767.0)));
}

// Regression deltas over +-2 frames with edge replication.
FeatureMatrix<double> deltas_of(const FeatureMatrix<double>& c) {
  const Eigen::Index n = c.rows();
  FeatureMatrix<double> d(n, c.cols());
  for (Eigen::Index t = 0; t < n; ++t) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(c.cols());
    for (int k = 1; k <= 2; ++k) {
      const Eigen::Index ahead = std::min(t + k, n - 1);
      const Eigen::Index behind = std::max<Eigen::Index>(t - k, 0);
      acc += k * (c.row(ahead) - c.row(behind));
    }
    d.row(t) = acc / 10.0;
  }
  return d;
}

}  // namespace

int FrameSpec::frame_samples() const {
  return static_cast<int>(std::lround(frame_length_ms * kSampleRate / 1000.0));
}

int FrameSpec::hop_samples() const {
  return static_cast<int>(std::lround(hop_ms * kSampleRate / 1000.0));
}

void FrameSpec::validate() const {
  if (frame_samples() <= 0 || hop_samples() <= 0) {
    throw Error(ErrorCode::kValidation, "frame and hop must be positive");
  }
  if (hop_samples() > frame_samples()) {
    throw Error(ErrorCode::kValidation, "hop longer than frame");
  }
  if (fft_size < frame_samples() || (fft_size & (fft_size - 1)) != 0) {
    throw Error(ErrorCode::kValidation,
                "fft_size must be a power of two >= frame samples");
  }
  if (num_filters < 2 || num_cepstra < 1 || num_cepstra > num_filters) {
    throw Error(ErrorCode::kValidation, "bad filterbank/cepstra sizes");
  }
  if (!(log_floor > 0.0)) throw Error(ErrorCode::kValidation, "log_floor must be > 0");
}

std::size_t frame_count(std::size_t num_samples, const FrameSpec& spec) {
  const auto frame = static_cast<std::size_t>(spec.frame_samples());
  const auto hop = static_cast<std::size_t>(spec.hop_samples());
  if (num_samples < frame) return 0;
  return (num_samples - frame) / hop + 1;
}

FeatureSequence concatenate(std::span<const FeatureSequence> parts) {
  if (parts.empty()) return {};
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts.front().dimension();
  for (const auto& p : parts) {
    if (p.dimension() != cols) {
      throw Error(ErrorCode::kValidation, "feature dimension mismatch in concatenate");
    }
    rows += p.frames();
  }
  FeatureSequence out{FeatureMatrix<double>(rows, cols), parts.front().frame_spec};
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.vectors.middleRows(at, p.frames()) = p.vectors;
    at += p.frames();
  }
  return out;
}

AudioClip parse_wav(std::span<const std::uint8_t> b) {
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 ||
      std::memcmp(b.data() + 8, "WAVE", 4) != 0) {
    throw Error(ErrorCode::kParse, "malformed header: not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  std::span<const std::uint8_t> data;
  bool have_data = false;
  std::size_t at = 12;
  while (at + 8 <= b.size()) {
    const std::uint32_t size = read_u32(b, at + 4);
    if (size > b.size() - at - 8) {
      throw Error(ErrorCode::kParse, "malformed header: chunk overruns file");
    }
    const auto body = b.subspan(at + 8, size);
    if (std::memcmp(b.data() + at, "fmt ", 4) == 0) {
      if (size < 16) throw Error(ErrorCode::kParse, "malformed header: short fmt chunk");
      const auto format = read_u16(body, 0);
      const auto channels = read_u16(body, 2);
      const auto rate = read_u32(body, 4);
      const auto bits = read_u16(body, 14);
      if (format != 1) {
        throw Error(ErrorCode::kValidation,
                    "unsupported encoding=" + std::to_string(format) + " (PCM only)");
      }
      if (channels != 1) {
        throw Error(ErrorCode::kValidation,
                    "unsupported channel_count=" + std::to_string(channels));
      }
      if (rate != kSampleRate) {
        throw Error(ErrorCode::kValidation, "unsupported sample_rate=" + std::to_string(rate));
      }
      if (bits != 16) {
        throw Error(ErrorCode::kValidation,
                    "unsupported bits_per_sample=" + std::to_string(bits));
      }
      have_fmt = true;
    } else if (std::memcmp(b.data() + at, "data", 4) == 0) {
      data = body;
      have_data = true;
    }
    at += 8 + size + (size & 1);
  }
  if (!have_fmt) throw Error(ErrorCode::kParse, "malformed header: missing fmt chunk");
  if (!have_data) throw Error(ErrorCode::kParse, "malformed header: missing data chunk");
  if (data.size() % 2 != 0) {
    throw Error(ErrorCode::kParse, "malformed header: odd data length");
  }
  if (data.empty()) throw Error(ErrorCode::kValidation, "empty audio");
  AudioClip clip;
  clip.samples.resize(data.size() / 2);
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    clip.samples[i] = static_cast<std::int16_t>(read_u16(data, 2 * i));
  }
  return clip;
}

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_wav(bytes);
}

std::vector<std::uint8_t> encode_wav(const AudioClip& clip) {
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  for (char c : std::string_view("RIFF")) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, 36 + data_bytes);
  for (char c : std::string_view("WAVEfmt ")) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate * 2));
  put_u16(out, 2);
  put_u16(out, 16);
  for (char c : std::string_view("data")) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, data_bytes);
  for (auto s : clip.samples) put_u16(out, static_cast<std::uint16_t>(s));
  return out;
}

void write_wav(const AudioClip& clip, const std::filesystem::path& path) {
  const auto bytes = encode_wav(clip);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

Eigen::MatrixXd mel_filterbank(const FrameSpec& spec, int sample_rate) {
  const int bins = spec.fft_size / 2 + 1;
  const double top = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(spec.num_filters + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(top * static_cast<double>(i) / (spec.num_filters + 1));
  }
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(spec.num_filters, bins);
  for (int m = 0; m < spec.num_filters; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / spec.fft_size;
      if (f > lo && f <= mid) {
        fb(m, k) = (f - lo) / (mid - lo);
      } else if (f > mid && f < hi) {
        fb(m, k) = (hi - f) / (hi - mid);
      }
    }
  }
  return fb;
}

Eigen::MatrixXd mel_energies(const AudioClip& clip, const FrameSpec& spec) {
  spec.validate();
  const std::size_t n_frames = frame_count(clip.samples.size(), spec);
  if (n_frames == 0) {
    throw Error(ErrorCode::kValidation, "clip shorter than one frame");
  }
  const int frame = spec.frame_samples();
  const int hop = spec.hop_samples();
  const int bins = spec.fft_size / 2 + 1;

  std::vector<double> emph(clip.samples.size());
  for (std::size_t i = 0; i < emph.size(); ++i) {
    const double x = clip.samples[i] / 32768.0;
    const double prev = i == 0 ? 0.0 : clip.samples[i - 1] / 32768.0;
    emph[i] = x - spec.preemphasis * prev;
  }
  std::vector<double> window(frame);
  for (int n = 0; n < frame; ++n) {
    window[n] = 0.54 - 0.46 * std::cos(2.0 * kPi * n / (frame - 1));
  }

  const Eigen::MatrixXd fb = mel_filterbank(spec);
  Eigen::FFT<double> fft;
  std::vector<double> buf(spec.fft_size, 0.0);
  std::vector<std::complex<double>> spectrum;
  Eigen::VectorXd magnitude(bins);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n_frames), spec.num_filters);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const std::size_t start = t * hop;
    std::fill(buf.begin(), buf.end(), 0.0);
    for (int n = 0; n < frame; ++n) buf[n] = emph[start + n] * window[n];
    fft.fwd(spectrum, buf);
    for (int k = 0; k < bins; ++k) magnitude[k] = std::abs(spectrum[k]);
    out.row(static_cast<Eigen::Index>(t)) = (fb * magnitude).transpose();
  }
  return out;
}

FeatureSequence mfcc(const AudioClip& clip, const FrameSpec& spec) {
  const Eigen::MatrixXd energies = mel_energies(clip, spec);
  const int m = spec.num_filters;
  Eigen::MatrixXd dct(spec.num_cepstra, m);
  for (int n = 0; n < spec.num_cepstra; ++n) {
    const double scale = n == 0 ? std::sqrt(1.0 / m) : std::sqrt(2.0 / m);
    for (int j = 0; j < m; ++j) {
      dct(n, j) = scale * std::cos(kPi * n * (j + 0.5) / m);
    }
  }
  const Eigen::MatrixXd logmel = energies.array().max(spec.log_floor).log().matrix();
  FeatureMatrix<double> cepstra = logmel * dct.transpose();
  FeatureSequence out{std::move(cepstra), spec};
  if (spec.deltas) {
    const FeatureMatrix<double> d1 = deltas_of(out.vectors);
    const FeatureMatrix<double> d2 = deltas_of(d1);
    FeatureMatrix<double> full(out.frames(), 3 * spec.num_cepstra);
    full << out.vectors, d1, d2;
    out.vectors = std::move(full);
  }
  return out;
}

std::pair<double, double> phoneme_tones(Phoneme p, Voice voice) {
  const auto i = p.index();
  const double low = 300.0 + 150.0 * static_cast<double>(i % 5);
  const double high = 1500.0 + 150.0 * static_cast<double>((i / 5 + 3 * (i % 5)) % 11);
  const double ratio = voice == Voice::kFemale ? kFemaleFrequencyRatio : 1.0;
  return {low * ratio, high * ratio};
}

AudioClip synth_phoneme_signal(Phoneme p, int duration_ms, Voice voice, double detune) {
  if (duration_ms < 40) {
    throw Error(ErrorCode::kValidation, "phoneme duration must be >= 40 ms");
  }
  const auto [f1, f2] = phoneme_tones(p, voice);
  const double g1 = f1 * (1.0 + detune);
  const double g2 = f2 * (1.0 + detune);
  const std::size_t n = static_cast<std::size_t>(duration_ms) * kSampleRate / 1000;
  const std::size_t ramp = kSampleRate / 100;
  constexpr double kAmplitude = 0.35 * 32767.0;
  AudioClip clip;
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kSampleRate;
    double gain = 1.0;
    if (i < ramp) {
      gain = 0.5 - 0.5 * std::cos(kPi * static_cast<double>(i) / ramp);
    } else if (i >= n - ramp) {
      gain = 0.5 - 0.5 * std::cos(kPi * static_cast<double>(n - 1 - i) / ramp);
    }
    const double x = std::sin(2.0 * kPi * g1 * t) + std::sin(2.0 * kPi * g2 * t);
    clip.samples[i] = to_pcm(kAmplitude * gain * x);
  }
  return clip;
}

AudioClip concatenate(std::span<const AudioClip> clips) {
  AudioClip out;
  for (const auto& c : clips) {
    out.samples.insert(out.samples.end(), c.samples.begin(), c.samples.end());
  }
  return out;
}

AudioClip synth_word_utterance(const PronLexEntry& entry, Voice voice,
                               const ErrorModel& errors) {
  if (!errors.detune.empty() && errors.detune.size() != entry.phonemes.size()) {
    throw Error(ErrorCode::kValidation, "error model length does not match phonemes");
  }
  std::vector<AudioClip> parts;
  parts.reserve(entry.phonemes.size());
  for (std::size_t k = 0; k < entry.phonemes.size(); ++k) {
    const double d = errors.detune.empty() ? 0.0 : errors.detune[k];
    if (!(d >= 0.0 && d <= 0.5)) {
      throw Error(ErrorCode::kValidation,
                  "detune " + std::to_string(d) + " out of range [0, 0.5]");
    }
    parts.push_back(synth_phoneme_signal(entry.phonemes[k], errors.phoneme_ms, voice, d));
  }
  return concatenate(parts);
}

AudioClip synth_noise(int duration_ms, double amplitude, std::uint64_t seed) {
  Rng rng(seed);
  AudioClip clip;
  clip.samples.resize(static_cast<std::size_t>(duration_ms) * kSampleRate / 1000);
  for (auto& s : clip.samples) s = to_pcm(amplitude * 32767.0 * rng.uniform(-1.0, 1.0));
  return clip;
}

}  // namespace prontutor
