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

#ifndef PRONTUTOR_STORE_HPP_
#define PRONTUTOR_STORE_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prontutor/adaptation.hpp"
#include "prontutor/analytics.hpp"
#include "prontutor/dsp.hpp"
#include "prontutor/session.hpp"

namespace prontutor {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);

/// Hash of the canonical WAV encoding of a clip.
std::string clip_hash(const AudioClip& clip);

struct ScoreFilter {
  std::optional<std::string> participant;
  std::optional<Phase> phase;
  std::optional<Group> group;
};

struct ScoreRow {
  TestScores scores;
  Group group = Group::kControl;
};

/// On-disk layout under the root:
///   sessions/<id>.log          one JSON event per line
///   clips/<sha256>.wav         canonical 16-bit mono WAV
///   participants/<id>.json
///   transforms/<ref>.json
///
/// Appends to one session log are serialised; different sessions and all
/// readers proceed independently.
class Store {
 public:
  explicit Store(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  /// Requires sequence = last + 1 ("sequence gap" otherwise, kConflict).
  /// The line is flushed and synced before returning.
  void append_event(const SessionEvent& e);
  /// A torn final line (crash mid-append) is dropped.
  std::vector<SessionEvent> read_events(std::string_view session_id) const;
  bool has_session(std::string_view session_id) const;
  std::vector<std::string> session_ids() const;

  /// Stores once per distinct content; returns the hash.
  std::string put_clip(const AudioClip& clip);
  /// Validates and canonicalises an uploaded WAV.
  std::string put_clip_bytes(std::span<const std::uint8_t> wav);
  std::optional<std::vector<std::uint8_t>> clip_bytes(std::string_view hash) const;
  AudioClip clip(std::string_view hash) const;

  /// New ids are created; existing ids may change voice or transform but
  /// never group (kConflict).
  void put_participant(const Participant& p);
  std::optional<Participant> participant(std::string_view id) const;
  std::vector<Participant> participants() const;

  void put_transform(std::string_view ref, const SpeakerTransform& t);
  std::optional<SpeakerTransform> transform(std::string_view ref) const;

  /// One row per (participant, phase) from ended TEST sessions; the latest
  /// session wins when a phase was taken twice. Throws kNotFound when empty.
  std::vector<ScoreRow> collect_scores(const ScoreFilter& filter = {}) const;
  /// Header: participant,group,phase,total,words_accepted
  std::string export_scores(const ScoreFilter& filter = {}) const;
  /// Participants with both phases, in the analytics gain-table format.
  std::vector<GainRecord> collect_gains(const ScoreFilter& filter = {}) const;
  std::string export_gains(const ScoreFilter& filter = {}) const;

 private:
  std::filesystem::path session_path(std::string_view id) const;
  struct SessionSlot {
    std::mutex mutex;
    std::optional<std::uint64_t> last_sequence;
  };
  SessionSlot& slot(const std::string& id);

  std::filesystem::path root_;
  mutable std::mutex registry_mutex_;
  std::mutex slots_mutex_;
  std::map<std::string, std::unique_ptr<SessionSlot>> slots_;
  std::mutex clip_mutex_;
};

/// Ids and hashes that are safe as file names: [A-Za-z0-9_-], 1..128 chars.
bool is_safe_name(std::string_view s);

}  // namespace prontutor

#endif  // PRONTUTOR_STORE_HPP_
