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

#ifndef PRONTUTOR_SESSION_HPP_
#define PRONTUTOR_SESSION_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "prontutor/aligner.hpp"
#include "prontutor/common.hpp"
#include "prontutor/curriculum.hpp"
#include "prontutor/scheduler.hpp"

namespace prontutor {

enum class Mode { kArcade, kActivity, kTest };
enum class SessionState { kPresenting, kAwaitingRecording, kFeedback, kEnded };

std::string_view to_string(Mode m);
std::string_view to_string(SessionState s);
Mode parse_mode(std::string_view s);
SessionState parse_session_state(std::string_view s);

/// Only these state pairs are legal: presenting -> awaiting_recording ->
/// feedback -> presenting, and presenting|feedback -> ended.
bool is_valid_transition(SessionState from, SessionState to);

inline constexpr std::size_t kTestWordCount = 30;
inline constexpr double kPlayTimeLimitSeconds = 600.0;
inline constexpr int kReferencePlayCount = 3;

struct Participant {
  std::string id;
  Group group = Group::kControl;
  Voice declared_voice = Voice::kMale;
  std::optional<std::string> transform_ref;

  friend bool operator==(const Participant&, const Participant&) = default;
};

nlohmann::json to_json(const Participant& p);
Participant participant_from_json(const nlohmann::json& j);

/// Seconds on an arbitrary monotone scale.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() const = 0;
};

class SystemClock final : public Clock {
 public:
  double now() const override;
};

/// Virtual time for tests and simulations.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(double start = 0.0) : now_(start) {}
  double now() const override { return now_; }
  void set(double t) { now_ = t; }
  void advance(double dt) { now_ += dt; }

 private:
  double now_;
};

enum class EventKind { kSessionStart, kItemPresented, kAttempt, kFeedback, kSessionEnd };

std::string_view to_string(EventKind k);
EventKind parse_event_kind(std::string_view s);

struct SessionEvent {
  std::uint64_t sequence = 0;
  std::string session_id;
  EventKind kind = EventKind::kSessionStart;
  nlohmann::json payload;
  double wall_time = 0.0;

  friend bool operator==(const SessionEvent&, const SessionEvent&) = default;
};

nlohmann::json to_json(const SessionEvent& e);
SessionEvent event_from_json(const nlohmann::json& j);

nlohmann::json to_json(const LikertFeedback& fb);
LikertFeedback feedback_from_json(const nlohmann::json& j);

struct AttemptRecord {
  std::string session_id;
  std::string word;
  /// 1, 2, ... within the session.
  std::uint64_t attempt_index = 0;
  std::string clip_ref;
  LikertFeedback feedback;
  double wall_time = 0.0;

  friend bool operator==(const AttemptRecord&, const AttemptRecord&) = default;
};

struct SessionOptions {
  double time_limit_s = kPlayTimeLimitSeconds;
  std::vector<int> interval_table = kDefaultIntervalTable;
  /// ACTIVITY syllabi are shuffled with the session seed before queueing.
  bool shuffle_activity = true;
  /// Which test a TEST session records.
  Phase test_phase = Phase::kPre;

  friend bool operator==(const SessionOptions&, const SessionOptions&) = default;
};

/// Everything a session's behaviour depends on, folded from its event log.
struct SessionData {
  std::string id;
  Participant participant;
  Mode mode = Mode::kActivity;
  std::uint64_t seed = 0;
  SessionOptions options;
  /// As given by the caller; the queue holds the shuffled order.
  std::vector<std::string> syllabus;
  double started_at = 0.0;
  double last_event_at = 0.0;
  SessionState state = SessionState::kPresenting;
  std::uint64_t sequence = 0;

  std::optional<GirQueue> queue;
  std::optional<LevelScript> script;
  /// Completed presentations; the TEST cursor and the chest position derive from it.
  std::size_t completed = 0;
  std::size_t presentations = 0;
  std::optional<std::string> current_word;
  std::vector<AttemptRecord> attempts;
  std::optional<std::string> end_reason;

  friend bool operator==(const SessionData&, const SessionData&) = default;
};

struct Presentation {
  std::string word;
  std::string spelled_out;
  std::vector<std::string> phonemes;
  /// Content hashes of reference recordings; empty in TEST.
  std::vector<std::string> reference_audio;
  int play_count = kReferencePlayCount;
  bool suppress_feedback = false;
  /// 1-based presentation number.
  std::size_t index = 0;
  /// ARCADE only.
  std::optional<std::size_t> chest;
};

nlohmann::json to_json(const Presentation& p);

struct AttemptOutcome {
  std::uint64_t attempt_index = 0;
  std::string word;
  std::string clip_ref;
  std::optional<std::string> reference_clip_ref;
  /// Absent in TEST mode.
  std::optional<LikertFeedback> feedback;
};

class AttemptScorer {
 public:
  virtual ~AttemptScorer() = default;
  virtual LikertFeedback score(const AudioClip& clip, const PronLexEntry& entry,
                               const Participant& participant) const = 0;
};

struct WordAttemptSummary {
  std::string word;
  std::size_t attempts = 0;
  /// Word acoustic score (sum over phonemes) of the first and last attempt.
  double first_score = 0.0;
  double last_score = 0.0;
};

struct SessionSummary {
  std::string session_id;
  Mode mode = Mode::kActivity;
  std::size_t words_presented = 0;
  std::size_t attempts = 0;
  /// Words with at least two attempts.
  std::vector<WordAttemptSummary> repeated;
  /// Mean over repeated words of (last - first) * 100 / first. Absent with no
  /// repeated words.
  std::optional<double> in_session_asgp;
  /// TEST sessions: total of word scores and accepted-word count.
  std::optional<TestScores> test_scores;
  std::optional<std::string> end_reason;
  double elapsed_s = 0.0;
};

struct SessionContext {
  const Curriculum* curriculum = nullptr;
  const Clock* clock = nullptr;
  /// Called with each event before it is applied; a throw aborts the command
  /// without changing the session.
  std::function<void(const SessionEvent&)> sink;
  /// Content hash of the reference recording of a word, if one is stored.
  std::function<std::optional<std::string>(std::string_view word, Voice voice)> reference_clip;
};

/// The state machine. State is only ever changed by applying an event, so a
/// session rebuilt from its log compares equal to the live one.
class Session {
 public:
  /// Errors: empty syllabus, words missing from the curriculum, duplicate
  /// words, TEST without exactly 30 words, ARCADE without exactly 5.
  static Session start(std::string id, Participant participant, Mode mode,
                       std::vector<std::string> syllabus, std::uint64_t seed,
                       SessionContext ctx, SessionOptions options = {});

  /// Rebuilds a session from its log. Throws Error(kParse) on a malformed or
  /// inconsistent log and Error(kConflict) on a sequence gap.
  static Session replay(std::span<const SessionEvent> events, SessionContext ctx);

  Presentation next_item();
  AttemptOutcome submit_attempt(const AudioClip& clip, std::string clip_ref,
                                const AttemptScorer& scorer);
  /// Leaves the feedback screen. Ends the session when the play time is used
  /// up or the test is finished.
  void complete_feedback();
  /// Ends a play session that is over time and sitting in presenting.
  /// Elsewhere it only updates elapsed; the check repeats at the next boundary.
  void tick(double now);
  void tick();
  /// Operator stop; only from presenting.
  void end(std::string reason);

  SessionSummary summarize() const;

  const SessionData& data() const { return data_; }
  std::span<const SessionEvent> events() const { return events_; }
  SessionState state() const { return data_.state; }
  const std::string& id() const { return data_.id; }
  double elapsed() const;
  bool over_time() const;

 private:
  explicit Session(SessionContext ctx) : ctx_(std::move(ctx)) {}

  void require(SessionState s, std::string_view op) const;
  void emit(EventKind kind, nlohmann::json payload);
  void apply(const SessionEvent& e);
  double now() const;
  std::string upcoming_word() const;

  SessionContext ctx_;
  SessionData data_;
  std::vector<SessionEvent> events_;
  double observed_at_ = 0.0;
};

}  // namespace prontutor

#endif  // PRONTUTOR_SESSION_HPP_
