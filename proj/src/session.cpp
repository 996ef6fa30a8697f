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

#include "prontutor/session.hpp"

#include <chrono>
#include <map>
#include <set>

#include "prontutor/random.hpp"

namespace prontutor {
namespace {

using nlohmann::json;

constexpr std::string_view kModeNames[] = {"ARCADE", "ACTIVITY", "TEST"};
constexpr std::string_view kStateNames[] = {"presenting", "awaiting_recording", "feedback",
                                            "ended"};
constexpr std::string_view kKindNames[] = {"session_start", "item_presented", "attempt",
                                           "feedback", "session_end"};

template <typename Enum, std::size_t N>
Enum parse_named(std::string_view s, const std::string_view (&names)[N], const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<Enum>(i);
  }
  throw Error(ErrorCode::kParse, std::string("unknown ") + what + " '" + std::string(s) + "'");
}

// Reads a required member, turning nlohmann's exceptions into ours.
template <typename T>
T field(const json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) {
    throw Error(ErrorCode::kParse, std::string("missing field '") + name + "'");
  }
  try {
    return j.at(name).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad field '") + name + "': " + e.what());
  }
}

}  // namespace

std::string_view to_string(Mode m) { return kModeNames[static_cast<std::size_t>(m)]; }
std::string_view to_string(SessionState s) { return kStateNames[static_cast<std::size_t>(s)]; }
std::string_view to_string(EventKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

Mode parse_mode(std::string_view s) { return parse_named<Mode>(s, kModeNames, "mode"); }
SessionState parse_session_state(std::string_view s) {
  return parse_named<SessionState>(s, kStateNames, "session state");
}
EventKind parse_event_kind(std::string_view s) {
  return parse_named<EventKind>(s, kKindNames, "event kind");
}

bool is_valid_transition(SessionState from, SessionState to) {
  using S = SessionState;
  return (from == S::kPresenting && to == S::kAwaitingRecording) ||
         (from == S::kAwaitingRecording && to == S::kFeedback) ||
         (from == S::kFeedback && to == S::kPresenting) ||
         (from == S::kPresenting && to == S::kEnded) ||
         (from == S::kFeedback && to == S::kEnded);
}

json to_json(const Participant& p) {
  json j = {{"id", p.id},
            {"group", to_string(p.group)},
            {"voice", to_string(p.declared_voice)}};
  if (p.transform_ref) j["transform_ref"] = *p.transform_ref;
  return j;
}

Participant participant_from_json(const json& j) {
  Participant p;
  p.id = field<std::string>(j, "id");
  if (p.id.empty()) throw Error(ErrorCode::kValidation, "participant id is empty");
  try {
    p.group = parse_group(field<std::string>(j, "group"));
    p.declared_voice = parse_voice(field<std::string>(j, "voice"));
  } catch (const Error& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
  if (j.contains("transform_ref") && !j["transform_ref"].is_null()) {
    p.transform_ref = field<std::string>(j, "transform_ref");
  }
  return p;
}

double SystemClock::now() const {
  using namespace std::chrono;
  return duration<double>(system_clock::now().time_since_epoch()).count();
}

json to_json(const SessionEvent& e) {
  return {{"seq", e.sequence},
          {"session", e.session_id},
          {"kind", to_string(e.kind)},
          {"time", e.wall_time},
          {"payload", e.payload}};
}

SessionEvent event_from_json(const json& j) {
  SessionEvent e;
  e.sequence = field<std::uint64_t>(j, "seq");
  e.session_id = field<std::string>(j, "session");
  e.kind = parse_event_kind(field<std::string>(j, "kind"));
  e.wall_time = field<double>(j, "time");
  e.payload = field<json>(j, "payload");
  return e;
}

json to_json(const LikertFeedback& fb) {
  json phonemes = json::array();
  json costs = json::array();
  json scores = json::array();
  for (const auto& s : fb.scores) {
    phonemes.push_back(s.phoneme.symbol());
    costs.push_back(s.cost);
    scores.push_back(s.acoustic_score);
  }
  return {{"phonemes", phonemes}, {"ratings", fb.ratings},   {"costs", costs},
          {"scores", scores},     {"word_score", fb.word_score}, {"accepted", fb.accepted}};
}

LikertFeedback feedback_from_json(const json& j) {
  LikertFeedback fb;
  const auto phonemes = field<std::vector<std::string>>(j, "phonemes");
  const auto costs = field<std::vector<double>>(j, "costs");
  const auto scores = field<std::vector<double>>(j, "scores");
  fb.ratings = field<std::vector<int>>(j, "ratings");
  if (costs.size() != phonemes.size() || scores.size() != phonemes.size() ||
      fb.ratings.size() != phonemes.size()) {
    throw Error(ErrorCode::kParse, "feedback arrays differ in length");
  }
  for (std::size_t i = 0; i < phonemes.size(); ++i) {
    fb.scores.push_back({Phoneme(phonemes[i]), costs[i], scores[i]});
  }
  fb.word_score = field<double>(j, "word_score");
  fb.accepted = field<bool>(j, "accepted");
  return fb;
}

json to_json(const Presentation& p) {
  json j = {{"word", p.word},
            {"spelled_out", p.spelled_out},
            {"phonemes", p.phonemes},
            {"reference_audio", p.reference_audio},
            {"play_count", p.play_count},
            {"suppress_feedback", p.suppress_feedback},
            {"index", p.index}};
  if (p.chest) j["chest"] = *p.chest;
  return j;
}

Session Session::start(std::string id, Participant participant, Mode mode,
                       std::vector<std::string> syllabus, std::uint64_t seed, SessionContext ctx,
                       SessionOptions options) {
  if (ctx.curriculum == nullptr || ctx.clock == nullptr) {
    throw Error(ErrorCode::kValidation, "session context needs a curriculum and a clock");
  }
  if (id.empty()) throw Error(ErrorCode::kValidation, "empty session id");
  if (syllabus.empty()) throw Error(ErrorCode::kValidation, "empty syllabus");
  if (mode == Mode::kTest && syllabus.size() != kTestWordCount) {
    throw Error(ErrorCode::kValidation, "TEST needs exactly " + std::to_string(kTestWordCount) +
                                            " words, got " + std::to_string(syllabus.size()));
  }
  if (mode == Mode::kArcade && syllabus.size() != kChestsPerLevel) {
    throw Error(ErrorCode::kValidation, "ARCADE needs exactly " + std::to_string(kChestsPerLevel) +
                                            " words, got " + std::to_string(syllabus.size()));
  }
  std::set<std::string> seen;
  for (auto& w : syllabus) {
    const PronLexEntry& e = ctx.curriculum->at(w);  // throws kNotFound
    w = e.word;
    if (!seen.insert(w).second) {
      throw Error(ErrorCode::kValidation, "duplicate syllabus word '" + w + "'");
    }
  }
  if (!(options.time_limit_s > 0.0)) {
    throw Error(ErrorCode::kValidation, "time limit must be positive");
  }
  // Validates the table before anything is logged.
  GirQueue probe(syllabus, options.interval_table);

  Session s(std::move(ctx));
  s.data_.id = std::move(id);
  s.emit(EventKind::kSessionStart,
         {{"participant", to_json(participant)},
          {"mode", to_string(mode)},
          {"syllabus", syllabus},
          {"seed", seed},
          {"time_limit_s", options.time_limit_s},
          {"interval_table", options.interval_table},
          {"shuffle_activity", options.shuffle_activity},
          {"test_phase", to_string(options.test_phase)}});
  return s;
}

Session Session::replay(std::span<const SessionEvent> events, SessionContext ctx) {
  if (events.empty()) throw Error(ErrorCode::kParse, "empty session log");
  Session s(std::move(ctx));
  s.data_.id = events.front().session_id;
  for (const auto& e : events) {
    s.apply(e);
    s.events_.push_back(e);
  }
  s.observed_at_ = s.data_.last_event_at;
  return s;
}

double Session::now() const {
  if (ctx_.clock == nullptr) throw Error(ErrorCode::kInvalidState, "session has no clock");
  return ctx_.clock->now();
}

double Session::elapsed() const { return std::max(observed_at_, data_.last_event_at) - data_.started_at; }

bool Session::over_time() const {
  return data_.mode != Mode::kTest && elapsed() >= data_.options.time_limit_s;
}

void Session::require(SessionState s, std::string_view op) const {
  if (data_.state == SessionState::kEnded) {
    throw Error(ErrorCode::kInvalidState,
                std::string(op) + ": invalid state: session ended");
  }
  if (data_.state != s) {
    throw Error(ErrorCode::kInvalidState,
                std::string(op) + ": invalid state: " + std::string(to_string(data_.state)));
  }
}

void Session::emit(EventKind kind, json payload) {
  SessionEvent e;
  e.sequence = data_.sequence + 1;
  e.session_id = data_.id;
  e.kind = kind;
  e.payload = std::move(payload);
  e.wall_time = now();
  // Check the event applies cleanly before handing it to the sink, so a
  // rejected event is never persisted.
  SessionData before = data_;
  apply(e);
  try {
    if (ctx_.sink) ctx_.sink(e);
  } catch (...) {
    data_ = std::move(before);
    throw;
  }
  events_.push_back(std::move(e));
  observed_at_ = std::max(observed_at_, data_.last_event_at);
}

std::string Session::upcoming_word() const {
  switch (data_.mode) {
    case Mode::kActivity: {
      GirQueue copy = *data_.queue;
      return copy.next();
    }
    case Mode::kArcade:
      return data_.script->word_at(data_.completed % kChestsPerLevel);
    case Mode::kTest:
      return data_.syllabus.at(data_.completed);
  }
  throw Error(ErrorCode::kInvalidState, "unknown mode");
}

Presentation Session::next_item() {
  require(SessionState::kPresenting, "next_item");
  const std::string word = upcoming_word();
  const PronLexEntry& entry = ctx_.curriculum->at(word);
  Presentation p;
  p.word = word;
  p.spelled_out = entry.spelled_out;
  for (const auto& ph : entry.phonemes) p.phonemes.emplace_back(ph.symbol());
  p.index = data_.presentations + 1;
  if (data_.mode == Mode::kTest) {
    p.play_count = 0;
    p.suppress_feedback = true;
  } else {
    p.play_count = kReferencePlayCount;
    if (ctx_.reference_clip) {
      if (auto ref = ctx_.reference_clip(word, data_.participant.declared_voice)) {
        p.reference_audio.push_back(*ref);
      }
    }
  }
  if (data_.mode == Mode::kArcade) p.chest = data_.completed % kChestsPerLevel;
  json payload = {{"word", word},
                  {"index", p.index},
                  {"play_count", p.play_count},
                  {"suppress_feedback", p.suppress_feedback}};
  if (p.chest) payload["chest"] = *p.chest;
  emit(EventKind::kItemPresented, std::move(payload));
  return p;
}

AttemptOutcome Session::submit_attempt(const AudioClip& clip, std::string clip_ref,
                                       const AttemptScorer& scorer) {
  require(SessionState::kAwaitingRecording, "submit_attempt");
  const std::string word = *data_.current_word;
  const PronLexEntry& entry = ctx_.curriculum->at(word);
  LikertFeedback fb = scorer.score(clip, entry, data_.participant);
  AttemptOutcome out;
  out.attempt_index = data_.attempts.size() + 1;
  out.word = word;
  out.clip_ref = clip_ref;
  if (data_.mode != Mode::kTest && ctx_.reference_clip) {
    out.reference_clip_ref = ctx_.reference_clip(word, data_.participant.declared_voice);
  }
  emit(EventKind::kAttempt, {{"word", word},
                             {"attempt_index", out.attempt_index},
                             {"clip_ref", std::move(clip_ref)},
                             {"feedback", to_json(fb)}});
  // The log keeps TEST scores; the caller never sees them.
  if (data_.mode != Mode::kTest) out.feedback = std::move(fb);
  return out;
}

void Session::complete_feedback() {
  require(SessionState::kFeedback, "complete_feedback");
  const AttemptRecord& last = data_.attempts.back();
  observed_at_ = std::max(observed_at_, now());
  emit(EventKind::kFeedback, {{"word", last.word},
                              {"satisfactory", is_satisfactory(last.feedback)},
                              {"worst_rating", last.feedback.worst_rating()}});
  if (data_.mode == Mode::kTest && data_.completed == data_.syllabus.size()) {
    emit(EventKind::kSessionEnd, {{"reason", "test_complete"}});
  } else if (over_time()) {
    emit(EventKind::kSessionEnd, {{"reason", "time_limit"}});
  }
}

void Session::tick(double now) {
  observed_at_ = std::max(observed_at_, now);
  if (data_.state == SessionState::kPresenting && over_time()) {
    emit(EventKind::kSessionEnd, {{"reason", "time_limit"}});
  }
}

void Session::tick() { tick(now()); }

void Session::end(std::string reason) {
  require(SessionState::kPresenting, "end");
  emit(EventKind::kSessionEnd, {{"reason", std::move(reason)}});
}

void Session::apply(const SessionEvent& e) {
  if (e.sequence != data_.sequence + 1) {
    throw Error(ErrorCode::kConflict, "sequence gap: expected " +
                                          std::to_string(data_.sequence + 1) + ", got " +
                                          std::to_string(e.sequence));
  }
  if (e.session_id != data_.id) {
    throw Error(ErrorCode::kParse, "event for session '" + e.session_id + "' in log of '" +
                                       data_.id + "'");
  }
  auto expect_state = [&](SessionState s) {
    if (data_.state != s) {
      throw Error(ErrorCode::kParse, std::string(to_string(e.kind)) + " event in state " +
                                         std::string(to_string(data_.state)));
    }
  };
  const json& p = e.payload;
  SessionData next = data_;
  if (e.kind == EventKind::kSessionStart) {
    if (e.sequence != 1) throw Error(ErrorCode::kParse, "session_start after the first record");
    next.participant = participant_from_json(field<json>(p, "participant"));
    next.mode = parse_mode(field<std::string>(p, "mode"));
    next.syllabus = field<std::vector<std::string>>(p, "syllabus");
    next.seed = field<std::uint64_t>(p, "seed");
    next.options.time_limit_s = field<double>(p, "time_limit_s");
    next.options.interval_table = field<std::vector<int>>(p, "interval_table");
    next.options.shuffle_activity = field<bool>(p, "shuffle_activity");
    next.options.test_phase = parse_phase(field<std::string>(p, "test_phase"));
    next.started_at = e.wall_time;
    next.state = SessionState::kPresenting;
    if (next.syllabus.empty()) throw Error(ErrorCode::kParse, "empty syllabus in log");
    switch (next.mode) {
      case Mode::kActivity: {
        std::vector<std::string> order = next.syllabus;
        if (next.options.shuffle_activity) {
          Rng rng(next.seed);
          rng.shuffle(std::span<std::string>(order));
        }
        next.queue.emplace(std::move(order), next.options.interval_table);
        break;
      }
      case Mode::kArcade:
        next.script.emplace(next.syllabus);
        break;
      case Mode::kTest:
        if (next.syllabus.size() != kTestWordCount) {
          throw Error(ErrorCode::kParse, "TEST log without 30 words");
        }
        break;
    }
  } else {
    if (data_.sequence == 0) throw Error(ErrorCode::kParse, "log does not open with session_start");
    switch (e.kind) {
      case EventKind::kItemPresented: {
        expect_state(SessionState::kPresenting);
        const auto word = field<std::string>(p, "word");
        std::string expected;
        if (next.mode == Mode::kActivity) {
          expected = next.queue->next();
        } else if (next.mode == Mode::kArcade) {
          expected = next.script->word_at(next.completed % kChestsPerLevel);
        } else {
          expected = next.syllabus.at(next.completed);
        }
        if (word != expected) {
          throw Error(ErrorCode::kParse, "presented '" + word + "' where the scheduler gives '" +
                                             expected + "'");
        }
        next.presentations += 1;
        next.current_word = word;
        next.state = SessionState::kAwaitingRecording;
        break;
      }
      case EventKind::kAttempt: {
        expect_state(SessionState::kAwaitingRecording);
        AttemptRecord r;
        r.session_id = e.session_id;
        r.word = field<std::string>(p, "word");
        r.attempt_index = field<std::uint64_t>(p, "attempt_index");
        r.clip_ref = field<std::string>(p, "clip_ref");
        r.feedback = feedback_from_json(field<json>(p, "feedback"));
        r.wall_time = e.wall_time;
        if (r.word != *next.current_word) {
          throw Error(ErrorCode::kParse, "attempt for '" + r.word + "' while '" +
                                             *next.current_word + "' is presented");
        }
        if (r.attempt_index != next.attempts.size() + 1) {
          throw Error(ErrorCode::kParse, "attempt index " + std::to_string(r.attempt_index) +
                                             " out of order");
        }
        next.attempts.push_back(std::move(r));
        next.state = SessionState::kFeedback;
        break;
      }
      case EventKind::kFeedback: {
        expect_state(SessionState::kFeedback);
        const AttemptRecord& last = next.attempts.back();
        if (next.queue) {
          next.queue->report(last.word, is_satisfactory(last.feedback),
                             last.feedback.worst_rating());
        }
        next.completed += 1;
        next.current_word.reset();
        next.state = SessionState::kPresenting;
        break;
      }
      case EventKind::kSessionEnd:
        if (data_.state != SessionState::kPresenting && data_.state != SessionState::kFeedback) {
          throw Error(ErrorCode::kParse, "session_end in state " +
                                             std::string(to_string(data_.state)));
        }
        next.end_reason = field<std::string>(p, "reason");
        next.state = SessionState::kEnded;
        break;
      case EventKind::kSessionStart:
        break;
    }
  }
  if (e.wall_time < data_.last_event_at) {
    throw Error(ErrorCode::kParse, "event time runs backwards");
  }
  next.sequence = e.sequence;
  next.last_event_at = e.wall_time;
  data_ = std::move(next);
}

SessionSummary Session::summarize() const {
  if (data_.state != SessionState::kEnded) {
    throw Error(ErrorCode::kInvalidState, "summarize: session not ended");
  }
  SessionSummary s;
  s.session_id = data_.id;
  s.mode = data_.mode;
  s.words_presented = data_.presentations;
  s.attempts = data_.attempts.size();
  s.end_reason = data_.end_reason;
  s.elapsed_s = data_.last_event_at - data_.started_at;

  std::map<std::string, WordAttemptSummary> by_word;
  std::vector<std::string> order;
  for (const auto& a : data_.attempts) {
    auto [it, fresh] = by_word.try_emplace(a.word);
    auto& w = it->second;
    if (fresh) {
      order.push_back(a.word);
      w.word = a.word;
      w.first_score = a.feedback.word_score;
    }
    w.attempts += 1;
    w.last_score = a.feedback.word_score;
  }
  double gain_sum = 0.0;
  for (const auto& word : order) {
    const auto& w = by_word.at(word);
    if (w.attempts < 2) continue;
    s.repeated.push_back(w);
    gain_sum += (w.last_score - w.first_score) * 100.0 / w.first_score;
  }
  if (!s.repeated.empty()) {
    s.in_session_asgp = gain_sum / static_cast<double>(s.repeated.size());
  }
  if (data_.mode == Mode::kTest) {
    TestScores t;
    t.participant = data_.participant.id;
    t.phase = data_.options.test_phase;
    for (const auto& a : data_.attempts) {
      t.total += a.feedback.word_score;
      t.words_accepted += a.feedback.accepted ? 1 : 0;
    }
    s.test_scores = t;
  }
  return s;
}

}  // namespace prontutor
