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

#ifndef PRONTUTOR_ENGINE_HPP_
#define PRONTUTOR_ENGINE_HPP_

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "prontutor/adaptation.hpp"
#include "prontutor/aligner.hpp"
#include "prontutor/curriculum.hpp"
#include "prontutor/session.hpp"
#include "prontutor/store.hpp"

namespace prontutor {

struct EngineConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path store_path = "prontutor-store";
  std::filesystem::path curriculum_path = PRONTUTOR_DATA_DIR "/curriculum.json";
  /// Directory of <PHONEME>_<voice>_<n>.wav; synthetic references when unset.
  std::optional<std::filesystem::path> reference_clips;
  /// Median cross-phoneme template cost when unset.
  std::optional<double> tau;
  double word_accept_fraction = 0.6;
  double margin_fraction = 0.05;
  double good_band_sd = 2.0;
  double fair_band_sd = 4.0;
  double sd_floor_fraction = 0.1;
  std::vector<int> interval_table = kDefaultIntervalTable;
  double time_limit_s = kPlayTimeLimitSeconds;
  /// Words sampled per unit group for a default syllabus.
  std::size_t words_per_group = 10;
  /// Carry GIR state over between a learner's sessions. Only false is
  /// implemented; the key exists so the choice is explicit.
  bool persist_gir_across_sessions = false;
  /// Empty disables the check.
  std::string operator_token;

  ScoringParams scoring(double resolved_tau) const;
};

/// Strict: unknown keys and wrong types are errors.
EngineConfig parse_engine_config(std::string_view text);
EngineConfig load_engine_config(const std::filesystem::path& path);
/// PRONTUTOR_PORT and PRONTUTOR_STORE, looked up through `getenv`.
void apply_env_overrides(EngineConfig& config,
                         const std::function<const char*(const char*)>& getenv);
nlohmann::json to_json(const EngineConfig& c);

/// Reads <PHONEME>_<voice>_<n>.wav files, e.g. AE_female_1.wav.
ReferenceClipSet load_reference_clips(const std::filesystem::path& dir);

/// Reference models for every curriculum word, built once.
class ReferenceBank {
 public:
  ReferenceBank(const Curriculum& curriculum, const ReferenceClipSet& clips,
                const FrameSpec& spec = {});

  const WordReferenceModel& model(std::string_view word) const;
  const FrameSpec& frame_spec() const { return spec_; }
  /// Median cross-phoneme DTW cost of the male templates.
  double default_tau() const { return default_tau_; }
  std::size_t size() const { return models_.size(); }

 private:
  FrameSpec spec_;
  std::map<std::string, WordReferenceModel, std::less<>> models_;
  double default_tau_ = 0.0;
};

/// Scores attempts with the participant's transform: their own when
/// registered, else the shared per-voice one, else identity.
class Scorer final : public AttemptScorer {
 public:
  Scorer(const ReferenceBank& bank, const Store* store, ScoringParams params)
      : bank_(bank), store_(store), params_(params) {}

  LikertFeedback score(const AudioClip& clip, const PronLexEntry& entry,
                       const Participant& participant) const override;
  SpeakerTransform transform_for(const Participant& participant) const;
  const ScoringParams& params() const { return params_; }

 private:
  const ReferenceBank& bank_;
  const Store* store_;
  ScoringParams params_;
};

/// Store key of the transform shared by all speakers of a voice.
std::string voice_transform_ref(Voice v);

/// FIFO mutex: waiters are admitted in arrival order.
class TicketLock {
 public:
  void lock();
  void unlock();

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::uint64_t next_ = 0;
  std::uint64_t serving_ = 0;
};

struct SessionRequest {
  std::string participant;
  Mode mode = Mode::kActivity;
  std::uint64_t seed = 0;
  /// Needed only to register an unknown participant.
  std::optional<Group> group;
  std::optional<Voice> voice;
  /// Sampled from the curriculum when absent.
  std::optional<std::vector<std::string>> syllabus;
  Phase phase = Phase::kPre;
};

/// Owns curriculum, references, store and live sessions. Commands on one
/// session run one at a time in arrival order; sessions are independent.
class Engine {
 public:
  Engine(EngineConfig config, const Clock& clock);

  const EngineConfig& config() const { return config_; }
  const Curriculum& curriculum() const { return *curriculum_; }
  const ReferenceBank& bank() const { return *bank_; }
  Store& store() { return *store_; }
  const Scorer& scorer() const { return *scorer_; }
  double tau() const { return tau_; }

  /// Content hash of the stored reference recording of a word.
  std::optional<std::string> reference_clip(std::string_view word, Voice voice) const;

  std::string create_session(const SessionRequest& req);

  /// Runs fn(Session&) under the session's FIFO lock, loading the session
  /// from its log when it is not in memory. kNotFound for unknown ids.
  template <typename Fn>
  auto with_session(std::string_view id, Fn&& fn) {
    Slot& slot = slot_for(id);
    std::lock_guard lock(slot.lock);
    if (!slot.session) slot.session.emplace(load_session(id));
    return fn(*slot.session);
  }

  std::vector<std::string> default_syllabus(Mode mode, std::uint64_t seed) const;

 private:
  struct Slot {
    TicketLock lock;
    std::optional<Session> session;
  };
  Slot& slot_for(std::string_view id);
  Session load_session(std::string_view id);
  SessionContext context();
  std::string mint_id();

  EngineConfig config_;
  const Clock& clock_;
  std::unique_ptr<Curriculum> curriculum_;
  std::unique_ptr<ReferenceBank> bank_;
  std::unique_ptr<Store> store_;
  double tau_ = 0.0;
  std::unique_ptr<Scorer> scorer_;
  std::map<std::pair<std::string, Voice>, std::string> reference_clips_;
  std::mutex slots_mutex_;
  std::map<std::string, std::unique_ptr<Slot>, std::less<>> slots_;
};

}  // namespace prontutor

#endif  // PRONTUTOR_ENGINE_HPP_
