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

#include "prontutor/engine.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include "prontutor/random.hpp"

namespace prontutor {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
T config_value(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kValidation, std::string("config '") + key + "': " + e.what());
  }
}

}  // namespace

ScoringParams EngineConfig::scoring(double resolved_tau) const {
  ScoringParams p;
  p.tau = resolved_tau;
  p.word_accept_fraction = word_accept_fraction;
  p.margin_fraction = margin_fraction;
  p.good_band_sd = good_band_sd;
  p.fair_band_sd = fair_band_sd;
  p.sd_floor_fraction = sd_floor_fraction;
  return p;
}

EngineConfig parse_engine_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kParse, "config: expected an object");
  static const std::set<std::string> kKeys = {
      "host", "port", "store_path", "curriculum_path", "reference_clips", "tau",
      "word_accept_fraction", "likert", "interval_table", "time_limit_s", "words_per_group",
      "persist_gir_across_sessions", "operator_token"};
  for (const auto& [key, _] : j.items()) {
    if (!kKeys.count(key)) throw Error(ErrorCode::kValidation, "config: unknown key '" + key + "'");
  }
  EngineConfig c;
  if (j.contains("host")) c.host = config_value<std::string>(j, "host");
  if (j.contains("port")) c.port = config_value<int>(j, "port");
  if (j.contains("store_path")) c.store_path = config_value<std::string>(j, "store_path");
  if (j.contains("curriculum_path")) c.curriculum_path = config_value<std::string>(j, "curriculum_path");
  if (j.contains("reference_clips") && !j["reference_clips"].is_null()) {
    c.reference_clips = config_value<std::string>(j, "reference_clips");
  }
  if (j.contains("tau") && !j["tau"].is_null()) c.tau = config_value<double>(j, "tau");
  if (j.contains("word_accept_fraction")) {
    c.word_accept_fraction = config_value<double>(j, "word_accept_fraction");
  }
  if (j.contains("likert")) {
    const json& l = j["likert"];
    if (!l.is_object()) throw Error(ErrorCode::kValidation, "config 'likert': expected an object");
    for (const auto& [key, _] : l.items()) {
      if (key != "margin_fraction" && key != "good_band_sd" && key != "fair_band_sd" &&
          key != "sd_floor_fraction") {
        throw Error(ErrorCode::kValidation, "config: unknown key 'likert." + key + "'");
      }
    }
    if (l.contains("margin_fraction")) c.margin_fraction = config_value<double>(l, "margin_fraction");
    if (l.contains("good_band_sd")) c.good_band_sd = config_value<double>(l, "good_band_sd");
    if (l.contains("fair_band_sd")) c.fair_band_sd = config_value<double>(l, "fair_band_sd");
    if (l.contains("sd_floor_fraction")) {
      c.sd_floor_fraction = config_value<double>(l, "sd_floor_fraction");
    }
  }
  if (j.contains("interval_table")) c.interval_table = config_value<std::vector<int>>(j, "interval_table");
  if (j.contains("time_limit_s")) c.time_limit_s = config_value<double>(j, "time_limit_s");
  if (j.contains("words_per_group")) c.words_per_group = config_value<std::size_t>(j, "words_per_group");
  if (j.contains("persist_gir_across_sessions")) {
    c.persist_gir_across_sessions = config_value<bool>(j, "persist_gir_across_sessions");
  }
  if (j.contains("operator_token")) c.operator_token = config_value<std::string>(j, "operator_token");

  if (c.port < 0 || c.port > 65535) throw Error(ErrorCode::kValidation, "config: port out of range");
  if (c.tau && !(*c.tau > 0.0)) throw Error(ErrorCode::kValidation, "config: tau must be positive");
  if (!(c.word_accept_fraction > 0.0 && c.word_accept_fraction <= 1.0)) {
    throw Error(ErrorCode::kValidation, "config: word_accept_fraction must be in (0, 1]");
  }
  if (!(c.good_band_sd > 0.0 && c.fair_band_sd >= c.good_band_sd && c.margin_fraction >= 0.0 &&
        c.sd_floor_fraction >= 0.0)) {
    throw Error(ErrorCode::kValidation, "config: likert bands must satisfy 0 < good <= fair");
  }
  if (c.interval_table.empty() ||
      std::any_of(c.interval_table.begin(), c.interval_table.end(), [](int g) { return g < 1; })) {
    throw Error(ErrorCode::kValidation, "config: interval_table must be non-empty and positive");
  }
  if (!(c.time_limit_s > 0.0)) throw Error(ErrorCode::kValidation, "config: time_limit_s must be positive");
  if (c.persist_gir_across_sessions) {
    throw Error(ErrorCode::kValidation,
                "config: persist_gir_across_sessions=true is not supported; GIR state resets per session");
  }
  return c;
}

EngineConfig load_engine_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_engine_config(ss.str());
}

void apply_env_overrides(EngineConfig& config,
                         const std::function<const char*(const char*)>& getenv) {
  if (const char* port = getenv("PRONTUTOR_PORT"); port && *port) {
    char* end = nullptr;
    const long v = std::strtol(port, &end, 10);
    if (*end != '\0' || v < 0 || v > 65535) {
      throw Error(ErrorCode::kValidation, std::string("PRONTUTOR_PORT: bad port '") + port + "'");
    }
    config.port = static_cast<int>(v);
  }
  if (const char* store = getenv("PRONTUTOR_STORE"); store && *store) {
    config.store_path = store;
  }
}

json to_json(const EngineConfig& c) {
  json j = {{"host", c.host},
            {"port", c.port},
            {"store_path", c.store_path.string()},
            {"curriculum_path", c.curriculum_path.string()},
            {"word_accept_fraction", c.word_accept_fraction},
            {"likert",
             {{"margin_fraction", c.margin_fraction},
              {"good_band_sd", c.good_band_sd},
              {"fair_band_sd", c.fair_band_sd},
              {"sd_floor_fraction", c.sd_floor_fraction}}},
            {"interval_table", c.interval_table},
            {"time_limit_s", c.time_limit_s},
            {"words_per_group", c.words_per_group},
            {"persist_gir_across_sessions", c.persist_gir_across_sessions},
            {"operator_token", c.operator_token}};
  j["reference_clips"] = c.reference_clips ? json(c.reference_clips->string()) : json(nullptr);
  j["tau"] = c.tau ? json(*c.tau) : json(nullptr);
  return j;
}

ReferenceClipSet load_reference_clips(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kIo, "not a directory: " + dir.string());
  static const std::regex kName(R"(([A-Z]{1,2})_(male|female)_[0-9]+\.wav)");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  ReferenceClipSet set;
  for (const auto& path : files) {
    std::smatch m;
    const std::string name = path.filename().string();
    if (!std::regex_match(name, m, kName)) continue;
    set.add(Phoneme(m[1].str()), parse_voice(m[2].str()), read_wav(path));
  }
  if (set.empty()) throw Error(ErrorCode::kNotFound, "no reference clips in " + dir.string());
  return set;
}

ReferenceBank::ReferenceBank(const Curriculum& curriculum, const ReferenceClipSet& clips,
                             const FrameSpec& spec)
    : spec_(spec) {
  for (const auto& entry : curriculum.entries()) {
    models_.emplace(entry.word, build_reference_model(entry, clips, spec_));
  }
  default_tau_ = prontutor::default_tau(clips, spec_, Voice::kMale);
}

const WordReferenceModel& ReferenceBank::model(std::string_view word) const {
  auto it = models_.find(word);
  if (it == models_.end()) {
    throw Error(ErrorCode::kNotFound, "no reference model for '" + std::string(word) + "'");
  }
  return it->second;
}

std::string voice_transform_ref(Voice v) { return "voice-" + std::string(to_string(v)); }

SpeakerTransform Scorer::transform_for(const Participant& participant) const {
  if (store_ != nullptr) {
    if (participant.transform_ref) {
      if (auto t = store_->transform(*participant.transform_ref)) return *t;
    }
    if (auto t = store_->transform(voice_transform_ref(participant.declared_voice))) return *t;
  }
  return SpeakerTransform::identity(bank_.frame_spec().dimension(), participant.declared_voice);
}

LikertFeedback Scorer::score(const AudioClip& clip, const PronLexEntry& entry,
                             const Participant& participant) const {
  return score_utterance(clip, bank_.model(entry.word), transform_for(participant), params_);
}

void TicketLock::lock() {
  std::unique_lock l(mutex_);
  const std::uint64_t ticket = next_++;
  cv_.wait(l, [&] { return serving_ == ticket; });
}

void TicketLock::unlock() {
  {
    std::lock_guard l(mutex_);
    ++serving_;
  }
  cv_.notify_all();
}

Engine::Engine(EngineConfig config, const Clock& clock)
    : config_(std::move(config)), clock_(clock) {
  curriculum_ = std::make_unique<Curriculum>(load_curriculum(config_.curriculum_path));
  const ReferenceClipSet clips = config_.reference_clips
                                     ? load_reference_clips(*config_.reference_clips)
                                     : ReferenceClipSet::synthetic();
  bank_ = std::make_unique<ReferenceBank>(*curriculum_, clips);
  store_ = std::make_unique<Store>(config_.store_path);
  tau_ = config_.tau.value_or(bank_->default_tau());
  scorer_ = std::make_unique<Scorer>(*bank_, store_.get(), config_.scoring(tau_));
  // Whole-word reference recordings for playback, one per voice.
  for (const auto& entry : curriculum_->entries()) {
    for (Voice v : {Voice::kMale, Voice::kFemale}) {
      reference_clips_[{entry.word, v}] = store_->put_clip(synth_word_utterance(entry, v, {}));
    }
  }
}

std::optional<std::string> Engine::reference_clip(std::string_view word, Voice voice) const {
  auto it = reference_clips_.find({std::string(word), voice});
  if (it == reference_clips_.end()) return std::nullopt;
  return it->second;
}

SessionContext Engine::context() {
  SessionContext ctx;
  ctx.curriculum = curriculum_.get();
  ctx.clock = &clock_;
  Store* store = store_.get();
  ctx.sink = [store](const SessionEvent& e) { store->append_event(e); };
  ctx.reference_clip = [this](std::string_view word, Voice v) { return reference_clip(word, v); };
  return ctx;
}

std::vector<std::string> Engine::default_syllabus(Mode mode, std::uint64_t seed) const {
  const std::size_t per_group = mode == Mode::kTest ? kTestWordCount / 3 : config_.words_per_group;
  std::vector<std::string> words;
  for (const auto& e : sample_syllabus(*curriculum_, per_group, seed)) words.push_back(e.word);
  if (mode == Mode::kArcade) {
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    rng.shuffle(std::span<std::string>(words));
    words.resize(std::min(words.size(), kChestsPerLevel));
  }
  return words;
}

std::string Engine::mint_id() {
  static thread_local std::mt19937_64 gen{std::random_device{}()};
  static constexpr char kHex[] = "0123456789abcdef";
  std::string id = "s";
  for (int i = 0; i < 16; ++i) id.push_back(kHex[gen() & 0xf]);
  return id;
}

std::string Engine::create_session(const SessionRequest& req) {
  if (!is_safe_name(req.participant)) {
    throw Error(ErrorCode::kValidation, "invalid participant id '" + req.participant + "'");
  }
  Participant p;
  if (auto known = store_->participant(req.participant)) {
    p = *known;
    if (req.group && *req.group != p.group) {
      throw Error(ErrorCode::kConflict, "participant '" + p.id + "' is in group " +
                                            std::string(to_string(p.group)));
    }
  } else {
    p.id = req.participant;
    p.group = req.group.value_or(Group::kControl);
    p.declared_voice = select_voice_model(req.voice);
    store_->put_participant(p);
  }
  std::vector<std::string> syllabus =
      req.syllabus ? *req.syllabus : default_syllabus(req.mode, req.seed);
  SessionOptions options;
  options.time_limit_s = config_.time_limit_s;
  options.interval_table = config_.interval_table;
  options.test_phase = req.phase;

  std::string id;
  do {
    id = mint_id();
  } while (store_->has_session(id));
  Session s = Session::start(id, p, req.mode, std::move(syllabus), req.seed, context(), options);
  Slot& slot = slot_for(id);
  std::lock_guard lock(slot.lock);
  slot.session.emplace(std::move(s));
  return id;
}

Engine::Slot& Engine::slot_for(std::string_view id) {
  std::lock_guard lock(slots_mutex_);
  auto it = slots_.find(id);
  if (it != slots_.end()) return *it->second;
  if (!store_->has_session(id)) {
    // create_session registers the slot before the first write lands.
    throw Error(ErrorCode::kNotFound, "no session '" + std::string(id) + "'");
  }
  return *slots_.emplace(std::string(id), std::make_unique<Slot>()).first->second;
}

Session Engine::load_session(std::string_view id) {
  return Session::replay(store_->read_events(id), context());
}

}  // namespace prontutor
