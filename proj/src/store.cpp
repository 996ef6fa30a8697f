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

#include "prontutor/store.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <openssl/evp.h>
#include <unistd.h>

namespace prontutor {
namespace fs = std::filesystem;
namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Write-then-rename so readers never see a half-written file.
void write_file_atomic(const fs::path& path, std::string_view data) {
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(ErrorCode::kIo, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot rename into " + path.string() + ": " + ec.message());
}

void require_safe(std::string_view s, const char* what) {
  if (!is_safe_name(s)) {
    throw Error(ErrorCode::kValidation, std::string("invalid ") + what + " '" + std::string(s) + "'");
  }
}

// Complete lines only; a trailing fragment without a newline is a torn write.
std::vector<std::string_view> complete_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t at = 0;
  while (true) {
    const auto nl = text.find('\n', at);
    if (nl == std::string_view::npos) break;
    if (nl > at) lines.push_back(text.substr(at, nl - at));
    at = nl + 1;
  }
  return lines;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIo, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

std::string clip_hash(const AudioClip& clip) { return sha256_hex(encode_wav(clip)); }

bool is_safe_name(std::string_view s) {
  if (s.empty() || s.size() > 128) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '-';
  });
}

Store::Store(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  for (const char* sub : {"sessions", "clips", "participants", "transforms"}) {
    fs::create_directories(root_ / sub, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create " + (root_ / sub).string() + ": " + ec.message());
  }
}

fs::path Store::session_path(std::string_view id) const {
  require_safe(id, "session id");
  return root_ / "sessions" / (std::string(id) + ".log");
}

Store::SessionSlot& Store::slot(const std::string& id) {
  std::lock_guard lock(slots_mutex_);
  auto& s = slots_[id];
  if (!s) s = std::make_unique<SessionSlot>();
  return *s;
}

void Store::append_event(const SessionEvent& e) {
  const fs::path path = session_path(e.session_id);
  SessionSlot& s = slot(e.session_id);
  std::lock_guard lock(s.mutex);
  if (!s.last_sequence) {
    // First touch in this process: drop any torn tail so the next append
    // starts on a fresh line.
    std::uint64_t last = 0;
    if (fs::exists(path)) {
      const std::string text = read_file(path);
      const auto nl = text.rfind('\n');
      const std::size_t keep = nl == std::string::npos ? 0 : nl + 1;
      if (keep != text.size()) fs::resize_file(path, keep);
      const auto lines = complete_lines(text);
      if (!lines.empty()) {
        last = event_from_json(nlohmann::json::parse(lines.back())).sequence;
      }
    }
    s.last_sequence = last;
  }
  if (e.sequence != *s.last_sequence + 1) {
    throw Error(ErrorCode::kConflict, "sequence gap: expected " +
                                          std::to_string(*s.last_sequence + 1) + ", got " +
                                          std::to_string(e.sequence));
  }
  const std::string line = to_json(e).dump() + "\n";
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  const ssize_t n = ::write(fd, line.data(), line.size());
  const bool synced = ::fsync(fd) == 0;
  ::close(fd);
  if (n != static_cast<ssize_t>(line.size()) || !synced) {
    // Unknown tail state; re-read it on the next append.
    s.last_sequence.reset();
    throw Error(ErrorCode::kIo, "append to " + path.string() + " failed");
  }
  s.last_sequence = e.sequence;
}

std::vector<SessionEvent> Store::read_events(std::string_view session_id) const {
  const fs::path path = session_path(session_id);
  if (!fs::exists(path)) {
    throw Error(ErrorCode::kNotFound, "no session '" + std::string(session_id) + "'");
  }
  const std::string text = read_file(path);
  std::vector<SessionEvent> out;
  std::size_t line_no = 0;
  for (auto line : complete_lines(text)) {
    ++line_no;
    try {
      out.push_back(event_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::kParse, path.string() + " line " + std::to_string(line_no) + ": " +
                                         ex.what());
    }
  }
  return out;
}

bool Store::has_session(std::string_view session_id) const {
  return is_safe_name(session_id) && fs::exists(session_path(session_id));
}

std::vector<std::string> Store::session_ids() const {
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(root_ / "sessions")) {
    if (entry.path().extension() == ".log") ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::string Store::put_clip(const AudioClip& clip) {
  const auto bytes = encode_wav(clip);
  const std::string hash = sha256_hex(bytes);
  const fs::path path = root_ / "clips" / (hash + ".wav");
  std::lock_guard lock(clip_mutex_);
  if (!fs::exists(path)) {
    write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  }
  return hash;
}

std::string Store::put_clip_bytes(std::span<const std::uint8_t> wav) {
  return put_clip(parse_wav(wav));
}

std::optional<std::vector<std::uint8_t>> Store::clip_bytes(std::string_view hash) const {
  if (!is_safe_name(hash)) return std::nullopt;
  const fs::path path = root_ / "clips" / (std::string(hash) + ".wav");
  if (!fs::exists(path)) return std::nullopt;
  const std::string text = read_file(path);
  return std::vector<std::uint8_t>(text.begin(), text.end());
}

AudioClip Store::clip(std::string_view hash) const {
  auto bytes = clip_bytes(hash);
  if (!bytes) throw Error(ErrorCode::kNotFound, "no clip '" + std::string(hash) + "'");
  return parse_wav(*bytes);
}

void Store::put_participant(const Participant& p) {
  require_safe(p.id, "participant id");
  std::lock_guard lock(registry_mutex_);
  const fs::path path = root_ / "participants" / (p.id + ".json");
  if (fs::exists(path)) {
    const Participant old = participant_from_json(nlohmann::json::parse(read_file(path)));
    if (old.group != p.group) {
      throw Error(ErrorCode::kConflict, "participant '" + p.id + "' is already registered in group " +
                                            std::string(to_string(old.group)));
    }
  }
  write_file_atomic(path, to_json(p).dump(1) + "\n");
}

std::optional<Participant> Store::participant(std::string_view id) const {
  if (!is_safe_name(id)) return std::nullopt;
  std::lock_guard lock(registry_mutex_);
  const fs::path path = root_ / "participants" / (std::string(id) + ".json");
  if (!fs::exists(path)) return std::nullopt;
  try {
    return participant_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

std::vector<Participant> Store::participants() const {
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(root_ / "participants")) {
    if (entry.path().extension() == ".json") ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  std::vector<Participant> out;
  for (const auto& id : ids) {
    if (auto p = participant(id)) out.push_back(std::move(*p));
  }
  return out;
}

void Store::put_transform(std::string_view ref, const SpeakerTransform& t) {
  require_safe(ref, "transform ref");
  std::lock_guard lock(registry_mutex_);
  write_file_atomic(root_ / "transforms" / (std::string(ref) + ".json"), serialize_transform(t));
}

std::optional<SpeakerTransform> Store::transform(std::string_view ref) const {
  if (!is_safe_name(ref)) return std::nullopt;
  std::lock_guard lock(registry_mutex_);
  const fs::path path = root_ / "transforms" / (std::string(ref) + ".json");
  if (!fs::exists(path)) return std::nullopt;
  return parse_transform(read_file(path));
}

std::vector<ScoreRow> Store::collect_scores(const ScoreFilter& filter) const {
  struct Best {
    ScoreRow row;
    double started_at;
  };
  std::map<std::pair<std::string, Phase>, Best> latest;
  for (const auto& id : session_ids()) {
    const auto events = read_events(id);
    if (events.empty()) continue;
    const Session s = Session::replay(events, {});
    const SessionData& d = s.data();
    if (d.mode != Mode::kTest || d.state != SessionState::kEnded) continue;
    const SessionSummary summary = s.summarize();
    ScoreRow row{*summary.test_scores, d.participant.group};
    if (filter.participant && row.scores.participant != *filter.participant) continue;
    if (filter.phase && row.scores.phase != *filter.phase) continue;
    if (filter.group && row.group != *filter.group) continue;
    const auto key = std::make_pair(row.scores.participant, row.scores.phase);
    auto it = latest.find(key);
    if (it == latest.end() || d.started_at >= it->second.started_at) {
      latest[key] = Best{std::move(row), d.started_at};
    }
  }
  if (latest.empty()) throw Error(ErrorCode::kNotFound, "no matching test records");
  std::vector<ScoreRow> out;
  for (auto& [key, best] : latest) out.push_back(std::move(best.row));
  return out;
}

std::string Store::export_scores(const ScoreFilter& filter) const {
  std::string out = "participant,group,phase,total,words_accepted\n";
  for (const auto& r : collect_scores(filter)) {
    out += r.scores.participant + "," + std::string(to_string(r.group)) + "," +
           std::string(to_string(r.scores.phase)) + "," + fmt_double(r.scores.total) + "," +
           std::to_string(r.scores.words_accepted) + "\n";
  }
  return out;
}

std::vector<GainRecord> Store::collect_gains(const ScoreFilter& filter) const {
  ScoreFilter both = filter;
  both.phase.reset();
  const auto rows = collect_scores(both);
  std::vector<TestScores> scores;
  std::vector<ParticipantGroup> groups;
  for (const auto& r : rows) {
    scores.push_back(r.scores);
    if (groups.empty() || groups.back().participant != r.scores.participant) {
      groups.push_back({r.scores.participant, r.group});
    }
  }
  auto gains = gains_from_scores(scores, groups);
  if (gains.empty()) throw Error(ErrorCode::kNotFound, "no participant has both test phases");
  return gains;
}

std::string Store::export_gains(const ScoreFilter& filter) const {
  return serialize_gain_table(collect_gains(filter));
}

}  // namespace prontutor
