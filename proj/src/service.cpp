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

#include "prontutor/service.hpp"

#include <algorithm>
#include <cctype>
#include <iostream>
#include <regex>
#include <set>

#include <httplib.h>

namespace prontutor {
using nlohmann::json;

namespace {

ApiResponse json_response(int status, const json& body) {
  return {status, body.dump(), "application/json"};
}

ApiResponse error_response(int status, std::string_view message) {
  return json_response(status, {{"error", message}});
}

ApiResponse state_conflict(SessionState s) {
  return json_response(409, {{"error", "invalid state"}, {"state", to_string(s)}});
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  return s;
}

}  // namespace

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse:
    case ErrorCode::kValidation:
      return 400;
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kInvalidState:
    case ErrorCode::kConflict:
      return 409;
    case ErrorCode::kInsufficientData:
    case ErrorCode::kRankDeficient:
      return 422;
    case ErrorCode::kIo:
      return 500;
  }
  return 500;
}

json session_view(const Session& s) {
  const SessionData& d = s.data();
  json j = {{"id", d.id},
            {"participant", {{"id", d.participant.id},
                             {"group", to_string(d.participant.group)},
                             {"voice", to_string(d.participant.declared_voice)}}},
            {"mode", to_string(d.mode)},
            {"state", to_string(d.state)},
            {"seed", d.seed},
            {"elapsed_s", s.elapsed()},
            {"presentations", d.presentations},
            {"attempts", d.attempts.size()},
            {"syllabus_size", d.syllabus.size()}};
  j["time_limit_s"] = d.mode == Mode::kTest ? json(nullptr) : json(d.options.time_limit_s);
  j["current_word"] = d.current_word ? json(*d.current_word) : json(nullptr);
  j["end_reason"] = d.end_reason ? json(*d.end_reason) : json(nullptr);
  if (d.mode != Mode::kTest && !d.attempts.empty()) {
    const AttemptRecord& last = d.attempts.back();
    j["last_attempt"] = {{"attempt_index", last.attempt_index},
                         {"word", last.word},
                         {"clip_ref", last.clip_ref},
                         {"feedback", to_json(last.feedback)}};
  }
  return j;
}

json summary_view(const SessionSummary& s) {
  json j = {{"session_id", s.session_id},
            {"mode", to_string(s.mode)},
            {"words_presented", s.words_presented},
            {"attempts", s.attempts},
            {"elapsed_s", s.elapsed_s}};
  j["end_reason"] = s.end_reason ? json(*s.end_reason) : json(nullptr);
  if (s.mode == Mode::kTest) return j;
  json repeated = json::array();
  for (const auto& w : s.repeated) {
    repeated.push_back({{"word", w.word},
                        {"attempts", w.attempts},
                        {"first_score", w.first_score},
                        {"last_score", w.last_score}});
  }
  j["repeated"] = repeated;
  j["in_session_asgp"] = s.in_session_asgp ? json(*s.in_session_asgp) : json(nullptr);
  return j;
}

json attempt_view(const AttemptOutcome& o, SessionState state_after) {
  json j = {{"attempt_index", o.attempt_index},
            {"word", o.word},
            {"clip_ref", o.clip_ref},
            {"state", to_string(state_after)}};
  j["reference_clip_ref"] = o.reference_clip_ref ? json(*o.reference_clip_ref) : json(nullptr);
  if (o.feedback) j["feedback"] = to_json(*o.feedback);
  return j;
}

ApiResponse ApiHandler::handle(const ApiRequest& req) {
  const std::string& token = engine_.config().operator_token;
  if (!token.empty() && req.authorization != "Bearer " + token) {
    return error_response(401, "missing or wrong operator token");
  }
  try {
    return dispatch(req);
  } catch (const Error& e) {
    return error_response(http_status(e.code()), e.what());
  } catch (const json::exception& e) {
    return error_response(400, e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

ApiResponse ApiHandler::dispatch(const ApiRequest& req) {
  static const std::regex kSession(R"(/v1/sessions/([A-Za-z0-9_-]+))");
  static const std::regex kSessionAction(R"(/v1/sessions/([A-Za-z0-9_-]+)/(next|attempts|summary))");
  static const std::regex kClip(R"(/v1/clips/([A-Za-z0-9_-]+))");
  std::smatch m;
  const std::string& path = req.path;
  const bool get = req.method == "GET";
  const bool post = req.method == "POST";
  if (path == "/v1/sessions") {
    if (post) return create_session(req);
  } else if (path == "/v1/curriculum") {
    if (get) return curriculum();
  } else if (std::regex_match(path, m, kSessionAction)) {
    const std::string id = m[1];
    const std::string action = m[2];
    if (action == "next" && get) return next_item(id);
    if (action == "attempts" && post) return submit_attempt(id, req);
    if (action == "summary" && get) return summary(id);
  } else if (std::regex_match(path, m, kSession)) {
    if (get) return get_session(m[1]);
  } else if (std::regex_match(path, m, kClip)) {
    if (get) return clip(m[1]);
  } else {
    return error_response(404, "no route for " + path);
  }
  return error_response(405, "method " + req.method + " not allowed on " + path);
}

ApiResponse ApiHandler::create_session(const ApiRequest& req) {
  const json body = json::parse(req.body);
  if (!body.is_object()) return error_response(400, "expected a JSON object");
  for (const auto& [key, _] : body.items()) {
    static const std::set<std::string> kKeys = {"participant", "mode", "seed", "group",
                                                "voice", "syllabus", "phase"};
    if (!kKeys.count(key)) return error_response(400, "unknown field '" + key + "'");
  }
  SessionRequest r;
  r.participant = body.at("participant").get<std::string>();
  r.mode = parse_mode(upper(body.at("mode").get<std::string>()));
  r.seed = body.value("seed", std::uint64_t{0});
  if (body.contains("group")) r.group = parse_group(body["group"].get<std::string>());
  if (body.contains("voice")) r.voice = parse_voice(body["voice"].get<std::string>());
  if (body.contains("syllabus")) r.syllabus = body["syllabus"].get<std::vector<std::string>>();
  if (body.contains("phase")) r.phase = parse_phase(body["phase"].get<std::string>());
  const std::string id = engine_.create_session(r);
  return engine_.with_session(id, [&](Session& s) {
    return json_response(201, {{"id", id}, {"session", session_view(s)}});
  });
}

ApiResponse ApiHandler::get_session(const std::string& id) {
  return engine_.with_session(id, [&](Session& s) {
    s.tick();
    return json_response(200, session_view(s));
  });
}

ApiResponse ApiHandler::next_item(const std::string& id) {
  return engine_.with_session(id, [&](Session& s) {
    s.tick();
    if (s.state() != SessionState::kPresenting) return state_conflict(s.state());
    return json_response(200, to_json(s.next_item()));
  });
}

ApiResponse ApiHandler::submit_attempt(const std::string& id, const ApiRequest& req) {
  return engine_.with_session(id, [&](Session& s) {
    if (s.state() != SessionState::kAwaitingRecording) return state_conflict(s.state());
    const std::string_view type = std::string_view(req.content_type).substr(0, req.content_type.find(';'));
    if (type != "audio/wav" && type != "audio/x-wav" && type != "audio/wave") {
      return error_response(415, "attempts must be audio/wav");
    }
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(req.body.data());
    const AudioClip clip = parse_wav({bytes, req.body.size()});
    const std::string ref = engine_.store().put_clip(clip);
    const AttemptOutcome outcome = s.submit_attempt(clip, ref, engine_.scorer());
    s.complete_feedback();
    if (s.data().mode == Mode::kTest) return ApiResponse{204, "", "application/json"};
    return json_response(200, attempt_view(outcome, s.state()));
  });
}

ApiResponse ApiHandler::summary(const std::string& id) {
  return engine_.with_session(id, [&](Session& s) {
    s.tick();
    if (s.state() != SessionState::kEnded) return state_conflict(s.state());
    return json_response(200, summary_view(s.summarize()));
  });
}

ApiResponse ApiHandler::curriculum() {
  return {200, serialize_curriculum(engine_.curriculum()), "application/json"};
}

ApiResponse ApiHandler::clip(const std::string& hash) {
  auto bytes = engine_.store().clip_bytes(hash);
  if (!bytes) return error_response(404, "no clip '" + hash + "'");
  return {200, std::string(bytes->begin(), bytes->end()), "audio/wav"};
}

struct HttpServer::Impl {
  explicit Impl(Engine& engine) : handler(engine) {}
  ApiHandler handler;
  httplib::Server server;
};

HttpServer::HttpServer(Engine& engine) : impl_(std::make_unique<Impl>(engine)) {
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    ApiRequest api{req.method, req.path, req.body, req.get_header_value("Content-Type"),
                   req.get_header_value("Authorization")};
    const ApiResponse out = impl_->handler.handle(api);
    res.status = out.status;
    if (out.status != 204) res.set_content(out.body, out.content_type);
  };
  impl_->server.set_payload_max_length(32 * 1024 * 1024);
  impl_->server.Get(R"(/.*)", route);
  impl_->server.Post(R"(/.*)", route);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host)
                              : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound <= 0) {
    throw Error(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  }
  return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace prontutor
