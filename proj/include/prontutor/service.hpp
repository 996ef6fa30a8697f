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

#ifndef PRONTUTOR_SERVICE_HPP_
#define PRONTUTOR_SERVICE_HPP_

#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "prontutor/engine.hpp"
#include "prontutor/session.hpp"

namespace prontutor {

struct ApiRequest {
  std::string method;
  std::string path;
  std::string body;
  std::string content_type;
  std::string authorization;
};

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

int http_status(ErrorCode code);

/// Client-safe projection of a session. TEST sessions never carry ratings,
/// scores or acceptance, whatever state they are in.
nlohmann::json session_view(const Session& s);
nlohmann::json summary_view(const SessionSummary& s);
nlohmann::json attempt_view(const AttemptOutcome& o, SessionState state_after);

/// The HTTP API without sockets:
///   POST /v1/sessions                   {participant, mode, seed, group?, voice?, syllabus?, phase?}
///   GET  /v1/sessions/{id}
///   GET  /v1/sessions/{id}/next
///   POST /v1/sessions/{id}/attempts     audio/wav body
///   GET  /v1/sessions/{id}/summary
///   GET  /v1/curriculum
///   GET  /v1/clips/{hash}
/// An accepted attempt runs through feedback back to presenting (or ended)
/// before the response, so the client's next call is /next.
class ApiHandler {
 public:
  explicit ApiHandler(Engine& engine) : engine_(engine) {}
  ApiResponse handle(const ApiRequest& req);

 private:
  ApiResponse dispatch(const ApiRequest& req);
  ApiResponse create_session(const ApiRequest& req);
  ApiResponse get_session(const std::string& id);
  ApiResponse next_item(const std::string& id);
  ApiResponse submit_attempt(const std::string& id, const ApiRequest& req);
  ApiResponse summary(const std::string& id);
  ApiResponse curriculum();
  ApiResponse clip(const std::string& hash);

  Engine& engine_;
};

/// cpp-httplib front end for ApiHandler.
class HttpServer {
 public:
  explicit HttpServer(Engine& engine);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Port 0 picks a free port. Throws Error(kIo) when the bind fails.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace prontutor

#endif  // PRONTUTOR_SERVICE_HPP_
