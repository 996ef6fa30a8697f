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

#ifndef PRONTUTOR_COMMON_HPP_
#define PRONTUTOR_COMMON_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace prontutor {

/// Broad failure category; the HTTP layer maps these onto status codes.
enum class ErrorCode {
  kParse,
  kValidation,
  kNotFound,
  kInvalidState,
  kInsufficientData,
  kRankDeficient,
  kConflict,
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

enum class Voice { kMale, kFemale };
enum class Group { kControl, kTreatment };
enum class Phase { kPre, kPost };

std::string_view to_string(Voice v);
std::string_view to_string(Group g);
std::string_view to_string(Phase p);

Voice parse_voice(std::string_view s);
Group parse_group(std::string_view s);
Phase parse_phase(std::string_view s);

/// Test totals for one participant and phase (sum of word scores over the
/// 30-word test, plus the number of words the scorer accepted).
struct TestScores {
  std::string participant;
  Phase phase = Phase::kPre;
  double total = 0.0;
  int words_accepted = 0;

  friend bool operator==(const TestScores&, const TestScores&) = default;
};

}  // namespace prontutor

#endif  // PRONTUTOR_COMMON_HPP_
