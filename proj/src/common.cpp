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

#include "prontutor/common.hpp"

namespace prontutor {

std::string_view to_string(Voice v) {
  return v == Voice::kMale ? "male" : "female";
}

std::string_view to_string(Group g) {
  return g == Group::kControl ? "control" : "treatment";
}

std::string_view to_string(Phase p) { return p == Phase::kPre ? "pre" : "post"; }

Voice parse_voice(std::string_view s) {
  if (s == "male") return Voice::kMale;
  if (s == "female") return Voice::kFemale;
  throw Error(ErrorCode::kValidation, "unknown voice '" + std::string(s) + "'");
}

Group parse_group(std::string_view s) {
  if (s == "control") return Group::kControl;
  if (s == "treatment") return Group::kTreatment;
  throw Error(ErrorCode::kValidation, "unknown group '" + std::string(s) + "'");
}

Phase parse_phase(std::string_view s) {
  if (s == "pre") return Phase::kPre;
  if (s == "post") return Phase::kPost;
  throw Error(ErrorCode::kValidation, "unknown phase '" + std::string(s) + "'");
}

}  // namespace prontutor
