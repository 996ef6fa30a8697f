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

#ifndef PRONTUTOR_TESTS_SUPPORT_HPP_
#define PRONTUTOR_TESTS_SUPPORT_HPP_

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "prontutor/curriculum.hpp"
#include "prontutor/session.hpp"

namespace prontutor::testing {

inline std::filesystem::path data_dir() { return PRONTUTOR_DATA_DIR; }

inline const Curriculum& shipped_curriculum() {
  static const Curriculum c = load_curriculum(data_dir() / "curriculum.json");
  return c;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("prontutor-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) +
             "-" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// The first n words of each unit group, written out as a curriculum file.
inline std::filesystem::path write_small_curriculum(const std::filesystem::path& dir,
                                                    std::size_t per_group) {
  std::vector<PronLexEntry> picked;
  for (UnitGroup g : {UnitGroup::kA, UnitGroup::kB, UnitGroup::kC}) {
    std::size_t n = 0;
    for (const auto& e : shipped_curriculum().entries()) {
      if (e.unit_group == g && n < per_group) {
        picked.push_back(e);
        ++n;
      }
    }
  }
  const auto path = dir / "curriculum.json";
  save_curriculum(Curriculum(picked, "small"), path);
  return path;
}

/// Scores from a fixed table, independent of the audio.
class TableScorer final : public AttemptScorer {
 public:
  explicit TableScorer(double word_score = 250.0, bool accepted = true, int rating = 3)
      : word_score_(word_score), accepted_(accepted), rating_(rating) {}

  LikertFeedback score(const AudioClip&, const PronLexEntry& entry,
                       const Participant&) const override {
    LikertFeedback fb;
    for (const auto& p : entry.phonemes) {
      fb.scores.push_back({p, 1.0, word_score_ / static_cast<double>(entry.phonemes.size())});
      fb.ratings.push_back(rating_);
    }
    fb.word_score = word_score_;
    fb.accepted = accepted_;
    return fb;
  }

  double word_score_;
  bool accepted_;
  int rating_;
};

}  // namespace prontutor::testing

#endif  // PRONTUTOR_TESTS_SUPPORT_HPP_
