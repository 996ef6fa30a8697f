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

#ifndef PRONTUTOR_SCHEDULER_HPP_
#define PRONTUTOR_SCHEDULER_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prontutor/aligner.hpp"

namespace prontutor {

/// Gaps, in presentations, for levels 1, 2, ... Levels past the end reuse the
/// last entry.
inline const std::vector<int> kDefaultIntervalTable = {2, 4, 8, 16, 32};

/// A word was answered satisfactorily: accepted and no phoneme rated 1.
bool is_satisfactory(const LikertFeedback& fb);

struct ItemState {
  std::string word;
  int level = 0;
  /// Presentation index at which the item becomes due.
  std::int64_t due_at = 0;
  std::optional<int> last_rating;
  int presentations = 0;
  std::optional<std::int64_t> last_presented;

  friend bool operator==(const ItemState&, const ItemState&) = default;
};

/// Graduated interval recall over a fixed syllabus, counted in presentations.
///
/// next() picks, among due items other than the one just shown, the smallest
/// due_at, then the fewest presentations, then syllabus order. The item just
/// shown is repeated only when no other item is due. When nothing is due at
/// all the same ordering is applied to every item.
class GirQueue {
 public:
  explicit GirQueue(std::vector<std::string> syllabus,
                    std::vector<int> interval_table = kDefaultIntervalTable);

  /// Returns the word for presentation index counter() and advances the counter.
  const std::string& next();

  /// Pass: level + 1, due gap(level) after the item's last presentation.
  /// Fail: level 0, due one presentation after it.
  void report(std::string_view word, bool satisfactory, int worst_rating);
  void report(std::string_view word, const LikertFeedback& fb) {
    report(word, is_satisfactory(fb), fb.worst_rating());
  }

  int gap_for_level(int level) const;

  std::int64_t counter() const { return counter_; }
  std::span<const ItemState> items() const { return items_; }
  const ItemState& item(std::string_view word) const;
  std::span<const int> interval_table() const { return interval_table_; }

  friend bool operator==(const GirQueue&, const GirQueue&) = default;

 private:
  std::size_t index_of(std::string_view word) const;

  std::vector<ItemState> items_;
  std::vector<int> interval_table_;
  std::int64_t counter_ = 0;
  std::optional<std::size_t> last_;
};

inline constexpr std::size_t kChestsPerLevel = 5;

/// The static chest order of an arcade level.
class LevelScript {
 public:
  /// Exactly kChestsPerLevel words.
  explicit LevelScript(std::vector<std::string> chest_words);

  /// Word in chest `position`, 0 <= position < kChestsPerLevel.
  const std::string& word_at(std::size_t position) const;

  std::span<const std::string> chest_words() const { return chest_words_; }
  /// The level restarts from the first chest while session time remains.
  bool replay_on_time_remaining() const { return true; }

  friend bool operator==(const LevelScript&, const LevelScript&) = default;

 private:
  std::vector<std::string> chest_words_;
};

}  // namespace prontutor

#endif  // PRONTUTOR_SCHEDULER_HPP_
