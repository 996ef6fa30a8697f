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

#include "prontutor/scheduler.hpp"

#include <algorithm>
#include <set>
#include <tuple>

namespace prontutor {

bool is_satisfactory(const LikertFeedback& fb) {
  return fb.accepted && fb.worst_rating() >= 2;
}

GirQueue::GirQueue(std::vector<std::string> syllabus, std::vector<int> interval_table)
    : interval_table_(std::move(interval_table)) {
  if (syllabus.empty()) throw Error(ErrorCode::kValidation, "empty syllabus");
  if (interval_table_.empty() ||
      std::any_of(interval_table_.begin(), interval_table_.end(), [](int g) { return g < 1; })) {
    throw Error(ErrorCode::kValidation, "interval table must be non-empty and positive");
  }
  std::set<std::string> seen;
  for (auto& w : syllabus) {
    if (!seen.insert(w).second) {
      throw Error(ErrorCode::kValidation, "duplicate syllabus word '" + w + "'");
    }
    ItemState item;
    item.word = std::move(w);
    items_.push_back(std::move(item));
  }
}

int GirQueue::gap_for_level(int level) const {
  if (level < 1) return 1;
  const auto i = std::min<std::size_t>(static_cast<std::size_t>(level), interval_table_.size());
  return interval_table_[i - 1];
}

const std::string& GirQueue::next() {
  auto key = [&](std::size_t i) {
    return std::make_tuple(items_[i].due_at, items_[i].presentations, i);
  };
  std::optional<std::size_t> pick;
  auto consider = [&](std::size_t i) {
    if (!pick || key(i) < key(*pick)) pick = i;
  };
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (items_[i].due_at <= counter_ && i != last_) consider(i);
  }
  if (!pick && last_ && items_[*last_].due_at <= counter_) pick = last_;
  if (!pick) {
    for (std::size_t i = 0; i < items_.size(); ++i) consider(i);
  }
  auto& item = items_[*pick];
  item.presentations += 1;
  item.last_presented = counter_;
  last_ = pick;
  ++counter_;
  return item.word;
}

void GirQueue::report(std::string_view word, bool satisfactory, int worst_rating) {
  auto& item = items_[index_of(word)];
  const std::int64_t base = item.last_presented.value_or(counter_);
  item.last_rating = worst_rating;
  if (satisfactory) {
    item.level += 1;
    item.due_at = base + gap_for_level(item.level);
  } else {
    item.level = 0;
    item.due_at = base + 1;
  }
}

const ItemState& GirQueue::item(std::string_view word) const { return items_[index_of(word)]; }

std::size_t GirQueue::index_of(std::string_view word) const {
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (items_[i].word == word) return i;
  }
  throw Error(ErrorCode::kNotFound, "word '" + std::string(word) + "' not in queue");
}

LevelScript::LevelScript(std::vector<std::string> chest_words)
    : chest_words_(std::move(chest_words)) {
  if (chest_words_.size() != kChestsPerLevel) {
    throw Error(ErrorCode::kValidation, "a level needs exactly " +
                                            std::to_string(kChestsPerLevel) + " chest words, got " +
                                            std::to_string(chest_words_.size()));
  }
}

const std::string& LevelScript::word_at(std::size_t position) const {
  if (position >= chest_words_.size()) {
    throw Error(ErrorCode::kValidation, "chest position " + std::to_string(position) +
                                            " out of range");
  }
  return chest_words_[position];
}

}  // namespace prontutor
