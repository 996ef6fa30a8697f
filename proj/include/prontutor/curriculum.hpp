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

#ifndef PRONTUTOR_CURRICULUM_HPP_
#define PRONTUTOR_CURRICULUM_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace prontutor {

/// The closed ARPAbet inventory (39 symbols, stress markers stripped).
/// Version 1; appending symbols changes synthetic tone assignments.
std::span<const std::string_view> phoneme_inventory();

inline constexpr int kPhonemeInventoryVersion = 1;

/// A phoneme symbol known to be in the inventory.
class Phoneme {
 public:
  /// Throws Error(kValidation) naming the symbol when it is not in the inventory.
  explicit Phoneme(std::string_view symbol);

  std::string_view symbol() const { return phoneme_inventory()[index_]; }
  /// Position in phoneme_inventory().
  std::size_t index() const { return index_; }

  friend bool operator==(Phoneme a, Phoneme b) { return a.index_ == b.index_; }
  friend auto operator<=>(Phoneme a, Phoneme b) { return a.index_ <=> b.index_; }

 private:
  std::size_t index_;
};

enum class UnitGroup { kA, kB, kC };

std::string_view to_string(UnitGroup g);

struct PronLexEntry {
  std::string word;
  std::string spelled_out;
  std::vector<Phoneme> phonemes;
  UnitGroup unit_group = UnitGroup::kA;

  friend bool operator==(const PronLexEntry&, const PronLexEntry&) = default;
};

/// Immutable word list. Lookups are case-insensitive on the word.
class Curriculum {
 public:
  Curriculum(std::vector<PronLexEntry> entries, std::string source_name);

  std::span<const PronLexEntry> entries() const { return entries_; }
  const std::string& source_name() const { return source_name_; }

  /// nullptr when the word is absent.
  const PronLexEntry* find(std::string_view word) const;
  /// Throws Error(kNotFound).
  const PronLexEntry& at(std::string_view word) const;

 private:
  std::vector<PronLexEntry> entries_;
  std::string source_name_;
};

/// Parses the JSON curriculum document: an array of
/// {word, spelled_out, phonemes, unit_group} records, unknown fields rejected.
Curriculum parse_curriculum(std::string_view text, std::string source_name);
Curriculum load_curriculum(const std::filesystem::path& path);

/// Inverse of parse_curriculum; byte-identical to the shipped file format.
std::string serialize_curriculum(const Curriculum& c);
void save_curriculum(const Curriculum& c, const std::filesystem::path& path);

/// per_group words from each of A, B, C (in that order), drawn uniformly
/// without replacement. Deterministic in seed.
std::vector<PronLexEntry> sample_syllabus(const Curriculum& c,
                                          std::size_t per_group,
                                          std::uint64_t seed);

}  // namespace prontutor

#endif  // PRONTUTOR_CURRICULUM_HPP_
