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

#include "prontutor/curriculum.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "prontutor/common.hpp"
#include "prontutor/random.hpp"

namespace prontutor {
namespace {

constexpr std::array<std::string_view, 39> kInventory = {
    "AA", "AE", "AH", "AO", "AW", "AY", "B",  "CH", "D",  "DH",
    "EH", "ER", "EY", "F",  "G",  "HH", "IH", "IY", "JH", "K",
    "L",  "M",  "N",  "NG", "OW", "OY", "P",  "R",  "S",  "SH",
    "T",  "TH", "UH", "UW", "V",  "W",  "Y",  "Z",  "ZH"};

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

UnitGroup parse_unit_group(std::string_view s) {
  if (s == "A") return UnitGroup::kA;
  if (s == "B") return UnitGroup::kB;
  if (s == "C") return UnitGroup::kC;
  throw Error(ErrorCode::kValidation, "unknown unit_group '" + std::string(s) + "'");
}

}  // namespace

std::span<const std::string_view> phoneme_inventory() { return kInventory; }

Phoneme::Phoneme(std::string_view symbol) {
  auto it = std::find(kInventory.begin(), kInventory.end(), symbol);
  if (it == kInventory.end()) {
    throw Error(ErrorCode::kValidation,
                "unknown phoneme '" + std::string(symbol) + "'");
  }
  index_ = static_cast<std::size_t>(it - kInventory.begin());
}

std::string_view to_string(UnitGroup g) {
  switch (g) {
    case UnitGroup::kA: return "A";
    case UnitGroup::kB: return "B";
    case UnitGroup::kC: return "C";
  }
  return "?";
}

Curriculum::Curriculum(std::vector<PronLexEntry> entries, std::string source_name)
    : entries_(std::move(entries)), source_name_(std::move(source_name)) {
  if (entries_.empty()) throw Error(ErrorCode::kValidation, "empty curriculum");
  std::set<std::string> seen;
  for (const auto& e : entries_) {
    if (e.phonemes.empty()) {
      throw Error(ErrorCode::kValidation, "word '" + e.word + "' has no phonemes");
    }
    if (!seen.insert(lowercase(e.word)).second) {
      throw Error(ErrorCode::kValidation, "duplicate word '" + e.word + "'");
    }
  }
}

const PronLexEntry* Curriculum::find(std::string_view word) const {
  const std::string key = lowercase(word);
  for (const auto& e : entries_) {
    if (lowercase(e.word) == key) return &e;
  }
  return nullptr;
}

const PronLexEntry& Curriculum::at(std::string_view word) const {
  if (const auto* e = find(word)) return *e;
  throw Error(ErrorCode::kNotFound, "word '" + std::string(word) + "' not in curriculum");
}

Curriculum parse_curriculum(std::string_view text, std::string source_name) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, source_name + ": " + e.what());
  }
  if (!doc.is_array()) {
    throw Error(ErrorCode::kParse, source_name + ": top level must be an array");
  }
  if (doc.empty()) throw Error(ErrorCode::kValidation, "empty curriculum");

  static const std::set<std::string> kFields = {"word", "spelled_out", "phonemes",
                                                "unit_group"};
  std::vector<PronLexEntry> entries;
  entries.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& rec = doc[i];
    const std::string where = source_name + ": record " + std::to_string(i);
    if (!rec.is_object()) throw Error(ErrorCode::kParse, where + ": not an object");
    for (const auto& [key, _] : rec.items()) {
      if (!kFields.contains(key)) {
        throw Error(ErrorCode::kParse, where + ": unknown field '" + key + "'");
      }
    }
    for (const auto& key : kFields) {
      if (!rec.contains(key)) {
        throw Error(ErrorCode::kParse, where + ": missing field '" + key + "'");
      }
    }
    if (!rec["word"].is_string() || !rec["spelled_out"].is_string() ||
        !rec["unit_group"].is_string() || !rec["phonemes"].is_array()) {
      throw Error(ErrorCode::kParse, where + ": wrong field type");
    }
    PronLexEntry e;
    e.word = rec["word"].get<std::string>();
    e.spelled_out = rec["spelled_out"].get<std::string>();
    try {
      e.unit_group = parse_unit_group(rec["unit_group"].get<std::string>());
      for (const auto& p : rec["phonemes"]) {
        if (!p.is_string()) throw Error(ErrorCode::kParse, "phoneme must be a string");
        e.phonemes.emplace_back(p.get<std::string>());
      }
    } catch (const Error& err) {
      throw Error(err.code(), where + " ('" + e.word + "'): " + err.what());
    }
    entries.push_back(std::move(e));
  }
  return Curriculum(std::move(entries), std::move(source_name));
}

Curriculum load_curriculum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_curriculum(ss.str(), path.filename().string());
}

std::string serialize_curriculum(const Curriculum& c) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& e : c.entries()) {
    nlohmann::ordered_json rec;
    rec["word"] = e.word;
    rec["spelled_out"] = e.spelled_out;
    auto phonemes = nlohmann::ordered_json::array();
    for (auto p : e.phonemes) phonemes.push_back(std::string(p.symbol()));
    rec["phonemes"] = std::move(phonemes);
    rec["unit_group"] = std::string(to_string(e.unit_group));
    doc.push_back(std::move(rec));
  }
  return doc.dump(1) + "\n";
}

void save_curriculum(const Curriculum& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << serialize_curriculum(c);
}

std::vector<PronLexEntry> sample_syllabus(const Curriculum& c, std::size_t per_group,
                                          std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PronLexEntry> out;
  out.reserve(3 * per_group);
  for (UnitGroup g : {UnitGroup::kA, UnitGroup::kB, UnitGroup::kC}) {
    std::vector<const PronLexEntry*> pool;
    for (const auto& e : c.entries()) {
      if (e.unit_group == g) pool.push_back(&e);
    }
    if (pool.size() < per_group) {
      throw Error(ErrorCode::kInsufficientData,
                  "group " + std::string(to_string(g)) + " has " +
                      std::to_string(pool.size()) + " entries, need " +
                      std::to_string(per_group));
    }
    // Partial Fisher-Yates: the first per_group slots end up uniform.
    for (std::size_t i = 0; i < per_group; ++i) {
      std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
      out.push_back(*pool[i]);
    }
  }
  return out;
}

}  // namespace prontutor
