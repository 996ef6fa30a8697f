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

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "prontutor/store.hpp"
#include "support.hpp"

using namespace prontutor;
using prontutor::testing::TableScorer;
using prontutor::testing::TempDir;

namespace {

SessionEvent event(std::string session, std::uint64_t seq) {
  return {seq, std::move(session), EventKind::kItemPresented, {{"n", seq}}, 10.0 + seq};
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Runs a complete TEST session into the store with a fixed per-word score.
void run_test(Store& store, ManualClock& clock, const std::string& id, const Participant& p,
              Phase phase, double word_score, int accepted) {
  SessionContext ctx;
  ctx.curriculum = &testing::shipped_curriculum();
  ctx.clock = &clock;
  ctx.sink = [&](const SessionEvent& e) { store.append_event(e); };
  SessionOptions opts;
  opts.test_phase = phase;
  std::vector<std::string> words;
  for (std::size_t i = 0; i < kTestWordCount; ++i) {
    words.push_back(testing::shipped_curriculum().entries()[i].word);
  }
  Session s = Session::start(id, p, Mode::kTest, words, 0, ctx, opts);
  const AudioClip clip{std::vector<std::int16_t>(800, 0)};
  for (std::size_t i = 0; i < kTestWordCount; ++i) {
    s.next_item();
    const TableScorer scorer(word_score, static_cast<int>(i) < accepted);
    s.submit_attempt(clip, "c", scorer);
    s.complete_feedback();
  }
  clock.advance(1.0);
}

}  // namespace

TEST_CASE("sha256 known answer") {
  const std::string abc = "abc";
  CHECK(sha256_hex({reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size()}) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex({}) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("safe names") {
  CHECK(is_safe_name("s0123abcd_x-y"));
  CHECK_FALSE(is_safe_name(""));
  CHECK_FALSE(is_safe_name("../etc"));
  CHECK_FALSE(is_safe_name("a/b"));
  CHECK_FALSE(is_safe_name(std::string(129, 'a')));
}

TEST_CASE("event logs append in sequence") {
  TempDir dir;
  Store store(dir.path());
  CHECK_FALSE(store.has_session("s1"));
  store.append_event(event("s1", 1));
  store.append_event(event("s1", 2));
  try {
    store.append_event(event("s1", 4));
    FAIL("expected a sequence gap");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConflict);
    CHECK(std::string(e.what()).find("sequence gap") != std::string::npos);
  }
  CHECK_THROWS_AS(store.append_event(event("s2", 2)), Error);
  CHECK_THROWS_AS(store.append_event(event("../x", 1)), Error);
  const auto back = store.read_events("s1");
  REQUIRE(back.size() == 2);
  CHECK(back[1] == event("s1", 2));
  CHECK(store.session_ids() == std::vector<std::string>{"s1"});
  CHECK_THROWS_AS(store.read_events("missing"), Error);

  // A second handle on the same root continues the sequence.
  Store reopened(dir.path());
  CHECK_THROWS_AS(reopened.append_event(event("s1", 2)), Error);
  reopened.append_event(event("s1", 3));
  CHECK(reopened.read_events("s1").size() == 3);
}

TEST_CASE("a torn final line is dropped and overwritten") {
  TempDir dir;
  {
    Store store(dir.path());
    store.append_event(event("s1", 1));
    store.append_event(event("s1", 2));
  }
  const auto log = dir.path() / "sessions" / "s1.log";
  {
    std::ofstream out(log, std::ios::app | std::ios::binary);
    out << R"({"seq":3,"session":"s1","ki)";
  }
  Store store(dir.path());
  CHECK(store.read_events("s1").size() == 2);
  store.append_event(event("s1", 3));
  const auto back = store.read_events("s1");
  REQUIRE(back.size() == 3);
  CHECK(back[2] == event("s1", 3));
  const std::string text = read_file(log);
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}

TEST_CASE("concurrent appends to different sessions") {
  TempDir dir;
  Store store(dir.path());
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (std::uint64_t i = 1; i <= 50; ++i) store.append_event(event("s" + std::to_string(t), i));
    });
  }
  for (auto& th : threads) th.join();
  for (int t = 0; t < 8; ++t) CHECK(store.read_events("s" + std::to_string(t)).size() == 50);
}

TEST_CASE("clips are content addressed") {
  TempDir dir;
  Store store(dir.path());
  const AudioClip a = synth_noise(200, 0.1, 1);
  const AudioClip b = synth_noise(200, 0.1, 2);
  const std::string ha = store.put_clip(a);
  CHECK(ha == clip_hash(a));
  CHECK(store.put_clip(a) == ha);
  CHECK(store.put_clip(b) != ha);
  CHECK(store.clip(ha) == a);
  const auto bytes = encode_wav(a);
  CHECK(store.put_clip_bytes(bytes) == ha);
  CHECK(*store.clip_bytes(ha) == bytes);
  CHECK_FALSE(store.clip_bytes(std::string(64, '0')).has_value());
  CHECK_FALSE(store.clip_bytes("../../etc/passwd").has_value());
  CHECK_THROWS_AS(store.clip(std::string(64, '0')), Error);
  const std::vector<std::uint8_t> junk = {1, 2, 3};
  CHECK_THROWS_AS(store.put_clip_bytes(junk), Error);
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& f : std::filesystem::directory_iterator(dir.path() / "clips")) ++files;
  CHECK(files == 2);
}

TEST_CASE("participants keep their group") {
  TempDir dir;
  Store store(dir.path());
  Participant p{"p1", Group::kControl, Voice::kMale, std::nullopt};
  store.put_participant(p);
  p.declared_voice = Voice::kFemale;
  p.transform_ref = "participant-p1";
  store.put_participant(p);
  CHECK(*store.participant("p1") == p);
  p.group = Group::kTreatment;
  try {
    store.put_participant(p);
    FAIL("expected a conflict");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConflict);
  }
  CHECK_FALSE(store.participant("nobody").has_value());
  CHECK(store.participants().size() == 1);
}

TEST_CASE("transforms round-trip") {
  TempDir dir;
  Store store(dir.path());
  SpeakerTransform t = SpeakerTransform::identity(13, Voice::kFemale);
  t.affine.b(3) = 0.25;
  t.enrollment_frame_count = 400;
  store.put_transform("voice-female", t);
  const auto back = store.transform("voice-female");
  REQUIRE(back.has_value());
  CHECK(back->affine.A == t.affine.A);
  CHECK(back->affine.b == t.affine.b);
  CHECK(back->voice == Voice::kFemale);
  CHECK_FALSE(store.transform("voice-male").has_value());
}

TEST_CASE("score export over a cohort") {
  TempDir dir;
  Store store(dir.path());
  ManualClock clock(100.0);
  CHECK_THROWS_AS(store.collect_scores(), Error);
  for (int i = 0; i < 18; ++i) {
    const Group g = i < 9 ? Group::kControl : Group::kTreatment;
    const Participant p{"P" + std::to_string(i), g, Voice::kMale, std::nullopt};
    store.put_participant(p);
    run_test(store, clock, "pre" + std::to_string(i), p, Phase::kPre, 100.0, 10);
    run_test(store, clock, "post" + std::to_string(i), p, Phase::kPost, g == Group::kTreatment ? 110.0 : 100.0,
             g == Group::kTreatment ? 12 : 10);
  }
  // An abandoned test is not a result.
  {
    SessionContext ctx;
    ctx.curriculum = &testing::shipped_curriculum();
    ctx.clock = &clock;
    ctx.sink = [&](const SessionEvent& e) { store.append_event(e); };
    std::vector<std::string> words;
    for (std::size_t i = 0; i < kTestWordCount; ++i) {
      words.push_back(testing::shipped_curriculum().entries()[i].word);
    }
    Session s = Session::start("open", {"P0", Group::kControl, Voice::kMale, std::nullopt},
                               Mode::kTest, words, 0, ctx);
    s.next_item();
  }
  const auto rows = store.collect_scores();
  CHECK(rows.size() == 36);
  const std::string csv = store.export_scores();
  CHECK(csv.rfind("participant,group,phase,total,words_accepted\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 37);
  ScoreFilter treatment;
  treatment.group = Group::kTreatment;
  CHECK(store.collect_scores(treatment).size() == 18);
  ScoreFilter one;
  one.participant = "P12";
  one.phase = Phase::kPost;
  const auto single = store.collect_scores(one);
  REQUIRE(single.size() == 1);
  CHECK(single[0].scores.total == doctest::Approx(30 * 110.0));
  CHECK(single[0].scores.words_accepted == 12);

  const auto gains = store.collect_gains();
  REQUIRE(gains.size() == 18);
  for (const auto& g : gains) {
    CHECK(g.asgp == doctest::Approx(g.group == Group::kTreatment ? 10.0 : 0.0));
    CHECK(g.wg() == (g.group == Group::kTreatment ? 2 : 0));
  }
  CHECK(parse_gain_table(store.export_gains()) == gains);

  // Retaking a phase replaces the earlier result.
  run_test(store, clock, "retake", {"P0", Group::kControl, Voice::kMale, std::nullopt}, Phase::kPost,
           120.0, 15);
  one.participant = "P0";
  CHECK(store.collect_scores(one).front().scores.words_accepted == 15);
}
