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

#include "prontutor/cli.hpp"

#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "prontutor/adaptation.hpp"
#include "prontutor/analytics.hpp"
#include "prontutor/engine.hpp"
#include "prontutor/service.hpp"
#include "prontutor/store.hpp"

namespace prontutor {
namespace fs = std::filesystem;
namespace {

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

EngineConfig resolve_config(const std::string& path) {
  EngineConfig c = path.empty() ? EngineConfig{} : load_engine_config(path);
  apply_env_overrides(c, [](const char* name) { return std::getenv(name); });
  return c;
}

ReferenceClipSet reference_clips(const EngineConfig& c) {
  return c.reference_clips ? load_reference_clips(*c.reference_clips) : ReferenceClipSet::synthetic();
}

double resolve_tau(const EngineConfig& c, const ReferenceClipSet& clips) {
  return c.tau.value_or(default_tau(clips, FrameSpec{}));
}

SpeakerTransform load_transform_file(const std::string& path, Voice voice) {
  if (path.empty()) return SpeakerTransform::identity(FrameSpec{}.dimension(), voice);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_transform(ss.str());
}

void print_feedback(std::ostream& out, const LikertFeedback& fb) {
  char line[128];
  out << "phoneme  cost      score     rating\n";
  for (std::size_t i = 0; i < fb.scores.size(); ++i) {
    std::snprintf(line, sizeof line, "%-8s %-9.4f %-9.3f %d\n",
                  std::string(fb.scores[i].phoneme.symbol()).c_str(), fb.scores[i].cost,
                  fb.scores[i].acoustic_score, fb.ratings[i]);
    out << line;
  }
  std::snprintf(line, sizeof line, "word_score %.3f  accepted %s\n", fb.word_score,
                fb.accepted ? "yes" : "no");
  out << line;
}

// Trims and splits one comma-delimited line.
std::vector<std::string> csv_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) {
    const auto b = f.find_first_not_of(" \t\r");
    const auto e = f.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : f.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"prontutor: pronunciation scoring, scheduling and study analytics"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "engine config (JSON)");

  auto* serve = app.add_subcommand("serve", "run the HTTP session API");

  auto* score = app.add_subcommand("score", "score one recording of a curriculum word");
  std::string wav_path, word, voice_name = "male", transform_path;
  score->add_option("wav", wav_path)->required();
  score->add_option("word", word)->required();
  score->add_option("--voice", voice_name, "reference voice")->check(CLI::IsMember({"male", "female"}));
  score->add_option("--transform", transform_path, "speaker transform file");

  auto* batch = app.add_subcommand("batch-score", "score test recordings listed in a manifest");
  std::string manifest_path;
  batch->add_option("manifest", manifest_path,
                    "CSV: participant,phase,word,wav[,voice] with a header row")->required();

  auto* build = app.add_subcommand("build-refs", "build reference models from phoneme clips");
  std::string clips_dir, refs_out;
  build->add_option("clips-dir", clips_dir)->required();
  build->add_option("--out", refs_out, "write calibration summary JSON here");

  auto* enroll = app.add_subcommand("enroll", "estimate a speaker transform from enrollment clips");
  std::string participant_id, enroll_dir, enroll_voice;
  std::string group_name = "control";
  enroll->add_option("participant", participant_id)->required();
  enroll->add_option("clips-dir", enroll_dir, "files named <word>_<n>.wav")->required();
  enroll->add_option("--voice", enroll_voice)->check(CLI::IsMember({"male", "female"}));
  enroll->add_option("--group", group_name, "group for a new participant")
      ->check(CLI::IsMember({"control", "treatment"}));

  auto* replicate = app.add_subcommand("replicate-paper", "recompute the study statistics");
  std::string fixture = PRONTUTOR_DATA_DIR "/study_tables.csv";
  bool replicate_csv = false;
  replicate->add_option("--fixture", fixture, "gain table");
  replicate->add_flag("--csv", replicate_csv, "print the comparisons as CSV instead");

  auto* exp = app.add_subcommand("export", "export test scores from the store");
  std::string filter_participant, filter_phase, filter_group;
  bool export_gains = false;
  exp->add_option("--participant", filter_participant);
  exp->add_option("--phase", filter_phase)->check(CLI::IsMember({"pre", "post"}));
  exp->add_option("--group", filter_group)->check(CLI::IsMember({"control", "treatment"}));
  exp->add_flag("--gains", export_gains, "gain-table format for replicate-paper --fixture");

  auto* synth = app.add_subcommand("synth", "render a synthetic utterance of a curriculum word");
  std::string synth_word, synth_out, synth_voice = "male";
  std::vector<std::string> detunes;
  synth->add_option("word", synth_word)->required();
  synth->add_option("out", synth_out)->required();
  synth->add_option("--voice", synth_voice)->check(CLI::IsMember({"male", "female"}));
  synth->add_option("--detune", detunes, "POSITION=FRACTION, repeatable");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    const EngineConfig config = resolve_config(config_path);

    if (*serve) {
      const auto t0 = std::chrono::steady_clock::now();
      SystemClock clock;
      Engine engine(config, clock);
      HttpServer server(engine);
      const int port = server.bind(config.host, config.port);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      out << "prontutor listening on " << config.host << ":" << port << " (" << engine.bank().size()
          << " reference models, tau " << engine.tau() << ", ready in " << secs << " s)" << std::endl;
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.listen();
      g_server = nullptr;
      return 0;
    }

    if (*score) {
      const Curriculum c = load_curriculum(config.curriculum_path);
      const ReferenceClipSet clips = reference_clips(config);
      const WordReferenceModel model = build_reference_model(c.at(word), clips, FrameSpec{});
      const SpeakerTransform t = load_transform_file(transform_path, parse_voice(voice_name));
      const LikertFeedback fb =
          score_utterance(read_wav(wav_path), model, t, config.scoring(resolve_tau(config, clips)));
      print_feedback(out, fb);
      return 0;
    }

    if (*batch) {
      const Curriculum c = load_curriculum(config.curriculum_path);
      const ReferenceClipSet clips = reference_clips(config);
      const ScoringParams params = config.scoring(resolve_tau(config, clips));
      std::ifstream in(manifest_path);
      if (!in) throw Error(ErrorCode::kIo, "cannot open " + manifest_path);
      const fs::path base = fs::path(manifest_path).parent_path();
      std::map<std::pair<std::string, std::string>, TestScores> totals;
      std::map<std::string, WordReferenceModel> models;
      std::string line;
      bool header = true;
      std::size_t line_no = 0;
      while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        if (header) {
          header = false;
          continue;
        }
        const auto f = csv_fields(line);
        if (f.size() != 4 && f.size() != 5) {
          throw Error(ErrorCode::kParse, manifest_path + " line " + std::to_string(line_no) +
                                             ": expected participant,phase,word,wav[,voice]");
        }
        const Phase phase = parse_phase(f[1]);
        const Voice voice = f.size() == 5 ? parse_voice(f[4]) : Voice::kMale;
        auto it = models.find(f[2]);
        if (it == models.end()) {
          it = models.emplace(f[2], build_reference_model(c.at(f[2]), clips, FrameSpec{})).first;
        }
        fs::path wav = f[3];
        if (wav.is_relative()) wav = base / wav;
        const LikertFeedback fb = score_utterance(
            read_wav(wav), it->second, SpeakerTransform::identity(FrameSpec{}.dimension(), voice), params);
        auto& t = totals[{f[0], f[1]}];
        t.participant = f[0];
        t.phase = phase;
        t.total += fb.word_score;
        t.words_accepted += fb.accepted ? 1 : 0;
      }
      out << "participant,phase,total,words_accepted\n";
      for (const auto& [key, t] : totals) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", t.total);
        out << t.participant << "," << to_string(t.phase) << "," << buf << "," << t.words_accepted << "\n";
      }
      return 0;
    }

    if (*build) {
      const Curriculum c = load_curriculum(config.curriculum_path);
      const ReferenceClipSet clips = load_reference_clips(clips_dir);
      const auto t0 = std::chrono::steady_clock::now();
      const ReferenceBank bank(c, clips);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      out << "built " << bank.size() << " word models in " << secs << " s; default tau "
          << bank.default_tau() << "\n";
      if (!refs_out.empty()) {
        nlohmann::json j = {{"tau", bank.default_tau()}, {"words", nlohmann::json::object()}};
        for (const auto& e : c.entries()) {
          const auto& m = bank.model(e.word);
          nlohmann::json w;
          for (Voice v : {Voice::kMale, Voice::kFemale}) {
            nlohmann::json cal = nlohmann::json::array();
            for (const auto& k : m.calibration_for(v)) cal.push_back({k.mean, k.sd});
            w[std::string(to_string(v))] = cal;
          }
          j["words"][e.word] = w;
        }
        std::ofstream o(refs_out);
        o << j.dump(1) << "\n";
        if (!o) throw Error(ErrorCode::kIo, "cannot write " + refs_out);
      }
      return 0;
    }

    if (*enroll) {
      const Curriculum c = load_curriculum(config.curriculum_path);
      const ReferenceClipSet clips = reference_clips(config);
      Store store(config.store_path);
      Participant p;
      if (auto known = store.participant(participant_id)) {
        p = *known;
        if (!enroll_voice.empty()) p.declared_voice = parse_voice(enroll_voice);
      } else {
        p.id = participant_id;
        p.group = parse_group(group_name);
        p.declared_voice = select_voice_model(enroll_voice.empty()
                                                  ? std::nullopt
                                                  : std::optional<Voice>(parse_voice(enroll_voice)));
      }
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(enroll_dir)) {
        if (entry.path().extension() == ".wav") files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      std::vector<WordReferenceModel> models;
      std::vector<FeatureSequence> feats;
      models.reserve(files.size());
      for (const auto& f : files) {
        const std::string stem = f.stem().string();
        const std::string w = stem.substr(0, stem.find('_'));
        models.push_back(build_reference_model(c.at(w), clips, FrameSpec{}));
        feats.push_back(mfcc(read_wav(f), FrameSpec{}));
      }
      std::vector<EnrollmentUtterance> utterances;
      for (std::size_t i = 0; i < models.size(); ++i) utterances.push_back({feats[i], &models[i]});
      const SpeakerTransform t = estimate_transform(utterances, p.declared_voice);
      const std::string ref = "participant-" + p.id;
      store.put_transform(ref, t);
      p.transform_ref = ref;
      store.put_participant(p);
      out << "enrolled " << p.id << " from " << utterances.size() << " utterances ("
          << t.enrollment_frame_count << " frame pairs); transform " << ref << "\n";
      return 0;
    }

    if (*replicate) {
      const auto t0 = std::chrono::steady_clock::now();
      const StatsReport report = replicate_study(load_gain_table(fixture));
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (replicate_csv) {
        out << report_csv(report);
      } else {
        out << format_report(report);
        out << "runtime " << secs << " s\n";
      }
      return report.all_pass() ? 0 : 1;
    }

    if (*exp) {
      Store store(config.store_path);
      ScoreFilter filter;
      if (!filter_participant.empty()) filter.participant = filter_participant;
      if (!filter_phase.empty()) filter.phase = parse_phase(filter_phase);
      if (!filter_group.empty()) filter.group = parse_group(filter_group);
      out << (export_gains ? store.export_gains(filter) : store.export_scores(filter));
      return 0;
    }

    if (*synth) {
      const Curriculum c = load_curriculum(config.curriculum_path);
      const PronLexEntry& e = c.at(synth_word);
      ErrorModel errors;
      if (!detunes.empty()) {
        errors.detune.assign(e.phonemes.size(), 0.0);
        for (const auto& d : detunes) {
          const auto eq = d.find('=');
          if (eq == std::string::npos) throw Error(ErrorCode::kValidation, "--detune wants POSITION=FRACTION");
          const std::size_t pos = std::stoul(d.substr(0, eq));
          if (pos >= e.phonemes.size()) throw Error(ErrorCode::kValidation, "--detune position out of range");
          errors.detune[pos] = std::stod(d.substr(eq + 1));
        }
      }
      write_wav(synth_word_utterance(e, parse_voice(synth_voice), errors), synth_out);
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace prontutor
