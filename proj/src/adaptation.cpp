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

#include "prontutor/adaptation.hpp"

#include <iostream>
#include <vector>

#include <nlohmann/json.hpp>

namespace prontutor {

SpeakerTransform SpeakerTransform::identity(Eigen::Index dim, Voice voice) {
  return {AffineTransform<double>::identity(dim), voice, 0};
}

SpeakerTransform estimate_transform(std::span<const EnrollmentUtterance> enrollment,
                                    Voice voice, const AdaptationParams& params) {
  if (enrollment.empty()) {
    throw Error(ErrorCode::kInsufficientData, "insufficient enrollment: no utterances");
  }
  const Eigen::Index dim = enrollment.front().learner.dimension();
  Eigen::Index total_frames = 0;
  std::vector<FeatureSequence> references;
  for (const auto& u : enrollment) {
    if (u.model == nullptr) throw Error(ErrorCode::kValidation, "enrollment without a model");
    if (u.learner.dimension() != dim) {
      throw Error(ErrorCode::kValidation, "enrollment feature dimensions differ");
    }
    total_frames += u.learner.frames();
    std::vector<FeatureSequence> parts;
    for (const auto& t : u.model->templates_for(voice)) parts.push_back(t.frames);
    references.push_back(concatenate(parts));
  }
  if (total_frames < dim + 1) {
    throw Error(ErrorCode::kInsufficientData,
                "insufficient enrollment: " + std::to_string(total_frames) +
                    " frames, need " + std::to_string(dim + 1));
  }

  AffineTransform<double> current = AffineTransform<double>::identity(dim);
  std::vector<std::vector<PathCell>> previous(enrollment.size());
  std::size_t pairs = 0;
  for (int iter = 0; iter < params.max_iterations; ++iter) {
    std::vector<std::vector<PathCell>> paths(enrollment.size());
    pairs = 0;
    for (std::size_t u = 0; u < enrollment.size(); ++u) {
      const FeatureMatrix<double> moved = current.apply_rows(enrollment[u].learner.vectors);
      paths[u] = dtw(moved, references[u].vectors).cells;
      pairs += paths[u].size();
    }
    if (iter > 0 && paths == previous) break;

    FeatureMatrix<double> x(static_cast<Eigen::Index>(pairs), dim);
    FeatureMatrix<double> y(static_cast<Eigen::Index>(pairs), dim);
    Eigen::Index row = 0;
    for (std::size_t u = 0; u < enrollment.size(); ++u) {
      for (const auto& cell : paths[u]) {
        x.row(row) = enrollment[u].learner.vectors.row(cell.learner);
        y.row(row) = references[u].vectors.row(cell.reference);
        ++row;
      }
    }
    current = fit_affine(x, y, params.ridge);
    previous = std::move(paths);
  }
  return {std::move(current), voice, pairs};
}

FeatureSequence apply_transform(const SpeakerTransform& t, const FeatureSequence& f) {
  if (t.affine.dimension() != f.dimension()) {
    throw Error(ErrorCode::kValidation,
                "transform dimension " + std::to_string(t.affine.dimension()) +
                    " does not match features " + std::to_string(f.dimension()));
  }
  return {t.affine.apply_rows(f.vectors), f.frame_spec};
}

Voice select_voice_model(std::optional<Voice> declared) {
  if (declared) return *declared;
  std::clog << "warning: no declared voice, using male reference templates\n";
  return Voice::kMale;
}

std::string serialize_transform(const SpeakerTransform& t) {
  const Eigen::Index d = t.affine.dimension();
  nlohmann::ordered_json j;
  j["dim"] = d;
  std::vector<double> a;
  a.reserve(static_cast<std::size_t>(d * d));
  for (Eigen::Index r = 0; r < d; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) a.push_back(t.affine.A(r, c));
  }
  j["A"] = a;
  j["b"] = std::vector<double>(t.affine.b.data(), t.affine.b.data() + d);
  j["voice"] = std::string(to_string(t.voice));
  j["frames"] = t.enrollment_frame_count;
  return j.dump();
}

SpeakerTransform parse_transform(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    const auto d = j.at("dim").get<Eigen::Index>();
    const auto a = j.at("A").get<std::vector<double>>();
    const auto b = j.at("b").get<std::vector<double>>();
    if (d <= 0 || static_cast<Eigen::Index>(a.size()) != d * d ||
        static_cast<Eigen::Index>(b.size()) != d) {
      throw Error(ErrorCode::kParse, "transform record has inconsistent sizes");
    }
    SpeakerTransform t;
    t.affine.A.resize(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
      for (Eigen::Index c = 0; c < d; ++c) t.affine.A(r, c) = a[r * d + c];
    }
    t.affine.b = Eigen::Map<const Eigen::VectorXd>(b.data(), d);
    t.voice = parse_voice(j.at("voice").get<std::string>());
    t.enrollment_frame_count = j.at("frames").get<std::size_t>();
    if (!t.affine.is_finite()) throw Error(ErrorCode::kParse, "transform is not finite");
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad transform record: ") + e.what());
  }
}

}  // namespace prontutor
