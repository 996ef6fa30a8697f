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

#ifndef PRONTUTOR_ANALYTICS_HPP_
#define PRONTUTOR_ANALYTICS_HPP_

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prontutor/common.hpp"

namespace prontutor {

/// (post - pre) * 100 / pre over test totals. Sign is kept.
double asgp(const TestScores& pre, const TestScores& post);

/// Change in accepted-word count, post minus pre.
int word_gain(const TestScores& pre, const TestScores& post);

template <typename Scalar>
struct SampleSummary {
  Scalar mean = 0;
  /// Sample standard deviation (n - 1 denominator).
  Scalar sd = 0;
  std::size_t n = 0;
};

template <typename Scalar>
SampleSummary<Scalar> summarize(std::span<const Scalar> xs) {
  SampleSummary<Scalar> s;
  s.n = xs.size();
  if (xs.empty()) return s;
  Scalar sum = 0;
  for (Scalar x : xs) sum += x;
  s.mean = sum / static_cast<Scalar>(xs.size());
  if (xs.size() > 1) {
    Scalar ss = 0;
    for (Scalar x : xs) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<Scalar>(xs.size() - 1));
  }
  return s;
}

enum class TTestVariant { kPooled, kWelch };

std::string_view to_string(TTestVariant v);

struct TTestResult {
  TTestVariant variant = TTestVariant::kPooled;
  /// Sign follows mean(a) - mean(b).
  double t = 0.0;
  double df = 0.0;
  /// Two-tailed.
  double p = 1.0;
};

/// Two-tailed p for Student's t with df degrees of freedom:
/// I_{df / (df + t^2)}(df / 2, 1 / 2).
double student_t_two_tailed_p(double t, double df);

/// Both samples need at least two values and at least one of them nonzero
/// variance.
TTestResult t_test_two_tailed(std::span<const double> a, std::span<const double> b,
                              TTestVariant variant);

/// Product-moment correlation. Equal lengths >= 2, nonzero variance in both.
double pearson_r(std::span<const double> x, std::span<const double> y);

/// One participant's row of the published gain tables.
struct GainRecord {
  std::string participant;
  Group group = Group::kControl;
  double asgp = 0.0;
  int pre_words = 0;
  int post_words = 0;

  int wg() const { return post_words - pre_words; }
  friend bool operator==(const GainRecord&, const GainRecord&) = default;
};

/// Comma-delimited with a header `participant,group,asgp,pre_words,post_words`;
/// blank lines and lines starting with '#' are skipped.
std::vector<GainRecord> parse_gain_table(std::string_view text);
std::vector<GainRecord> load_gain_table(const std::filesystem::path& path);
std::string serialize_gain_table(std::span<const GainRecord> rows);

/// Pairs pre and post scores by participant. Participants missing either
/// phase are skipped.
struct ParticipantGroup {
  std::string participant;
  Group group;
};
std::vector<GainRecord> gains_from_scores(std::span<const TestScores> scores,
                                          std::span<const ParticipantGroup> groups);

/// A reported value with its acceptance band. Passes when either test
/// variant lands in [lo, hi].
struct Claim {
  std::string name;
  double reported = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double observed = 0.0;
  std::optional<double> alternate;

  bool pass() const;
};

struct GroupComparison {
  std::string metric;
  SampleSummary<double> control;
  SampleSummary<double> treatment;
  TTestResult pooled;
  TTestResult welch;
};

struct StatsReport {
  std::vector<GroupComparison> comparisons;
  std::vector<Claim> claims;
  std::vector<std::string> notes;

  bool all_pass() const;
  const GroupComparison& comparison(std::string_view metric) const;
};

/// Descriptive statistics and control-vs-treatment t-tests for ASGP, WG,
/// and pre/post word counts, checked against the published study values.
StatsReport replicate_study(std::span<const GainRecord> rows);

/// Plain-text report, one PASS/FAIL line per claim.
std::string format_report(const StatsReport& r);
/// Comma-delimited export of the comparisons.
std::string report_csv(const StatsReport& r);

}  // namespace prontutor

#endif  // PRONTUTOR_ANALYTICS_HPP_
