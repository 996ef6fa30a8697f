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

#include "prontutor/analytics.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/math/special_functions/beta.hpp>

namespace prontutor {
namespace {

void require_same_participant(const TestScores& pre, const TestScores& post) {
  if (pre.participant != post.participant) {
    throw Error(ErrorCode::kValidation, "mismatched participant: '" + pre.participant +
                                            "' vs '" + post.participant + "'");
  }
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t at = 0;
  while (true) {
    const auto next = line.find(sep, at);
    out.push_back(line.substr(at, next - at));
    if (next == std::string_view::npos) break;
    at = next + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view s, const std::string& where) {
  s = trim(s);
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kParse, where + ": bad number '" + std::string(s) + "'");
  }
  return value;
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

}  // namespace

double asgp(const TestScores& pre, const TestScores& post) {
  require_same_participant(pre, post);
  if (!(pre.total > 0.0)) {
    throw Error(ErrorCode::kValidation, "pre-test total must be positive");
  }
  return (post.total - pre.total) * 100.0 / pre.total;
}

int word_gain(const TestScores& pre, const TestScores& post) {
  require_same_participant(pre, post);
  return post.words_accepted - pre.words_accepted;
}

std::string_view to_string(TTestVariant v) {
  return v == TTestVariant::kPooled ? "pooled" : "welch";
}

double student_t_two_tailed_p(double t, double df) {
  if (!(df > 0.0)) throw Error(ErrorCode::kValidation, "degrees of freedom must be positive");
  if (!std::isfinite(t)) return 0.0;
  const double x = df / (df + t * t);
  return std::clamp(boost::math::ibeta(df / 2.0, 0.5, x), 0.0, 1.0);
}

TTestResult t_test_two_tailed(std::span<const double> a, std::span<const double> b,
                              TTestVariant variant) {
  if (a.size() < 2 || b.size() < 2) {
    throw Error(ErrorCode::kInsufficientData, "t-test needs at least two values per sample");
  }
  const auto sa = summarize(a);
  const auto sb = summarize(b);
  if (sa.sd == 0.0 && sb.sd == 0.0) {
    if (sa.mean == sb.mean) {
      return {variant, 0.0, static_cast<double>(a.size() + b.size() - 2), 1.0};
    }
    throw Error(ErrorCode::kValidation, "zero variance in both samples");
  }
  const double na = static_cast<double>(sa.n);
  const double nb = static_cast<double>(sb.n);
  const double va = sa.sd * sa.sd;
  const double vb = sb.sd * sb.sd;
  TTestResult r;
  r.variant = variant;
  if (variant == TTestVariant::kPooled) {
    r.df = na + nb - 2.0;
    const double pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / r.df;
    r.t = (sa.mean - sb.mean) / std::sqrt(pooled * (1.0 / na + 1.0 / nb));
  } else {
    const double qa = va / na;
    const double qb = vb / nb;
    r.t = (sa.mean - sb.mean) / std::sqrt(qa + qb);
    r.df = (qa + qb) * (qa + qb) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
  }
  r.p = student_t_two_tailed_p(r.t, r.df);
  return r;
}

double pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::kValidation, "length mismatch");
  if (x.size() < 2) throw Error(ErrorCode::kInsufficientData, "need at least two pairs");
  const auto sx = summarize(x);
  const auto sy = summarize(y);
  if (sx.sd == 0.0 || sy.sd == 0.0) throw Error(ErrorCode::kValidation, "zero variance");
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - sx.mean) * (y[i] - sy.mean);
  const double r = sxy / (static_cast<double>(x.size() - 1) * sx.sd * sy.sd);
  return std::clamp(r, -1.0, 1.0);
}

std::vector<GainRecord> parse_gain_table(std::string_view text) {
  std::vector<GainRecord> rows;
  bool header = false;
  std::size_t line_no = 0;
  std::size_t at = 0;
  while (at <= text.size()) {
    const auto end = std::min(text.find('\n', at), text.size());
    const std::string_view line = trim(text.substr(at, end - at));
    at = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const std::string where = "line " + std::to_string(line_no);
    const auto cols = split(line, ',');
    if (cols.size() != 5) throw Error(ErrorCode::kParse, where + ": expected 5 columns");
    if (!header) {
      if (trim(cols[0]) != "participant" || trim(cols[1]) != "group" ||
          trim(cols[2]) != "asgp" || trim(cols[3]) != "pre_words" ||
          trim(cols[4]) != "post_words") {
        throw Error(ErrorCode::kParse, where + ": unexpected header");
      }
      header = true;
      continue;
    }
    GainRecord r;
    r.participant = std::string(trim(cols[0]));
    try {
      r.group = parse_group(trim(cols[1]));
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse, where + ": " + e.what());
    }
    r.asgp = parse_number<double>(cols[2], where);
    r.pre_words = parse_number<int>(cols[3], where);
    r.post_words = parse_number<int>(cols[4], where);
    rows.push_back(std::move(r));
  }
  if (!header) throw Error(ErrorCode::kParse, "gain table has no header");
  if (rows.empty()) throw Error(ErrorCode::kParse, "gain table has no rows");
  return rows;
}

std::vector<GainRecord> load_gain_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_gain_table(ss.str());
}

std::string serialize_gain_table(std::span<const GainRecord> rows) {
  std::string out = "participant,group,asgp,pre_words,post_words\n";
  for (const auto& r : rows) {
    out += r.participant + "," + std::string(to_string(r.group)) + "," +
           fmt("%.17g", r.asgp) + "," + std::to_string(r.pre_words) + "," +
           std::to_string(r.post_words) + "\n";
  }
  return out;
}

std::vector<GainRecord> gains_from_scores(std::span<const TestScores> scores,
                                          std::span<const ParticipantGroup> groups) {
  std::vector<GainRecord> out;
  for (const auto& g : groups) {
    const TestScores* pre = nullptr;
    const TestScores* post = nullptr;
    for (const auto& s : scores) {
      if (s.participant != g.participant) continue;
      (s.phase == Phase::kPre ? pre : post) = &s;
    }
    if (pre == nullptr || post == nullptr) continue;
    out.push_back({g.participant, g.group, asgp(*pre, *post), pre->words_accepted,
                   post->words_accepted});
  }
  return out;
}

bool Claim::pass() const {
  auto within = [&](double v) { return v >= lo && v <= hi; };
  return within(observed) || (alternate && within(*alternate));
}

bool StatsReport::all_pass() const {
  return std::all_of(claims.begin(), claims.end(), [](const Claim& c) { return c.pass(); });
}

const GroupComparison& StatsReport::comparison(std::string_view metric) const {
  for (const auto& c : comparisons) {
    if (c.metric == metric) return c;
  }
  throw Error(ErrorCode::kNotFound, "no comparison for '" + std::string(metric) + "'");
}

StatsReport replicate_study(std::span<const GainRecord> rows) {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> columns;
  for (const auto& r : rows) {
    auto pick = [&](const std::string& metric, double v) {
      auto& [control, treatment] = columns[metric];
      (r.group == Group::kControl ? control : treatment).push_back(v);
    };
    pick("asgp", r.asgp);
    pick("wg", r.wg());
    pick("pre_words", r.pre_words);
    pick("post_words", r.post_words);
  }

  StatsReport report;
  for (const char* metric : {"asgp", "wg", "pre_words", "post_words"}) {
    const auto& [control, treatment] = columns[metric];
    GroupComparison c;
    c.metric = metric;
    c.control = summarize<double>(control);
    c.treatment = summarize<double>(treatment);
    c.pooled = t_test_two_tailed(control, treatment, TTestVariant::kPooled);
    c.welch = t_test_two_tailed(control, treatment, TTestVariant::kWelch);
    report.comparisons.push_back(c);
  }

  auto band = [&](std::string name, double reported, double tol, double observed) {
    report.claims.push_back({std::move(name), reported, reported - tol, reported + tol,
                             observed, std::nullopt});
  };
  auto p_band = [&](std::string name, double reported, double lo, double hi,
                    const GroupComparison& c) {
    report.claims.push_back({std::move(name), reported, lo, hi, c.pooled.p, c.welch.p});
  };
  const auto& a = report.comparison("asgp");
  const auto& w = report.comparison("wg");
  band("control ASGP mean", -0.68, 0.01, a.control.mean);
  band("control ASGP sd", 2.77, 0.01, a.control.sd);
  band("treatment ASGP mean", 1.41, 0.01, a.treatment.mean);
  band("treatment ASGP sd", 1.72, 0.01, a.treatment.sd);
  p_band("ASGP t-test p", 0.08, 0.06, 0.09, a);
  band("control WG mean", 0.0, 0.01, w.control.mean);
  band("control WG sd", 0.71, 0.01, w.control.sd);
  band("treatment WG mean", 1.11, 0.01, w.treatment.mean);
  band("treatment WG sd", 1.54, 0.01, w.treatment.sd);
  p_band("WG t-test p", 0.07, 0.05, 0.09, w);
  p_band("pre-test word count p", 0.42, 0.30, 0.55, report.comparison("pre_words"));
  p_band("post-test word count p", 0.06, 0.04, 0.08, report.comparison("post_words"));

  report.notes = {
      "pre-test score p (0.25) not replicable: per-participant raw scores unpublished",
      "gender/ASGP correlations (0.65 control, 0.32 treatment) not replicable: "
      "per-participant gender unpublished",
      "treatment pre-test score/ASGP (0.11) and pre-test score/WG (0.25) correlations "
      "not replicable: raw pre-test scores unpublished",
      "word category/gain correlation (<= 0.27) not replicable: per-word results unpublished",
  };
  return report;
}

std::string format_report(const StatsReport& r) {
  std::ostringstream out;
  out << "metric      group      n   mean     sd\n";
  for (const auto& c : r.comparisons) {
    for (int g = 0; g < 2; ++g) {
      const auto& s = g == 0 ? c.control : c.treatment;
      char line[128];
      std::snprintf(line, sizeof line, "%-11s %-10s %-3zu %-8.2f %.2f\n", c.metric.c_str(),
                    g == 0 ? "control" : "treatment", s.n, s.mean, s.sd);
      out << line;
    }
  }
  out << "\ncomparison  variant  t        df      p\n";
  for (const auto& c : r.comparisons) {
    for (const auto* t : {&c.pooled, &c.welch}) {
      char line[128];
      std::snprintf(line, sizeof line, "%-11s %-8s %-8.4f %-7.3f %.4f\n", c.metric.c_str(),
                    std::string(to_string(t->variant)).c_str(), t->t, t->df, t->p);
      out << line;
    }
  }
  out << "\n";
  for (const auto& c : r.claims) {
    char line[256];
    if (c.alternate) {
      std::snprintf(line, sizeof line, "%s  %-24s reported %.2f band [%.2f, %.2f] pooled %.4f welch %.4f\n",
                    c.pass() ? "PASS" : "FAIL", c.name.c_str(), c.reported, c.lo, c.hi,
                    c.observed, *c.alternate);
    } else {
      std::snprintf(line, sizeof line, "%s  %-24s reported %.2f band [%.2f, %.2f] observed %.4f\n",
                    c.pass() ? "PASS" : "FAIL", c.name.c_str(), c.reported, c.lo, c.hi,
                    c.observed);
    }
    out << line;
  }
  for (const auto& n : r.notes) out << "note: " << n << "\n";
  return out.str();
}

std::string report_csv(const StatsReport& r) {
  std::ostringstream out;
  out << "metric,control_n,control_mean,control_sd,treatment_n,treatment_mean,treatment_sd,"
         "pooled_t,pooled_df,pooled_p,welch_t,welch_df,welch_p\n";
  for (const auto& c : r.comparisons) {
    out << c.metric << "," << c.control.n << "," << fmt("%.17g", c.control.mean) << ","
        << fmt("%.17g", c.control.sd) << "," << c.treatment.n << ","
        << fmt("%.17g", c.treatment.mean) << "," << fmt("%.17g", c.treatment.sd) << ","
        << fmt("%.17g", c.pooled.t) << "," << fmt("%.17g", c.pooled.df) << ","
        << fmt("%.17g", c.pooled.p) << "," << fmt("%.17g", c.welch.t) << ","
        << fmt("%.17g", c.welch.df) << "," << fmt("%.17g", c.welch.p) << "\n";
  }
  return out.str();
}

}  // namespace prontutor
