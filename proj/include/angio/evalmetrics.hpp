#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"

#include "angio/core.hpp"
#include "angio/phantom.hpp"
#include "angio/quant.hpp"

namespace angio {

struct FindingMatch {
  int finding = 0;  // index into the findings list
  int truth = 0;    // index into the truths list
  double distance = 0.0;
};

struct DetectionOutcome {
  int tp = 0;
  int fn = 0;
  int fp = 0;
  std::vector<FindingMatch> matches;
};

/// Greedy nearest-pair matching of findings to true stenoses. A finding's
/// distance to a stenosis is measured to the nearest point of its narrowed
/// centerline stretch: over a lesion with a flat bottom the minimum-degree
/// point can sit anywhere along it. Candidate pairs within `radius` are taken
/// in order of distance, then finding location, then truth location
/// (row-major), so the counts do not depend on the input order.
inline DetectionOutcome match_findings(const std::vector<StenosisFinding>& findings,
                                       const std::vector<TruthStenosis>& truths, double radius) {
  if (!(radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "matching radius must be positive");
  auto key = [](Point2 p) { return std::make_tuple(p.y, p.x); };
  std::vector<FindingMatch> candidates;
  for (std::size_t i = 0; i < findings.size(); ++i) {
    for (std::size_t j = 0; j < truths.size(); ++j) {
      const double d = truths[j].distance_to(findings[i].location);
      if (d <= radius) candidates.push_back({static_cast<int>(i), static_cast<int>(j), d});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [&](const FindingMatch& a, const FindingMatch& b) {
    return std::make_tuple(a.distance, key(findings[a.finding].location), key(truths[a.truth].location)) <
           std::make_tuple(b.distance, key(findings[b.finding].location), key(truths[b.truth].location));
  });
  DetectionOutcome out;
  std::vector<bool> finding_used(findings.size(), false), truth_used(truths.size(), false);
  for (const auto& c : candidates) {
    if (finding_used[c.finding] || truth_used[c.truth]) continue;
    finding_used[c.finding] = truth_used[c.truth] = true;
    out.matches.push_back(c);
  }
  out.tp = static_cast<int>(out.matches.size());
  out.fp = static_cast<int>(findings.size()) - out.tp;
  out.fn = static_cast<int>(truths.size()) - out.tp;
  return out;
}

/// Ratios are empty when their denominator is zero.
struct DetectionScores {
  std::optional<double> sen;
  std::optional<double> pre;
  std::optional<double> f1;
  bool defined() const { return sen && pre && f1; }
};

inline std::optional<double> f1_score(double sen, double pre) {
  if (!(sen + pre > 0.0)) return std::nullopt;
  return 2.0 * pre * sen / (pre + sen);
}

inline DetectionScores sen_pre_f1(int tp, int fn, int fp) {
  if (tp < 0 || fn < 0 || fp < 0) throw Error(ErrorKind::InvalidArgument, "counts must be non-negative");
  DetectionScores s;
  if (tp + fn > 0) s.sen = static_cast<double>(tp) / (tp + fn);
  if (tp + fp > 0) s.pre = static_cast<double>(tp) / (tp + fp);
  if (s.sen && s.pre) s.f1 = f1_score(*s.sen, *s.pre);
  return s;
}

inline DetectionScores sen_pre_f1(const DetectionOutcome& o) { return sen_pre_f1(o.tp, o.fn, o.fp); }

struct REStats {
  std::vector<double> values;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

inline REStats re_stats(std::vector<double> values) {
  REStats s;
  s.values = std::move(values);
  if (s.values.empty()) return s;
  const auto [lo, hi] = std::minmax_element(s.values.begin(), s.values.end());
  s.min = *lo;
  s.max = *hi;
  double sum = 0.0;
  for (double v : s.values) sum += v;
  s.mean = sum / static_cast<double>(s.values.size());
  double ss = 0.0;
  for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(s.values.size()));
  return s;
}

inline REStats relative_error(const std::vector<double>& estimated, const std::vector<double>& real) {
  if (estimated.size() != real.size()) throw Error(ErrorKind::InvalidArgument, "diameter lists differ in length");
  std::vector<double> re(real.size());
  for (std::size_t i = 0; i < real.size(); ++i) {
    if (!(real[i] > 0.0)) throw Error(ErrorKind::InvalidArgument, "real diameters must be positive");
    re[i] = std::abs(estimated[i] - real[i]) / real[i];
  }
  return re_stats(std::move(re));
}

/// Measured diameters of a segment paired with the true width at the nearest
/// phantom centerline sample; unmeasured points are skipped.
inline REStats segment_relative_error(const VesselSegment& segment, const PhantomTruth& truth) {
  std::vector<double> est, real;
  for (std::size_t i = 0; i < segment.points.size(); ++i) {
    if (!segment.diameters[i]) continue;
    est.push_back(*segment.diameters[i]);
    real.push_back(truth.nearest_sample(segment.points[i].pos).width);
  }
  return relative_error(est, real);
}

inline nlohmann::json to_json(const REStats& s) {
  return {{"count", s.values.size()}, {"min", s.min}, {"max", s.max}, {"mean", s.mean}, {"std", s.std}};
}

inline nlohmann::json to_json(const DetectionOutcome& o) {
  nlohmann::json matches = nlohmann::json::array();
  for (const auto& m : o.matches) matches.push_back({{"finding", m.finding}, {"truth", m.truth}, {"distance", m.distance}});
  return {{"tp", o.tp}, {"fn", o.fn}, {"fp", o.fp}, {"matches", matches}};
}

inline nlohmann::json to_json(const DetectionScores& s) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"sen", opt(s.sen)}, {"pre", opt(s.pre)}, {"f1", opt(s.f1)}, {"defined", s.defined()}};
}

/// Aligned text table with one min/max/mean/std row per labelled entry.
inline std::string format_re_table(const std::vector<std::pair<std::string, REStats>>& rows) {
  std::size_t label_width = 5;
  for (const auto& [label, _] : rows) label_width = std::max(label_width, label.size());
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-*s %8s %8s %8s %8s %6s\n", static_cast<int>(label_width), "name", "min", "max",
                "mean", "std", "n");
  out += buf;
  for (const auto& [label, s] : rows) {
    std::snprintf(buf, sizeof buf, "%-*s %8.4f %8.4f %8.4f %8.4f %6zu\n", static_cast<int>(label_width), label.c_str(),
                  s.min, s.max, s.mean, s.std, s.values.size());
    out += buf;
  }
  return out;
}

}  // namespace angio
