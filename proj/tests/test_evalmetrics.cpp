#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "angio/evalmetrics.hpp"

using namespace angio;

namespace {

StenosisFinding finding_at(Point2 p) {
  StenosisFinding f;
  f.location = p;
  return f;
}

TruthStenosis truth_at(Point2 p, double half_extent = 0.0) {
  TruthStenosis t;
  t.location = p;
  for (double dx = -half_extent; dx <= half_extent; dx += 0.25) t.span.push_back({p.x + dx, p.y});
  return t;
}

}  // namespace

TEST(Match, NearestPairsWithinRadius) {
  const std::vector<TruthStenosis> truths{truth_at({100, 100}), truth_at({300, 100})};
  const std::vector<StenosisFinding> findings{finding_at({103, 104}), finding_at({101, 100}), finding_at({200, 200})};
  const auto o = match_findings(findings, truths, 10.0);
  EXPECT_EQ(o.tp, 1);
  EXPECT_EQ(o.fp, 2);
  EXPECT_EQ(o.fn, 1);
  ASSERT_EQ(o.matches.size(), 1u);
  EXPECT_EQ(o.matches[0].finding, 1);
  EXPECT_EQ(o.matches[0].truth, 0);
  EXPECT_DOUBLE_EQ(o.matches[0].distance, 1.0);
}

TEST(Match, DistanceIsToTheNarrowedStretch) {
  const std::vector<TruthStenosis> truths{truth_at({200, 200}, 10.0)};
  EXPECT_EQ(match_findings({finding_at({192, 203})}, truths, 5.0).tp, 1);
  EXPECT_EQ(match_findings({finding_at({185, 200})}, truths, 5.0).tp, 1);
  EXPECT_EQ(match_findings({finding_at({180, 200})}, truths, 5.0).tp, 0);
}

TEST(Match, BoundaryDistanceCounts) {
  EXPECT_EQ(match_findings({finding_at({5, 0})}, {truth_at({0, 0})}, 5.0).tp, 1);
  EXPECT_THROW(match_findings({}, {}, 0.0), Error);
}

TEST(Match, EachSideIsUsedOnce) {
  const std::vector<TruthStenosis> truths{truth_at({0, 0}), truth_at({6, 0})};
  const std::vector<StenosisFinding> findings{finding_at({3.5, 0})};
  const auto o = match_findings(findings, truths, 10.0);
  EXPECT_EQ(o.tp, 1);
  EXPECT_EQ(o.fn, 1);
  EXPECT_EQ(o.fp, 0);
  EXPECT_EQ(o.matches[0].truth, 1);
}

TEST(Match, InvariantUnderPermutation) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<TruthStenosis> truths;
    std::vector<StenosisFinding> findings;
    for (int i = 0; i < 6; ++i) truths.push_back(truth_at({u(rng), u(rng)}));
    for (int i = 0; i < 8; ++i) findings.push_back(finding_at({u(rng), u(rng)}));
    const auto a = match_findings(findings, truths, 15.0);
    std::shuffle(truths.begin(), truths.end(), rng);
    std::shuffle(findings.begin(), findings.end(), rng);
    const auto b = match_findings(findings, truths, 15.0);
    EXPECT_EQ(a.tp, b.tp);
    EXPECT_EQ(a.fp, b.fp);
    EXPECT_EQ(a.fn, b.fn);
    EXPECT_EQ(a.tp + a.fn, 6);
    EXPECT_EQ(a.tp + a.fp, 8);
  }
}

TEST(Scores, WorkedExamples) {
  const auto s = sen_pre_f1(3, 1, 0);
  ASSERT_TRUE(s.defined());
  EXPECT_DOUBLE_EQ(*s.sen, 0.75);
  EXPECT_DOUBLE_EQ(*s.pre, 1.0);
  EXPECT_NEAR(*s.f1, 6.0 / 7.0, 1e-12);
  EXPECT_NEAR(*f1_score(0.757, 0.821), 0.788, 0.001);
}

TEST(Scores, UndefinedCases) {
  EXPECT_FALSE(sen_pre_f1(0, 0, 0).defined());
  EXPECT_FALSE(sen_pre_f1(0, 0, 2).sen);
  EXPECT_DOUBLE_EQ(*sen_pre_f1(0, 0, 2).pre, 0.0);
  EXPECT_FALSE(f1_score(0.0, 0.0));
  EXPECT_THROW(sen_pre_f1(-1, 0, 0), Error);
}

TEST(Scores, F1IsSymmetricAndBounded) {
  for (double a = 0.05; a <= 1.0; a += 0.05) {
    for (double b = 0.05; b <= 1.0; b += 0.05) {
      const double f = *f1_score(a, b);
      EXPECT_DOUBLE_EQ(f, *f1_score(b, a));
      EXPECT_GE(f, std::min(a, b) - 1e-12);
      EXPECT_LE(f, std::max(a, b) + 1e-12);
    }
  }
}

TEST(RelativeError, WorkedExample) {
  const auto s = relative_error({9.0, 11.0, 10.0, 12.0}, {10.0, 10.0, 10.0, 10.0});
  EXPECT_DOUBLE_EQ(s.min, 0.0);
  EXPECT_DOUBLE_EQ(s.max, 0.2);
  EXPECT_NEAR(s.mean, 0.1, 1e-12);
  EXPECT_NEAR(s.std, std::sqrt(0.005), 1e-12);
}

TEST(RelativeError, RejectsBadInput) {
  EXPECT_THROW(relative_error({1.0}, {1.0, 2.0}), Error);
  EXPECT_THROW(relative_error({1.0}, {0.0}), Error);
}

TEST(RelativeError, ScaleInvariant) {
  const std::vector<double> est{3.1, 5.9, 8.4}, real{3.0, 6.0, 8.0};
  const auto a = relative_error(est, real);
  std::vector<double> est2, real2;
  for (double v : est) est2.push_back(7.5 * v);
  for (double v : real) real2.push_back(7.5 * v);
  const auto b = relative_error(est2, real2);
  EXPECT_NEAR(a.mean, b.mean, 1e-12);
  EXPECT_NEAR(a.max, b.max, 1e-12);
  EXPECT_NEAR(a.std, b.std, 1e-12);
}

TEST(RelativeError, TableListsEveryRow) {
  const std::string t = format_re_table({{"tube_w4", re_stats({0.1, 0.2})}, {"arc", re_stats({0.05})}});
  EXPECT_NE(t.find("tube_w4"), std::string::npos);
  EXPECT_NE(t.find("arc"), std::string::npos);
  EXPECT_EQ(std::count(t.begin(), t.end(), '\n'), 3);
}
