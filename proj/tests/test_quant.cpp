#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "angio/quant.hpp"
#include "angio/report.hpp"
#include "support.hpp"

using namespace angio;

namespace {

std::vector<TrackPoint> line_points(Point2 a, Point2 dir, int n, double step = 5.0) {
  std::vector<TrackPoint> pts;
  const Direction2 d = Direction2::from_vector(dir);
  for (int i = 0; i < n; ++i) {
    TrackPoint t;
    t.pos = t.raw_pos = a + (i * step) * d.vec();
    t.dir = d;
    t.index = i;
    pts.push_back(t);
  }
  return pts;
}

VesselContour rectangle(double x0, double y0, double x1, double y1) {
  VesselContour c;
  c.polygons.push_back({true, {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}}});
  return c;
}

VesselSegment with_degrees(std::vector<std::optional<double>> degrees) {
  VesselSegment s;
  s.degrees = std::move(degrees);
  for (std::size_t i = 0; i < s.degrees.size(); ++i) {
    TrackPoint t;
    t.pos = {double(i), 0.0};
    s.points.push_back(t);
  }
  return s;
}

AutoAnalysis auto_of(const PhantomSpec& spec) {
  return run_auto(testsupport::prepared(spec).ctx, Config{});
}

double min_degree(const AutoAnalysis& a) {
  double m = 1e9;
  for (const auto& f : a.findings) m = std::min(m, f.min_degree);
  return m;
}

}  // namespace

TEST(Diameter, RectangleCrossSectionIsExact) {
  const auto c = rectangle(0, 195.5, 100, 204.5);
  const auto pts = line_points({10, 200}, {1, 0}, 17);
  for (std::size_t k = 0; k < 16; ++k) {
    const auto d = measure_diameter(pts, k, c);
    ASSERT_TRUE(d) << k;
    EXPECT_NEAR(*d, 9.0, 1e-9);
  }
  // The last point sits 10 px from the cap; a point 2 px from it is inside the cap zone.
  auto tail = line_points({88, 200}, {1, 0}, 3, 5.0);
  EXPECT_FALSE(measure_diameter(tail, 2, c));
}

TEST(Diameter, RejectsBadArguments) {
  const auto c = rectangle(0, 0, 10, 10);
  EXPECT_THROW(measure_diameter(line_points({5, 5}, {1, 0}, 1), 0, c), Error);
  EXPECT_THROW(measure_diameter(line_points({5, 5}, {1, 0}, 3), 3, c), Error);
}

TEST(Diameter, PhantomTubesMeasureTheirWidth) {
  struct Case {
    double width, angle;
  };
  for (const auto [w, a] : {Case{9.0, 0.0}, Case{6.0, 45.0}, Case{10.0, 75.0}}) {
    const auto& p = testsupport::prepared(tube_phantom(w, a));
    const Direction2 dir = Direction2::from_vector({std::cos(deg2rad(a)), -std::sin(deg2rad(a))});  // angles count upwards
    const auto pts = line_points(Point2{200, 200} - 100.0 * dir.vec(), dir.vec(), 41);
    const auto d = measure_diameters(pts, p.ctx.contour, 4.0);
    for (std::size_t k = 0; k < d.size(); ++k) {
      ASSERT_TRUE(d[k]) << w << "@" << a << " k=" << k;
      EXPECT_NEAR(*d[k], w, 0.5) << w << "@" << a << " k=" << k;
    }
  }
}

TEST(Diameter, PointsPastTheCapAreUnmeasured) {
  const auto& p = testsupport::prepared(tube_phantom(8.0, 0.0));
  // The tube spans x in [50, 350]; run the points past its right end.
  const auto pts = line_points({330, 200}, {1, 0}, 8);
  const auto d = measure_diameters(pts, p.ctx.contour, 4.0);
  EXPECT_TRUE(d[0]);
  for (std::size_t k = 5; k < d.size(); ++k) EXPECT_FALSE(d[k]) << k;
}

TEST(Degree, IsDiameterOverMean) {
  const auto s = stenotic_degree({4.0, 8.0, std::nullopt, 12.0}, 8.0);
  EXPECT_DOUBLE_EQ(*s[0], 0.5);
  EXPECT_DOUBLE_EQ(*s[1], 1.0);
  EXPECT_FALSE(s[2]);
  EXPECT_DOUBLE_EQ(*s[3], 1.5);
  EXPECT_THROW(stenotic_degree({1.0}, 0.0), Error);
}

TEST(Degree, DiscriminationIsStrict) {
  EXPECT_EQ(discriminate(std::vector<double>{0.5, 1.0, 0.8, 0.79}, 0.8), (std::vector<int>{1, 0, 0, 1}));
  EXPECT_EQ(discriminate(std::vector<std::optional<double>>{std::nullopt, 0.1}, 0.8), (std::vector<int>{0, 1}));
}

TEST(Findings, OneDipIsOneFinding) {
  std::vector<std::optional<double>> deg(12, 1.0);
  for (int i = 3; i <= 8; ++i) deg[i] = 0.5;
  deg[5] = 0.4;
  const auto f = find_stenoses(with_degrees(deg), Config{});
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0].range_first, 3);
  EXPECT_EQ(f[0].range_last, 8);
  EXPECT_DOUBLE_EQ(f[0].min_degree, 0.4);
  EXPECT_EQ(f[0].location, (Point2{5, 0}));
  EXPECT_NEAR(f[0].mean_degree, (5 * 0.5 + 0.4) / 6, 1e-12);
}

TEST(Findings, SeparateDipsAndShortRuns) {
  std::vector<std::optional<double>> deg(20, 1.0);
  deg[2] = deg[3] = 0.6;
  deg[10] = 0.5;
  deg[11] = std::nullopt;  // unmeasured points do not break a run
  deg[12] = 0.5;
  deg[17] = 0.3;  // a single narrowed point is not a finding
  const auto f = find_stenoses(with_degrees(deg), Config{});
  ASSERT_EQ(f.size(), 2u);
  EXPECT_EQ(f[0].range_first, 2);
  EXPECT_EQ(f[0].range_last, 3);
  EXPECT_EQ(f[1].range_first, 10);
  EXPECT_EQ(f[1].range_last, 12);
}

TEST(Quantify, ScaleEquivariance) {
  const auto pts = line_points({20, 100}, {1, 1}, 12, 4.0);
  VesselContour c;
  c.polygons.push_back({true, {{0, 90}, {40, 80}, {120, 150}, {60, 170}, {10, 120}, {0, 90}}});
  VesselContour c2 = c;
  for (auto& q : c2.polygons[0].points) q = 2.0 * q;
  auto pts2 = pts;
  for (auto& t : pts2) t.pos = t.raw_pos = 2.0 * t.pos;
  const Config cfg;
  const auto a = quantify_segment(0, 0, 0, 11, pts, c, cfg), b = quantify_segment(0, 0, 0, 11, pts2, c2, cfg);
  ASSERT_EQ(a.diameters.size(), b.diameters.size());
  for (std::size_t k = 0; k < a.diameters.size(); ++k) {
    ASSERT_EQ(a.diameters[k].has_value(), b.diameters[k].has_value()) << k;
    if (!a.diameters[k]) continue;
    EXPECT_NEAR(*b.diameters[k], 2.0 * *a.diameters[k], 1e-9);
    EXPECT_NEAR(*b.degrees[k], *a.degrees[k], 1e-12);
  }
}

TEST(Quantify, DegreesAverageToOne) {
  for (const auto& spec : {stenosis_phantom({{150.0, 0.5}}), y_phantom(90.0), arc_phantom(80.0)}) {
    for (const auto& s : auto_of(spec).segments) {
      if (s.measured_count() == 0) continue;
      double sum = 0.0;
      for (const auto& d : s.degrees)
        if (d) sum += *d;
      EXPECT_NEAR(sum / s.measured_count(), 1.0, 1e-9) << spec.name << " segment " << s.id;
    }
  }
}

TEST(Quantify, LesionDegreeTracksResidual) {
  const auto spec = stenosis_phantom({{150.0, 0.6}});
  const auto a = auto_of(spec);
  ASSERT_EQ(a.findings.size(), 1u);
  EXPECT_NEAR(a.findings[0].min_degree, 0.6, 0.05);
  EXPECT_LE(testsupport::prepared(spec).truth.stenoses.at(0).distance_to(a.findings[0].location), 5.0);
}

TEST(Quantify, TighterLesionGivesLowerDegree) {
  double prev = 0.0;
  for (double r : {0.4, 0.5, 0.6, 0.75}) {
    const double m = min_degree(auto_of(stenosis_phantom({{150.0, r}})));
    EXPECT_GT(m, prev) << r;
    prev = m;
  }
}
