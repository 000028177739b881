#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "angio/phantom.hpp"

using namespace angio;

namespace {

// Vessel thickness along the sub-pixel column through image column x.
double column_thickness(const PhantomTruth& t, double x) {
  int i, j;
  t.cell_of({x, 0.0}, i, j);
  int cells = 0;
  for (int jj = 0; jj < t.mask.height(); ++jj) cells += t.mask(i, jj) != 0;
  return static_cast<double>(cells) / PhantomTruth::supersample;
}

}  // namespace

TEST(Phantom, TubeMaskHasItsWidth) {
  for (double w : {4.0, 9.0, 12.0}) {
    const auto [img, truth] = render_phantom(tube_phantom(w, 0.0), 1);
    EXPECT_NEAR(column_thickness(truth, 200.0), w, 0.5) << w;
    EXPECT_NEAR(truth.path_lengths.at(0), 300.0, 0.5);
  }
}

TEST(Phantom, ImageLevelsFollowTheSpec) {
  const auto spec = tube_phantom(10.0, 0.0);
  const auto [img, truth] = render_phantom(spec, 1);
  EXPECT_EQ(img.width(), 400);
  EXPECT_EQ(img.height(), 400);
  EXPECT_NEAR(img.at(200, 200), spec.vessel_level, 1.0);
  EXPECT_NEAR(img.at(200, 100), spec.background_level, 1e-6);
}

TEST(Phantom, StenosisNarrowsTheMask) {
  for (double r : {0.4, 0.6, 0.75}) {
    const auto [img, truth] = render_phantom(stenosis_phantom({{150.0, r}}), 1);
    ASSERT_EQ(truth.stenoses.size(), 1u);
    EXPECT_DOUBLE_EQ(truth.stenoses[0].degree, r);
    // The tube starts at x = 50, so arc length 150 sits at x = 200.
    EXPECT_NEAR(truth.stenoses[0].location.x, 200.0, 0.5);
    EXPECT_NEAR(column_thickness(truth, 200.0) / column_thickness(truth, 100.0), r, 0.05) << r;
    EXPECT_FALSE(truth.stenoses[0].span.empty());
    EXPECT_DOUBLE_EQ(truth.stenoses[0].distance_to({195.0, 200.0}), 0.0);
  }
}

TEST(Phantom, YHasOneJunctionAndThreePaths) {
  const auto [img, truth] = render_phantom(y_phantom(90.0), 1);
  ASSERT_EQ(truth.bifurcations.size(), 1u);
  EXPECT_NEAR(truth.bifurcations[0].x, 200.0, 1e-9);
  EXPECT_NEAR(truth.bifurcations[0].y, 210.0, 1e-9);
  ASSERT_EQ(truth.path_lengths.size(), 3u);
  EXPECT_NEAR(truth.path_lengths[0], 140.0, 0.5);
  EXPECT_NEAR(truth.path_lengths[1], 160.0, 0.5);
  EXPECT_NEAR(truth.path_lengths[2], 160.0, 0.5);
  // Arm 1 leans left, arm 2 right.
  EXPECT_TRUE(truth.inside_path({200.0 - 100.0 * std::sqrt(0.5), 210.0 - 100.0 * std::sqrt(0.5)}, 1));
  EXPECT_TRUE(truth.inside_path({200.0 + 100.0 * std::sqrt(0.5), 210.0 - 100.0 * std::sqrt(0.5)}, 2));
}

TEST(Phantom, SuiteIsLargeAndRenders) {
  const auto suite = standard_suite();
  EXPECT_GE(suite.size(), 20u);
  std::set<SuiteCategory> categories;
  for (const auto& e : suite) {
    categories.insert(e.category);
    const auto [img, truth] = render_phantom(e.spec, 3);
    EXPECT_TRUE(is_valid(img)) << e.spec.name;
    EXPECT_FALSE(truth.samples.empty()) << e.spec.name;
    EXPECT_EQ(static_cast<int>(truth.stenoses.size()), e.expected_stenoses) << e.spec.name;
    EXPECT_EQ(static_cast<int>(truth.bifurcations.size()), e.expected_bifurcations) << e.spec.name;
  }
  EXPECT_EQ(categories.size(), 9u);
}

TEST(Phantom, RenderingIsDeterministic) {
  auto spec = tube_phantom(8.0, 20.0);
  spec.noise_sigma = 8.0;
  const auto a = render_phantom(spec, 5).first, b = render_phantom(spec, 5).first, c = render_phantom(spec, 6).first;
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Phantom, SamplesLieInsideTheMask) {
  for (const auto& spec : {y_phantom(60.0), arc_phantom(40.0), ring_phantom(), stenosis_phantom({{150.0, 0.4}})}) {
    const auto [img, truth] = render_phantom(spec, 1);
    for (const auto& s : truth.samples) ASSERT_TRUE(truth.inside_path(s.pos, s.path)) << spec.name << " s=" << s.s;
  }
}

TEST(Phantom, BoundaryIsHalfAWidthAway) {
  for (const auto& spec : {tube_phantom(8.0, 30.0), arc_phantom(80.0, 10.0)}) {
    const auto [img, truth] = render_phantom(spec, 1);
    const double len = truth.path_lengths.at(0);
    for (const auto& s : truth.samples) {
      if (s.s < 20.0 || s.s > len - 20.0) continue;
      const Point2 n{-s.tangent.y, s.tangent.x};
      const double h = 0.5 * s.width;
      for (double side : {-1.0, 1.0}) {
        EXPECT_TRUE(truth.inside(s.pos + (side * (h - 0.5)) * n)) << spec.name << " s=" << s.s;
        EXPECT_FALSE(truth.inside(s.pos + (side * (h + 0.5)) * n)) << spec.name << " s=" << s.s;
      }
    }
  }
}

TEST(Phantom, RejectsPathsOffTheCanvas) {
  PhantomSpec s;
  s.name = "bad";
  s.paths.push_back(line_path({2, 2}, {100, 100}, 8.0));
  EXPECT_THROW(render_phantom(s, 1), Error);
  EXPECT_THROW(render_phantom(PhantomSpec{}, 1), Error);
}
