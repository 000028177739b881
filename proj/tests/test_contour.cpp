#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "angio/contour.hpp"
#include "angio/filters.hpp"
#include "angio/phantom.hpp"
#include "support.hpp"

using namespace angio;

namespace {

GrayImage disk_image(int size, Point2 c, double r, double in = 200.0, double out = 50.0) {
  GrayImage img(size, size, out);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      if (distance(Point2{double(x), double(y)}, c) <= r) img.at(x, y) = in;
  return img;
}

VesselMask box_mask(int w, int h, int x0, int y0, int x1, int y1) {
  VesselMask m(w, h);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) m.inside(x, y) = 1;
  return m;
}

double iou(const VesselMask& a, const VesselMask& b) {
  std::size_t inter = 0, uni = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      inter += a.at(x, y) && b.at(x, y);
      uni += a.at(x, y) || b.at(x, y);
    }
  return uni ? static_cast<double>(inter) / uni : 1.0;
}

VesselMask disk_mask(int size, Point2 c, double r) {
  VesselMask m(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) m.inside(x, y) = distance(Point2{double(x), double(y)}, c) <= r;
  return m;
}

}  // namespace

TEST(ChanVese, SegmentsBrightDisk) {
  const GrayImage img = disk_image(160, {80, 80}, 50);
  const auto res = chan_vese_run(img, CvParams{}, box_mask(160, 160, 70, 70, 90, 90));
  EXPECT_FALSE(res.degenerate);
  EXPECT_GE(iou(res.mask, disk_mask(160, {80, 80}, 50)), 0.95);
  EXPECT_NEAR(res.c_in, 200.0, 5.0);
  EXPECT_NEAR(res.c_out, 50.0, 5.0);
}

TEST(ChanVese, ConstantImageIsDegenerate) {
  const GrayImage img(64, 64, 120.0);
  bool degenerate = false;
  try {
    degenerate = chan_vese_run(img, CvParams{}, two_means_init(img)).degenerate;
  } catch (const Error& e) {
    degenerate = e.kind() == ErrorKind::Degenerate;
  }
  EXPECT_TRUE(degenerate);
}

TEST(ChanVese, EmptyOrFullInitThrows) {
  const GrayImage img = disk_image(40, {20, 20}, 8);
  EXPECT_THROW(chan_vese_run(img, CvParams{}, VesselMask(40, 40)), Error);
  EXPECT_THROW(chan_vese_run(img, CvParams{}, box_mask(40, 40, 0, 0, 39, 39)), Error);
}

TEST(ChanVese, TubeAreaMatchesTruth) {
  const auto& p = testsupport::prepared(tube_phantom(6.0, 0.0));
  std::size_t truth_cells = 0;
  for (auto v : p.truth.mask.data()) truth_cells += v != 0;
  const double sub = PhantomTruth::supersample;
  const double truth_area = truth_cells / (sub * sub);
  double area = 0.0;
  for (const auto& poly : p.ctx.contour.polygons) area += signed_area(poly.points);
  EXPECT_NEAR(area, truth_area, 0.1 * truth_area);
}

TEST(ChanVese, EnergyNeverIncreases) {
  for (const auto& spec : {tube_phantom(8.0, 30.0), y_phantom(60.0), stenosis_phantom({{150.0, 0.5}})}) {
    const auto& p = testsupport::prepared(spec);
    const auto& e = p.ctx.cv.energies;
    ASSERT_GE(e.size(), 2u) << spec.name;
    for (std::size_t i = 1; i < e.size(); ++i) EXPECT_LE(e[i], e[i - 1] + 1e-6 * std::abs(e[i - 1])) << spec.name << " " << i;
  }
  const GrayImage disk = disk_image(100, {50, 50}, 25);
  const auto res = chan_vese_run(disk, CvParams{}, box_mask(100, 100, 10, 10, 40, 40));
  for (std::size_t i = 1; i < res.energies.size(); ++i)
    EXPECT_LE(res.energies[i], res.energies[i - 1] + 1e-6 * std::abs(res.energies[i - 1]));
}

TEST(Contours, SinglePixelGivesOneSmallPolygon) {
  VesselMask m(20, 20);
  m.inside(10, 10) = 1;
  const auto c = extract_contours(m);
  ASSERT_EQ(c.polygons.size(), 1u);
  const auto& poly = c.polygons[0];
  EXPECT_TRUE(poly.outer);
  EXPECT_EQ(poly.points.front(), poly.points.back());
  for (const auto& q : poly.points) EXPECT_LE(distance(q, {10, 10}), 0.5 * std::sqrt(2.0) + 1e-9);
  EXPECT_TRUE(contour_contains(c, {10, 10}));
  EXPECT_FALSE(contour_contains(c, {11, 10}));
}

TEST(Contours, RectangleArea) {
  const auto c = extract_contours(box_mask(30, 20, 5, 5, 14, 8));
  ASSERT_EQ(c.polygons.size(), 1u);
  EXPECT_NEAR(signed_area(c.polygons[0].points), 40.0, 1.0);
}

TEST(Contours, DiskPerimeterFromField) {
  const GrayImage field = gaussian_blur(disk_image(64, {32, 32}, 20), 1.0);
  const auto c = extract_contours(disk_mask(64, {32, 32}, 20), &field);
  ASSERT_EQ(c.polygons.size(), 1u);
  const double circumference = 2 * std::numbers::pi * 20;
  EXPECT_NEAR(perimeter(c.polygons[0].points), circumference, 0.03 * circumference);
}

TEST(Contours, RasterizeInvertsExtraction) {
  for (const auto& spec : {tube_phantom(8.0, 45.0), y_phantom(90.0), ring_phantom()}) {
    const auto& p = testsupport::prepared(spec);
    const auto back = rasterize(extract_contours(p.ctx.cv.mask), p.image.width(), p.image.height());
    EXPECT_GE(iou(back, p.ctx.cv.mask), 0.99) << spec.name;
  }
}

TEST(Contours, OuterAndHoleOrientation) {
  VesselMask m = box_mask(30, 30, 5, 5, 24, 24);
  for (int y = 12; y <= 17; ++y)
    for (int x = 12; x <= 17; ++x) m.inside(x, y) = 0;
  const auto c = extract_contours(m);
  ASSERT_EQ(c.polygons.size(), 2u);
  int outer = 0, hole = 0;
  for (const auto& poly : c.polygons) {
    const double a = signed_area(poly.points);
    if (poly.outer) {
      ++outer;
      EXPECT_GT(a, 0.0);
    } else {
      ++hole;
      EXPECT_LT(a, 0.0);
    }
  }
  EXPECT_EQ(outer, 1);
  EXPECT_EQ(hole, 1);
  EXPECT_FALSE(contour_contains(c, {15, 15}));
  EXPECT_TRUE(contour_contains(c, {7, 7}));
}

TEST(RayHits, UnitSquare) {
  VesselContour c;
  c.polygons.push_back({true, {{-0.5, -0.5}, {0.5, -0.5}, {0.5, 0.5}, {-0.5, 0.5}, {-0.5, -0.5}}});
  const auto hits = ray_contour_hits(c, {0, 0}, Direction2::from_vector({1, 0}));
  ASSERT_EQ(hits.size(), 2u);
  EXPECT_NEAR(hits[0].t, -0.5, 1e-12);
  EXPECT_NEAR(hits[1].t, 0.5, 1e-12);
  RayHit neg, pos;
  EXPECT_TRUE(nearest_pair(hits, neg, pos));
  EXPECT_TRUE(ray_contour_hits(c, {0, 3}, Direction2::from_vector({1, 0})).empty());
}

TEST(RayHits, ClosedContoursGiveEvenCounts) {
  const auto c = extract_contours(disk_mask(64, {32, 32}, 15));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> pos(0.0, 63.0), ang(0.0, 2 * std::numbers::pi);
  for (int i = 0; i < 200; ++i) {
    const double a = ang(rng);
    const auto hits = ray_contour_hits(c, {pos(rng), pos(rng)}, Direction2::from_vector({std::cos(a), std::sin(a)}));
    EXPECT_EQ(hits.size() % 2, 0u);
  }
}

TEST(RayHits, TubeNormalSpansWidth) {
  const auto& p = testsupport::prepared(tube_phantom(8.0, 0.0));
  for (double x : {120.0, 200.0, 280.0}) {
    const auto hits = ray_contour_hits(p.ctx.contour, {x, 200.0}, Direction2::from_vector({0, 1}));
    RayHit neg, pos;
    ASSERT_TRUE(nearest_pair(hits, neg, pos));
    EXPECT_NEAR(pos.t - neg.t, 8.0, 0.5) << x;
  }
}
