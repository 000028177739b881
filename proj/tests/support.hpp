#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "angio/core.hpp"
#include "angio/phantom.hpp"
#include "angio/pipeline.hpp"
#include "angio/tracker.hpp"

namespace testsupport {

using angio::GrayImage;
using angio::Point2;

// ---------------------------------------------------------------------------
// Brute-force ridge oracle. Derivatives come from a full 2-D correlation
// window per pixel (no separable passes, no shared kernel code), eigenvalues
// from the quadratic formula, then both ridge conditions are checked for
// every pixel cell.

struct Taps {
  int radius = 0;
  std::vector<double> g, d1, d2;
};

inline Taps build_taps(double sigma) {
  Taps t;
  t.radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  const int n = 2 * t.radius + 1;
  t.g.resize(n);
  t.d1.resize(n);
  t.d2.resize(n);
  double gsum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = i - t.radius;
    t.g[i] = std::exp(-x * x / (2.0 * sigma * sigma));
    gsum += t.g[i];
  }
  for (auto& v : t.g) v /= gsum;
  // First derivative: odd taps scaled so that a unit ramp gives slope 1.
  double m1 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = i - t.radius;
    t.d1[i] = x * t.g[i] / (sigma * sigma);
    m1 += x * t.d1[i];
  }
  for (auto& v : t.d1) v /= m1;
  // Second derivative: zero-sum taps scaled so that x^2 gives curvature 2.
  double mean = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = i - t.radius;
    t.d2[i] = (x * x - sigma * sigma) / std::pow(sigma, 4) * t.g[i];
    mean += t.d2[i];
  }
  mean /= n;
  double m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = i - t.radius;
    t.d2[i] -= mean;
    m2 += x * x * t.d2[i];
  }
  for (auto& v : t.d2) v *= 2.0 / m2;
  return t;
}

inline int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - 1 - i;
  return i;
}

struct PixelDerivatives {
  double gx = 0, gy = 0, hxx = 0, hxy = 0, hyy = 0;
};

inline PixelDerivatives derivatives_at(const GrayImage& img, const Taps& t, int x, int y) {
  PixelDerivatives d;
  const int r = t.radius;
  for (int j = -r; j <= r; ++j) {
    for (int i = -r; i <= r; ++i) {
      const double v = img.data()[static_cast<std::size_t>(reflect(y + j, img.height())) * img.width() +
                                  reflect(x + i, img.width())];
      const double gi = t.g[i + r], gj = t.g[j + r];
      d.gx += v * t.d1[i + r] * gj;
      d.gy += v * gi * t.d1[j + r];
      d.hxx += v * t.d2[i + r] * gj;
      d.hxy += v * t.d1[i + r] * t.d1[j + r];
      d.hyy += v * gi * t.d2[j + r];
    }
  }
  return d;
}

struct OracleField {
  int w = 0, h = 0;
  std::vector<double> gx, gy, lmax, lmin;
};

inline OracleField oracle_field(const GrayImage& img, double sigma) {
  const Taps t = build_taps(sigma);
  OracleField f;
  f.w = img.width();
  f.h = img.height();
  const std::size_t n = img.size();
  f.gx.resize(n);
  f.gy.resize(n);
  f.lmax.resize(n);
  f.lmin.resize(n);
  const double s2 = sigma * sigma;
  for (int y = 0; y < f.h; ++y) {
    for (int x = 0; x < f.w; ++x) {
      const auto d = derivatives_at(img, t, x, y);
      const std::size_t k = static_cast<std::size_t>(y) * f.w + x;
      f.gx[k] = std::abs(d.gx) < 1e-9 ? 0.0 : d.gx;
      f.gy[k] = std::abs(d.gy) < 1e-9 ? 0.0 : d.gy;
      const double a = s2 * d.hxx, b = s2 * d.hxy, c = s2 * d.hyy;
      const double root = std::sqrt((a - c) * (a - c) / 4.0 + b * b);
      f.lmax[k] = (a + c) / 2.0 + root;
      f.lmin[k] = (a + c) / 2.0 - root;
    }
  }
  return f;
}

inline std::set<std::pair<int, int>> oracle_ridges(const GrayImage& img, double sigma, double tol) {
  const OracleField f = oracle_field(img, sigma);
  auto k = [&](int x, int y) { return static_cast<std::size_t>(y) * f.w + x; };
  auto flips = [&](std::size_t a, std::size_t b) {
    const bool za = f.gx[a] == 0.0 && f.gy[a] == 0.0, zb = f.gx[b] == 0.0 && f.gy[b] == 0.0;
    if (za && zb) return false;
    return f.gx[a] * f.gx[b] + f.gy[a] * f.gy[b] <= 0.0;
  };
  std::set<std::pair<int, int>> out;
  for (int y = 0; y + 1 < f.h; ++y) {
    for (int x = 0; x + 1 < f.w; ++x) {
      if (!flips(k(x, y), k(x + 1, y + 1)) && !flips(k(x + 1, y), k(x, y + 1))) continue;
      bool concave = true;
      for (auto c : {k(x, y), k(x + 1, y), k(x, y + 1), k(x + 1, y + 1)}) {
        concave = concave && f.lmax[c] < tol && f.lmin[c] < -tol;
      }
      if (concave) out.insert({x, y});
    }
  }
  return out;
}

inline std::set<std::pair<int, int>> as_set(const angio::RidgeSet& r) {
  std::set<std::pair<int, int>> out;
  for (const auto& p : r.points) out.insert({static_cast<int>(p.x), static_cast<int>(p.y)});
  return out;
}

/// Symmetric difference size of two ridge sets.
inline std::size_t ridge_discrepancies(const std::set<std::pair<int, int>>& a, const std::set<std::pair<int, int>>& b) {
  std::vector<std::pair<int, int>> diff;
  std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(diff));
  return diff.size();
}

// ---------------------------------------------------------------------------
// Direct-summation total variation (forward differences, zero past the edge).

inline double tv_direct(const GrayImage& img) {
  double tv = 0.0;
  const int w = img.width(), h = img.height();
  const auto& d = img.data();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = d[static_cast<std::size_t>(y) * w + x];
      const double dx = x + 1 < w ? d[static_cast<std::size_t>(y) * w + x + 1] - v : 0.0;
      const double dy = y + 1 < h ? d[static_cast<std::size_t>(y + 1) * w + x] - v : 0.0;
      tv += std::sqrt(dx * dx + dy * dy);
    }
  }
  return tv;
}

// ---------------------------------------------------------------------------
// Phantom oracles

/// Fraction of true centerline arc length lying within reach of the tracked
/// polylines. Reach is half the local width plus one pixel, at least 3 px.
inline double centerline_coverage(const angio::PhantomTruth& truth, const std::vector<angio::CenterlineTrack>& tracks) {
  std::vector<std::pair<Point2, Point2>> edges;
  for (const auto& t : tracks) {
    for (std::size_t i = 0; i + 1 < t.points.size(); ++i) edges.push_back({t.points[i].pos, t.points[i + 1].pos});
    if (t.points.size() == 1) edges.push_back({t.points[0].pos, t.points[0].pos});
  }
  auto seg_dist = [](Point2 p, Point2 a, Point2 b) {
    const Point2 ab = b - a;
    const double l2 = angio::dot(ab, ab);
    const double u = l2 > 0 ? std::clamp(angio::dot(p - a, ab) / l2, 0.0, 1.0) : 0.0;
    return angio::distance(p, a + u * ab);
  };
  std::size_t covered = 0;
  for (const auto& s : truth.samples) {
    const double reach = std::max(3.0, 0.5 * s.width + 1.0);
    for (const auto& [a, b] : edges) {
      if (seg_dist(s.pos, a, b) <= reach) {
        ++covered;
        break;
      }
    }
  }
  return truth.samples.empty() ? 0.0 : static_cast<double>(covered) / truth.samples.size();
}

/// Fraction of points inside the union of the listed truth paths.
inline double in_paths_fraction(const angio::PhantomTruth& truth, const std::vector<angio::TrackPoint>& pts,
                                const std::vector<int>& paths) {
  if (pts.empty()) return 0.0;
  std::size_t in = 0;
  for (const auto& p : pts) {
    bool ok = false;
    for (int q : paths) ok = ok || truth.inside_path(p.pos, q);
    in += ok;
  }
  return static_cast<double>(in) / pts.size();
}

inline double polyline_length(const std::vector<angio::TrackPoint>& pts) {
  double l = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) l += angio::distance(pts[i].pos, pts[i + 1].pos);
  return l;
}

/// Which truth path the majority of the points fall in (-1 if none).
inline int dominant_path(const angio::PhantomTruth& truth, const std::vector<angio::TrackPoint>& pts) {
  std::map<int, int> votes;
  for (const auto& p : pts) votes[truth.nearest_sample(p.pos).path]++;
  int best = -1, best_n = 0;
  for (auto [path, n] : votes)
    if (n > best_n) {
      best = path;
      best_n = n;
    }
  return best;
}

/// Arc-length stretch of a truth path spanned by a run of points: both ends
/// are projected onto the path they mostly follow.
struct PathExtent {
  int path = -1;
  double covered = 0.0;
  double length = 0.0;
  double relative_error() const { return length > 0 ? std::abs(covered - length) / length : 1.0; }
};

inline PathExtent path_extent(const angio::PhantomTruth& truth, const std::vector<angio::TrackPoint>& pts) {
  PathExtent e;
  e.path = dominant_path(truth, pts);
  if (e.path < 0 || pts.empty()) return e;
  const double s0 = truth.nearest_sample(pts.front().pos, e.path).s;
  const double s1 = truth.nearest_sample(pts.back().pos, e.path).s;
  e.covered = std::abs(s1 - s0);
  e.length = truth.path_lengths[static_cast<std::size_t>(e.path)];
  return e;
}

/// Point on a Y phantom arm at distance `along` from the junction.
inline Point2 y_arm_point(double separation_deg, int arm, double along, double stem = 140.0) {
  const Point2 junction{200.0, 350.0 - stem};
  const double half = 0.5 * angio::deg2rad(separation_deg);
  const double sx = arm == 1 ? -std::sin(half) : std::sin(half);
  return junction + along * Point2{sx, -std::cos(half)};
}

/// Two parallel, unconnected horizontal tubes at y = 130 and y = 270.
inline angio::PhantomSpec parallel_tubes() {
  angio::PhantomSpec s;
  s.name = "parallel_tubes";
  s.paths.push_back(angio::line_path({60, 130}, {340, 130}, 8.0));
  s.paths.push_back(angio::line_path({60, 270}, {340, 270}, 8.0));
  return s;
}

inline GrayImage random_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 255.0);
  GrayImage img(w, h);
  for (auto& v : img.data()) v = u(rng);
  return img;
}

/// Phantom pipeline results are expensive; one context per spec name and
/// process is enough.
struct Prepared {
  GrayImage image;
  angio::PhantomTruth truth;
  angio::ImageContext ctx;
};

inline const Prepared& prepared(const angio::PhantomSpec& spec, std::uint64_t seed = 7) {
  static std::map<std::pair<std::string, std::uint64_t>, Prepared> cache;
  const auto key = std::make_pair(spec.name, seed);
  auto it = cache.find(key);
  if (it == cache.end()) {
    auto [img, truth] = angio::render_phantom(spec, seed);
    Prepared p{img, std::move(truth), angio::prepare_image(img, angio::config_default())};
    it = cache.emplace(key, std::move(p)).first;
  }
  return it->second;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("angio_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testsupport
