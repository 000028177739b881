#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "angio/core.hpp"
#include "angio/filters.hpp"

namespace angio {

enum class PathKind { Line, Arc, Spline };
enum class ProfileKind { FlatTop, Gaussian };

/// Narrowing of a path: width factor `residual` over `extent` px of arc
/// length centred at `center_s`, with cosine shoulders of `taper` px.
struct StenosisSpec {
  double center_s = 0.0;
  double extent = 20.0;
  double residual = 0.6;
  double taper = 8.0;
};

struct PathSpec {
  PathKind kind = PathKind::Line;
  std::vector<Point2> points;  // Line: 2 endpoints; Spline: control points (Catmull-Rom)
  Point2 center;               // Arc
  double radius = 0.0;         // Arc
  double angle0 = 0.0;         // Arc, radians
  double angle1 = 0.0;         // Arc, radians
  double width = 8.0;          // baseline width in px
  std::vector<StenosisSpec> stenoses;
};

struct PhantomSpec {
  std::string name;
  int width = 400;
  int height = 400;
  std::vector<PathSpec> paths;
  std::vector<Point2> bifurcations;  // analytic junctions (ground truth only)
  ProfileKind profile = ProfileKind::FlatTop;
  double vessel_level = 200.0;
  double background_level = 50.0;
  double noise_sigma = 0.0;
  double blur_sigma = 0.8;
};

struct TruthSample {
  int path = 0;
  double s = 0.0;
  Point2 pos;
  Point2 tangent;
  double width = 0.0;
};

struct TruthStenosis {
  int path = 0;
  double s_begin = 0.0;
  double s_end = 0.0;
  double degree = 0.0;  // equals the residual fraction
  Point2 location;           // centerline point at the lesion center
  std::vector<Point2> span;  // centerline samples with s in [s_begin, s_end]

  /// Distance from p to the narrowed stretch of centerline.
  double distance_to(Point2 p) const {
    double best = distance(p, location);
    for (const auto& q : span) best = std::min(best, distance(p, q));
    return best;
  }
};

/// Analytic ground truth. The mask is rasterized at `supersample` x the
/// image resolution; sub-pixel cell (i, j) has center
/// (-0.5 + (i + 0.5) / supersample, -0.5 + (j + 0.5) / supersample).
struct PhantomTruth {
  static constexpr double sample_step = 0.25;
  static constexpr int supersample = 4;

  int width = 0;
  int height = 0;
  std::vector<TruthSample> samples;
  std::vector<double> path_lengths;
  Grid<std::uint8_t> mask;  // bit p set when path p covers the cell (paths < 8)
  std::vector<TruthStenosis> stenoses;
  std::vector<Point2> bifurcations;

  bool cell_of(Point2 p, int& i, int& j) const {
    i = static_cast<int>(std::floor((p.x + 0.5) * supersample));
    j = static_cast<int>(std::floor((p.y + 0.5) * supersample));
    return mask.contains(i, j);
  }
  /// Inside the union of all vessels.
  bool inside(Point2 p) const {
    int i, j;
    return cell_of(p, i, j) && mask(i, j) != 0;
  }
  bool inside_path(Point2 p, int path) const {
    int i, j;
    return cell_of(p, i, j) && (mask(i, j) & (1u << path)) != 0;
  }
  double total_length() const {
    double l = 0.0;
    for (double v : path_lengths) l += v;
    return l;
  }
  /// Nearest centerline sample, optionally restricted to one path.
  const TruthSample& nearest_sample(Point2 p, int path = -1) const {
    const TruthSample* best = nullptr;
    double best_d = 0.0;
    for (const auto& s : samples) {
      if (path >= 0 && s.path != path) continue;
      const double d = distance(s.pos, p);
      if (!best || d < best_d) {
        best = &s;
        best_d = d;
      }
    }
    if (!best) throw Error(ErrorKind::InvalidArgument, "phantom truth has no samples");
    return *best;
  }
};

namespace detail {

inline Point2 catmull_rom(Point2 p0, Point2 p1, Point2 p2, Point2 p3, double t) {
  const double t2 = t * t, t3 = t2 * t;
  return 0.5 * ((2.0 * p1) + (p2 - p0) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2 +
                (3.0 * p1 - p0 - 3.0 * p2 + p3) * t3);
}

/// Dense polyline of a path before arc-length resampling.
inline std::vector<Point2> path_polyline(const PathSpec& path) {
  std::vector<Point2> pts;
  switch (path.kind) {
    case PathKind::Line: {
      if (path.points.size() != 2) throw Error(ErrorKind::InvalidArgument, "line path needs 2 points");
      pts = path.points;
      break;
    }
    case PathKind::Arc: {
      if (!(path.radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "arc path needs a positive radius");
      const double sweep = path.angle1 - path.angle0;
      const int n = std::max(8, static_cast<int>(std::ceil(std::abs(sweep) * path.radius / 0.05)));
      for (int i = 0; i <= n; ++i) {
        const double a = path.angle0 + sweep * i / n;
        pts.push_back({path.center.x + path.radius * std::cos(a), path.center.y + path.radius * std::sin(a)});
      }
      break;
    }
    case PathKind::Spline: {
      const auto& c = path.points;
      if (c.size() < 2) throw Error(ErrorKind::InvalidArgument, "spline path needs at least 2 control points");
      for (std::size_t i = 0; i + 1 < c.size(); ++i) {
        const Point2 p0 = i == 0 ? c[0] : c[i - 1];
        const Point2 p3 = i + 2 < c.size() ? c[i + 2] : c[i + 1];
        const int n = std::max(8, static_cast<int>(std::ceil(distance(c[i], c[i + 1]) / 0.05)));
        for (int k = (i == 0 ? 0 : 1); k <= n; ++k) pts.push_back(catmull_rom(p0, c[i], c[i + 1], p3, double(k) / n));
      }
      break;
    }
  }
  return pts;
}

inline double width_factor(const PathSpec& path, double s) {
  double f = 1.0;
  for (const auto& st : path.stenoses) {
    const double off = std::abs(s - st.center_s) - 0.5 * st.extent;
    double g = 1.0;
    if (off <= 0.0) {
      g = st.residual;
    } else if (off < st.taper) {
      const double t = off / st.taper;
      g = st.residual + (1.0 - st.residual) * 0.5 * (1.0 - std::cos(std::numbers::pi * t));
    }
    f = std::min(f, g);
  }
  return f;
}

}  // namespace detail

/// Samples a path at uniform arc-length spacing.
inline std::vector<TruthSample> sample_path(const PathSpec& path, int path_index, double step,
                                            double* length_out = nullptr) {
  const auto poly = detail::path_polyline(path);
  std::vector<double> cum(poly.size(), 0.0);
  for (std::size_t i = 1; i < poly.size(); ++i) cum[i] = cum[i - 1] + distance(poly[i - 1], poly[i]);
  const double length = cum.back();
  if (length_out) *length_out = length;
  std::vector<TruthSample> out;
  const int n = static_cast<int>(std::floor(length / step + 1e-9));
  std::size_t seg = 0;
  for (int k = 0; k <= n; ++k) {
    const double s = k * step;
    while (seg + 2 < poly.size() && cum[seg + 1] < s) ++seg;
    const double seg_len = cum[seg + 1] - cum[seg];
    const double t = seg_len > 0 ? std::clamp((s - cum[seg]) / seg_len, 0.0, 1.0) : 0.0;
    const Point2 a = poly[seg], b = poly[seg + 1];
    TruthSample ts;
    ts.path = path_index;
    ts.s = s;
    ts.pos = a + t * (b - a);
    const double bl = distance(a, b);
    ts.tangent = bl > 0 ? (1.0 / bl) * (b - a) : Point2{1.0, 0.0};
    ts.width = path.width * detail::width_factor(path, s);
    out.push_back(ts);
  }
  return out;
}

inline void validate(const PhantomSpec& spec) {
  if (spec.width <= 0 || spec.height <= 0) throw Error(ErrorKind::InvalidArgument, "phantom canvas must be positive");
  if (spec.paths.empty() || spec.paths.size() > 8) throw Error(ErrorKind::InvalidArgument, "phantom needs 1..8 paths");
  for (const auto& p : spec.paths) {
    if (!(p.width > 0.0)) throw Error(ErrorKind::InvalidArgument, "path width must be positive");
    for (const auto& st : p.stenoses) {
      if (!(st.residual > 0.0 && st.residual < 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "stenosis residual fraction must lie in (0,1)");
      }
      if (!(st.extent >= 0.0 && st.taper > 0.0)) throw Error(ErrorKind::InvalidArgument, "bad stenosis extent/taper");
    }
  }
}

/// Renders the phantom and its analytic truth. Noise is drawn from a
/// generator seeded with `seed`.
inline std::pair<GrayImage, PhantomTruth> render_phantom(const PhantomSpec& spec, std::uint64_t seed) {
  validate(spec);
  PhantomTruth truth;
  truth.width = spec.width;
  truth.height = spec.height;
  truth.bifurcations = spec.bifurcations;
  double max_width = 0.0;
  for (std::size_t p = 0; p < spec.paths.size(); ++p) {
    double len = 0.0;
    auto samples = sample_path(spec.paths[p], static_cast<int>(p), PhantomTruth::sample_step, &len);
    truth.path_lengths.push_back(len);
    max_width = std::max(max_width, spec.paths[p].width);
    truth.samples.insert(truth.samples.end(), samples.begin(), samples.end());
    for (const auto& st : spec.paths[p].stenoses) {
      TruthStenosis ts;
      ts.path = static_cast<int>(p);
      ts.s_begin = st.center_s - 0.5 * st.extent;
      ts.s_end = st.center_s + 0.5 * st.extent;
      ts.degree = st.residual;
      ts.location = samples[std::min(samples.size() - 1,
                                     static_cast<std::size_t>(std::lround(st.center_s / PhantomTruth::sample_step)))]
                        .pos;
      for (const auto& smp : samples)
        if (smp.s >= ts.s_begin && smp.s <= ts.s_end) ts.span.push_back(smp.pos);
      truth.stenoses.push_back(ts);
    }
  }
  const double margin = 2.0 * max_width;
  for (const auto& s : truth.samples) {
    if (s.pos.x < margin || s.pos.y < margin || s.pos.x > spec.width - 1 - margin ||
        s.pos.y > spec.height - 1 - margin) {
      throw Error(ErrorKind::InvalidArgument, "phantom path escapes the canvas margin");
    }
  }

  // Supersampled truth mask.
  constexpr int ss = PhantomTruth::supersample;
  truth.mask = Grid<std::uint8_t>(spec.width * ss, spec.height * ss, 0);
  for (const auto& s : truth.samples) {
    const double r = 0.5 * s.width;
    const int i0 = std::max(0, static_cast<int>(std::floor((s.pos.x - r + 0.5) * ss)) - 1);
    const int i1 = std::min(truth.mask.width() - 1, static_cast<int>(std::ceil((s.pos.x + r + 0.5) * ss)) + 1);
    const int j0 = std::max(0, static_cast<int>(std::floor((s.pos.y - r + 0.5) * ss)) - 1);
    const int j1 = std::min(truth.mask.height() - 1, static_cast<int>(std::ceil((s.pos.y + r + 0.5) * ss)) + 1);
    for (int j = j0; j <= j1; ++j) {
      const double cy = -0.5 + (j + 0.5) / ss;
      for (int i = i0; i <= i1; ++i) {
        const double cx = -0.5 + (i + 0.5) / ss;
        if (std::hypot(cx - s.pos.x, cy - s.pos.y) < r) truth.mask(i, j) |= static_cast<std::uint8_t>(1u << s.path);
      }
    }
  }

  // Per-pixel vessel fraction: flat top with a linear one-pixel shoulder
  // centred on the boundary, or a Gaussian whose FWHM is the local width.
  GrayImage fraction(spec.width, spec.height, 0.0);
  for (const auto& s : truth.samples) {
    const double r = 0.5 * s.width;
    const double reach = spec.profile == ProfileKind::FlatTop ? r + 1.0 : 3.0 * r;
    const int x0 = std::max(0, static_cast<int>(std::floor(s.pos.x - reach)));
    const int x1 = std::min(spec.width - 1, static_cast<int>(std::ceil(s.pos.x + reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(s.pos.y - reach)));
    const int y1 = std::min(spec.height - 1, static_cast<int>(std::ceil(s.pos.y + reach)));
    const double gsig = s.width / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double d = std::hypot(x - s.pos.x, y - s.pos.y);
        const double v = spec.profile == ProfileKind::FlatTop ? std::clamp(0.5 + (r - d), 0.0, 1.0)
                                                              : std::exp(-0.5 * d * d / (gsig * gsig));
        fraction.at(x, y) = std::max(fraction.at(x, y), v);
      }
    }
  }

  GrayImage img(spec.width, spec.height);
  for (std::size_t i = 0; i < img.size(); ++i) {
    img.data()[i] = spec.background_level + (spec.vessel_level - spec.background_level) * fraction.data()[i];
  }
  if (spec.blur_sigma > 0.0) img = gaussian_blur(img, spec.blur_sigma);
  if (spec.noise_sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (auto& v : img.data()) v += noise(rng);
  }
  img.clamp_to_range();
  return {std::move(img), std::move(truth)};
}

// ---------------------------------------------------------------------------
// Catalog builders

inline PathSpec line_path(Point2 a, Point2 b, double width) {
  PathSpec p;
  p.kind = PathKind::Line;
  p.points = {a, b};
  p.width = width;
  return p;
}

inline PathSpec arc_path(Point2 center, double radius, double a0, double a1, double width) {
  PathSpec p;
  p.kind = PathKind::Arc;
  p.center = center;
  p.radius = radius;
  p.angle0 = a0;
  p.angle1 = a1;
  p.width = width;
  return p;
}

/// Straight tube through the canvas center at `angle_deg`.
inline PhantomSpec tube_phantom(double width, double angle_deg, double length = 300.0) {
  PhantomSpec s;
  s.name = "tube_w" + std::to_string(static_cast<int>(width)) + "_a" + std::to_string(static_cast<int>(angle_deg));
  const Point2 c{200.0, 200.0};
  const Point2 u{std::cos(deg2rad(angle_deg)), -std::sin(deg2rad(angle_deg))};
  s.paths.push_back(line_path(c - 0.5 * length * u, c + 0.5 * length * u, width));
  return s;
}

/// Y-shaped bifurcation: a stem rising from the bottom, two arms at +-half
/// the separation from the stem axis.
inline PhantomSpec y_phantom(double separation_deg, double width = 8.0, double stem = 140.0, double arm = 160.0) {
  PhantomSpec s;
  s.name = "y_sep" + std::to_string(static_cast<int>(separation_deg));
  const Point2 junction{200.0, 350.0 - stem};
  s.paths.push_back(line_path({200.0, 350.0}, junction, width));
  const double half = 0.5 * deg2rad(separation_deg);
  // Arm 1 leans left, arm 2 right (image y grows downward).
  s.paths.push_back(line_path(junction, junction + arm * Point2{-std::sin(half), -std::cos(half)}, width));
  s.paths.push_back(line_path(junction, junction + arm * Point2{std::sin(half), -std::cos(half)}, width));
  s.bifurcations.push_back(junction);
  return s;
}

inline PhantomSpec ring_phantom(double radius = 90.0, double width = 8.0) {
  PhantomSpec s;
  s.name = "ring_r" + std::to_string(static_cast<int>(radius));
  s.paths.push_back(arc_path({200.0, 200.0}, radius, 0.0, 2.0 * std::numbers::pi, width));
  return s;
}

inline PhantomSpec arc_phantom(double radius, double width = 8.0) {
  PhantomSpec s;
  s.name = "arc_r" + std::to_string(static_cast<int>(radius));
  // Sweep chosen so the arc spans about 240 px of length, capped at 300 deg.
  const double sweep = std::min(deg2rad(300.0), 240.0 / radius);
  const double mid = -0.5 * std::numbers::pi;  // apex at the top
  const Point2 center{200.0, 200.0 + (radius > 100.0 ? radius - 60.0 : 0.0)};
  s.paths.push_back(arc_path(center, radius, mid - 0.5 * sweep, mid + 0.5 * sweep, width));
  return s;
}

/// Horizontal tube with stenoses given as (center_s, residual) pairs.
inline PhantomSpec stenosis_phantom(const std::vector<std::pair<double, double>>& lesions, double width = 10.0,
                                    double extent = 20.0) {
  PhantomSpec s = tube_phantom(width, 0.0);
  s.name = "stenosis";
  for (const auto& [center, residual] : lesions) {
    s.paths[0].stenoses.push_back({center, extent, residual, 8.0});
    s.name += "_" + std::to_string(static_cast<int>(std::lround(residual * 100)));
  }
  return s;
}

enum class SuiteCategory { Tube, Inclined, Arc, Bifurcation, Ring, Stenosis, LowContrast, Noisy, GaussianProfile };

inline const char* to_string(SuiteCategory c) {
  switch (c) {
    case SuiteCategory::Tube: return "tube";
    case SuiteCategory::Inclined: return "inclined";
    case SuiteCategory::Arc: return "arc";
    case SuiteCategory::Bifurcation: return "bifurcation";
    case SuiteCategory::Ring: return "ring";
    case SuiteCategory::Stenosis: return "stenosis";
    case SuiteCategory::LowContrast: return "low_contrast";
    case SuiteCategory::Noisy: return "noisy";
    case SuiteCategory::GaussianProfile: return "gaussian_profile";
  }
  return "unknown";
}

struct SuiteEntry {
  SuiteCategory category;
  PhantomSpec spec;
  int expected_stenoses = 0;
  int expected_bifurcations = 0;
};

/// Fixed phantom catalog used by tests and the eval-phantoms command.
inline std::vector<SuiteEntry> standard_suite() {
  std::vector<SuiteEntry> suite;
  for (double w : {4.0, 6.0, 8.0, 10.0, 12.0}) suite.push_back({SuiteCategory::Tube, tube_phantom(w, 0.0)});
  for (int a = 0; a <= 90; a += 15) suite.push_back({SuiteCategory::Inclined, tube_phantom(8.0, a)});
  for (double r : {40.0, 80.0, 150.0}) suite.push_back({SuiteCategory::Arc, arc_phantom(r)});
  for (double sep : {30.0, 60.0, 90.0, 120.0}) suite.push_back({SuiteCategory::Bifurcation, y_phantom(sep), 0, 1});
  suite.push_back({SuiteCategory::Ring, ring_phantom()});
  for (double r : {0.4, 0.5, 0.6, 0.75}) suite.push_back({SuiteCategory::Stenosis, stenosis_phantom({{150.0, r}}), 1});
  suite.push_back({SuiteCategory::Stenosis, stenosis_phantom({{100.0, 0.5}, {200.0, 0.6}}), 2});
  {
    auto s = tube_phantom(8.0, 30.0);
    s.name = "low_contrast";
    s.vessel_level = 110.0;
    s.background_level = 70.0;
    suite.push_back({SuiteCategory::LowContrast, s});
  }
  {
    auto s = tube_phantom(8.0, 20.0);
    s.name = "noisy_tube";
    s.noise_sigma = 8.0;
    suite.push_back({SuiteCategory::Noisy, s});
  }
  {
    auto s = tube_phantom(8.0, 0.0);
    s.name = "gaussian_profile";
    s.profile = ProfileKind::Gaussian;
    suite.push_back({SuiteCategory::GaussianProfile, s});
  }
  return suite;
}

}  // namespace angio
