#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <unordered_map>
#include <vector>

#include "angio/config.hpp"
#include "angio/core.hpp"
#include "angio/preprocess.hpp"

namespace angio {

/// Binary vessel/background labelling; 1 marks the vessel phase.
struct VesselMask {
  Grid<std::uint8_t> inside;

  VesselMask() = default;
  VesselMask(int w, int h) : inside(w, h, 0) {}

  int width() const { return inside.width(); }
  int height() const { return inside.height(); }
  bool at(int x, int y) const { return inside.contains(x, y) && inside(x, y) != 0; }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count(inside.data().begin(), inside.data().end(), std::uint8_t{1}));
  }
};

struct ContourPolygon {
  bool outer = true;
  std::vector<Point2> points;  // closed: front() == back()
};

/// Outer boundaries have positive shoelace area in (x, y) coordinates
/// (counter-clockwise in the usual mathematical orientation), holes negative.
struct VesselContour {
  std::vector<ContourPolygon> polygons;
};

inline double signed_area(const std::vector<Point2>& ring) {
  double a = 0.0;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) a += cross(ring[i], ring[i + 1]);
  return 0.5 * a;
}

inline double perimeter(const std::vector<Point2>& ring) {
  double l = 0.0;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) l += distance(ring[i], ring[i + 1]);
  return l;
}

// ---------------------------------------------------------------------------
// Chan-Vese

struct ChanVeseResult {
  VesselMask mask;
  bool degenerate = false;  // one phase vanished
  int iterations = 0;
  double c_in = 0.0;   // mean of the vessel phase, image units
  double c_out = 0.0;  // mean of the background phase, image units
  std::vector<double> energies;  // energy after each iteration, image units
};

/// Energy of a binary labelling in image units: region fits about the phase
/// means, area of the vessel phase, and the number of 4-neighbour pixel
/// pairs with differing labels as boundary length.
inline double chan_vese_energy(const GrayImage& img, const VesselMask& mask, const CvParams& p) {
  double s1 = 0, n1 = 0, s2 = 0, n2 = 0;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      if (mask.at(x, y)) {
        s1 += img.at(x, y);
        n1 += 1;
      } else {
        s2 += img.at(x, y);
        n2 += 1;
      }
    }
  const double c1 = n1 > 0 ? s1 / n1 : 0.0, c2 = n2 > 0 ? s2 / n2 : 0.0;
  double e = 0.0;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const bool in = mask.at(x, y);
      const double f = img.at(x, y);
      e += in ? p.lambda_in * (f - c1) * (f - c1) + p.nu : p.lambda_out * (f - c2) * (f - c2);
      if (x + 1 < img.width() && mask.at(x + 1, y) != in) e += p.mu;
      if (y + 1 < img.height() && mask.at(x, y + 1) != in) e += p.mu;
    }
  return e;
}

namespace detail {

inline double heaviside(double z, double eps) { return 0.5 * (1.0 + (2.0 / std::numbers::pi) * std::atan(z / eps)); }
inline double dirac(double z, double eps) { return eps / (std::numbers::pi * (eps * eps + z * z)); }

/// Exact squared Euclidean distance transform of a 1-D sampled function
/// (lower envelope of parabolas).
inline void edt_1d(const std::vector<double>& f, std::vector<double>& d) {
  const int n = static_cast<int>(f.size());
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s = 0.0;
    while (true) {
      s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
      if (s > z[k] || k == 0) break;
      --k;
    }
    if (s <= z[k]) {  // k == 0 and the new parabola dominates everywhere
      v[0] = q;
      z[1] = std::numeric_limits<double>::infinity();
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  d.assign(n, 0.0);
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    d[q] = double(q - v[k]) * (q - v[k]) + f[v[k]];
  }
}

/// Euclidean distance from every pixel to the nearest pixel where `target`
/// holds.
inline Grid<double> distance_to(const VesselMask& mask, bool target) {
  const int w = mask.width(), h = mask.height();
  constexpr double far = 1e20;
  Grid<double> g(w, h, 0.0);
  std::vector<double> f, d;
  for (int y = 0; y < h; ++y) {
    f.assign(w, 0.0);
    for (int x = 0; x < w; ++x) f[x] = mask.at(x, y) == target ? 0.0 : far;
    edt_1d(f, d);
    for (int x = 0; x < w; ++x) g(x, y) = d[x];
  }
  for (int x = 0; x < w; ++x) {
    f.assign(h, 0.0);
    for (int y = 0; y < h; ++y) f[y] = g(x, y);
    edt_1d(f, d);
    for (int y = 0; y < h; ++y) g(x, y) = std::sqrt(d[y]);
  }
  return g;
}

/// Regularized energy of a level set on the normalized image u: length is
/// the total variation of H(phi) with forward differences.
inline double cv_level_energy(const std::vector<double>& u, const Grid<double>& phi, double c1, double c2,
                              const CvParams& p, double mu_n, double nu_n) {
  const int w = phi.width(), h = phi.height();
  double e = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double hc = heaviside(phi(x, y), p.eps);
      const double hx = x + 1 < w ? heaviside(phi(x + 1, y), p.eps) - hc : 0.0;
      const double hy = y + 1 < h ? heaviside(phi(x, y + 1), p.eps) - hc : 0.0;
      const double f = u[static_cast<std::size_t>(y) * w + x];
      e += mu_n * std::hypot(hx, hy) + nu_n * hc + p.lambda_in * (f - c1) * (f - c1) * hc +
           p.lambda_out * (f - c2) * (f - c2) * (1.0 - hc);
    }
  return e;
}

}  // namespace detail

/// Two-phase piecewise-constant level-set segmentation (semi-implicit
/// Gauss-Seidel curvature scheme). The brighter phase is reported inside.
/// Number of sweeps whose sign flips are summed for the stopping test.
constexpr std::size_t cv_flip_window = 10;

inline ChanVeseResult chan_vese_run(const GrayImage& img, const CvParams& params, const VesselMask& init) {
  const int w = img.width(), h = img.height();
  if (init.width() != w || init.height() != h) throw Error(ErrorKind::InvalidArgument, "init mask size mismatch");
  const std::size_t n_in = init.count();
  if (n_in == 0 || n_in == img.size()) throw Error(ErrorKind::Degenerate, "degenerate C-V initialization");

  constexpr double eta = 1e-8;
  const double mu_n = params.mu / (255.0 * 255.0);
  const double nu_n = params.nu / 255.0;
  std::vector<double> u(img.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = img.data()[i] / 255.0;

  // Signed distance to the initial front, positive inside.
  Grid<double> phi(w, h, 0.0);
  {
    const Grid<double> to_out = detail::distance_to(init, false);
    const Grid<double> to_in = detail::distance_to(init, true);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) phi(x, y) = init.at(x, y) ? to_out(x, y) - 0.5 : 0.5 - to_in(x, y);
  }
  auto at = [&](int x, int y) { return phi(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); };
  auto means = [&](double& c1, double& c2) {
    double s1 = 0, w1 = 0, s2 = 0, w2 = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double hv = detail::heaviside(phi.data()[i], params.eps);
      s1 += hv * u[i];
      w1 += hv;
      s2 += (1.0 - hv) * u[i];
      w2 += 1.0 - hv;
    }
    c1 = w1 > 1e-12 ? s1 / w1 : 0.0;
    c2 = w2 > 1e-12 ? s2 / w2 : 0.0;
  };

  double c1 = 0.0, c2 = 0.0;
  means(c1, c2);
  ChanVeseResult res;
  std::deque<std::size_t> recent_flips;
  for (int it = 0; it < params.max_iters; ++it) {
    std::size_t flips = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double p0 = phi(x, y);
        const double pxp = at(x + 1, y), pxm = at(x - 1, y), pyp = at(x, y + 1), pym = at(x, y - 1);
        auto sq = [](double v) { return v * v; };
        const double a_r = mu_n / std::sqrt(eta * eta + sq(pxp - p0) + 0.25 * sq(at(x, y + 1) - at(x, y - 1)));
        const double a_l = mu_n / std::sqrt(eta * eta + sq(p0 - pxm) + 0.25 * sq(at(x - 1, y + 1) - at(x - 1, y - 1)));
        const double b_d = mu_n / std::sqrt(eta * eta + 0.25 * sq(pxp - pxm) + sq(pyp - p0));
        const double b_u = mu_n / std::sqrt(eta * eta + 0.25 * sq(at(x + 1, y - 1) - at(x - 1, y - 1)) + sq(p0 - pym));
        const double f = u[static_cast<std::size_t>(y) * w + x];
        // The evolution runs in image units: intensities are normalized to
        // [0,1] above, so the time step is rescaled to match.
        const double delta = detail::dirac(p0, params.eps) * params.dt * 255.0 * 255.0;
        const double force = -nu_n - params.lambda_in * sq(f - c1) + params.lambda_out * sq(f - c2);
        const double next = (p0 + delta * (a_r * pxp + a_l * pxm + b_d * pyp + b_u * pym + force)) /
                            (1.0 + delta * (a_r + a_l + b_d + b_u));
        flips += (next > 0.0) != (p0 > 0.0);
        phi(x, y) = next;
      }
    }
    const double old_c1 = c1, old_c2 = c2;
    means(c1, c2);
    res.energies.push_back(detail::cv_level_energy(u, phi, c1, c2, params, mu_n, nu_n) * 255.0 * 255.0);
    res.iterations = it + 1;
    // The means settle long before the front does, and a settled front still
    // has a few pixels oscillating across zero: stop once the flips over the
    // last few sweeps are a negligible fraction of the image.
    recent_flips.push_back(flips);
    if (recent_flips.size() > cv_flip_window) recent_flips.pop_front();
    const double window_flips = std::accumulate(recent_flips.begin(), recent_flips.end(), 0.0);
    if (recent_flips.size() == cv_flip_window && std::abs(c1 - old_c1) + std::abs(c2 - old_c2) < params.tol &&
        window_flips <= params.tol * static_cast<double>(img.size())) {
      break;
    }
  }

  res.mask = VesselMask(w, h);
  for (std::size_t i = 0; i < img.size(); ++i) res.mask.inside.data()[i] = phi.data()[i] > 0.0 ? 1 : 0;
  const std::size_t inside = res.mask.count();
  res.degenerate = inside == 0 || inside == img.size();
  double s1 = 0, n1 = 0, s2 = 0, n2 = 0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    (res.mask.inside.data()[i] ? s1 : s2) += img.data()[i];
    (res.mask.inside.data()[i] ? n1 : n2) += 1;
  }
  res.c_in = n1 > 0 ? s1 / n1 : 0.0;
  res.c_out = n2 > 0 ? s2 / n2 : 0.0;
  if (!res.degenerate && res.c_in < res.c_out) {
    for (auto& v : res.mask.inside.data()) v = v ? 0 : 1;
    std::swap(res.c_in, res.c_out);
  }
  return res;
}

inline VesselMask chan_vese(const GrayImage& img, const CvParams& params, const VesselMask& init) {
  return chan_vese_run(img, params, init).mask;
}

/// Initial vessel phase: pixels strictly above the given intensity percentile.
inline VesselMask percentile_init(const GrayImage& img, double percentile = 85.0) {
  std::vector<double> v = img.data();
  const auto k = static_cast<std::size_t>(std::clamp(percentile / 100.0, 0.0, 1.0) * (v.size() - 1));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  const double thr = v[k];
  VesselMask m(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) m.inside(x, y) = img.at(x, y) > thr ? 1 : 0;
  return m;
}

/// Percentile start refined by two-means; robust when most of the image
/// shares one value and the plain percentile lands on that value.
inline VesselMask two_means_init(const GrayImage& img, double percentile = 85.0) {
  const double thr = two_means_threshold(img, percentile);
  VesselMask m(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) m.inside(x, y) = img.at(x, y) > thr ? 1 : 0;
  return m;
}

// ---------------------------------------------------------------------------
// Marching squares

namespace detail {

/// Half-contrast level around an inside pixel: midway between the upper
/// decile of inside values and the median of outside values in a window.
inline double local_half_level(const VesselMask& mask, const GrayImage& field, int x, int y, int radius) {
  std::vector<double> in, out;
  for (int j = -radius; j <= radius; ++j)
    for (int i = -radius; i <= radius; ++i) {
      if (i * i + j * j > radius * radius || !field.contains(x + i, y + j)) continue;
      (mask.at(x + i, y + j) ? in : out).push_back(field.at(x + i, y + j));
    }
  if (in.empty() || out.empty()) return std::numeric_limits<double>::quiet_NaN();
  auto quantile = [](std::vector<double>& v, double q) {
    const auto k = static_cast<std::ptrdiff_t>(q * static_cast<double>(v.size() - 1));
    std::nth_element(v.begin(), v.begin() + k, v.end());
    return v[static_cast<std::size_t>(k)];
  };
  return 0.5 * (quantile(in, 0.9) + quantile(out, 0.5));
}

}  // namespace detail

/// Moves the mask boundary onto the local half-contrast level of `field`:
/// boundary pixels below the level are removed and outside neighbours above
/// it are added. Each pass reads levels from the mask as it was at the start
/// of the pass. Segmenting a blurred or vesselness-weighted image tends to
/// leave the mask a pixel too wide around thin vessels; this pulls it back
/// so contour vertices can be interpolated on the right grid edges.
inline VesselMask snap_mask_to_field(const VesselMask& mask, const GrayImage& field, int level_radius = 6,
                                     int passes = 2) {
  if (field.width() != mask.width() || field.height() != mask.height()) {
    throw Error(ErrorKind::InvalidArgument, "mask and field size mismatch");
  }
  VesselMask cur = mask;
  const int w = mask.width(), h = mask.height();
  constexpr int dx[4] = {1, -1, 0, 0};
  constexpr int dy[4] = {0, 0, 1, -1};
  for (int pass = 0; pass < passes; ++pass) {
    VesselMask next = cur;
    bool changed = false;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const bool in = cur.at(x, y);
        bool boundary = false;
        for (int k = 0; k < 4 && !boundary; ++k) {
          const int nx = x + dx[k], ny = y + dy[k];
          if (nx >= 0 && ny >= 0 && nx < w && ny < h && cur.at(nx, ny) != in) boundary = true;
        }
        if (!boundary) continue;
        const double level = detail::local_half_level(cur, field, x, y, level_radius);
        if (std::isnan(level)) continue;
        const double v = field.at(x, y);
        if (in && v < level) {
          next.inside(x, y) = 0;
          changed = true;
        } else if (!in && v > level) {
          next.inside(x, y) = 1;
          changed = true;
        }
      }
    }
    cur = std::move(next);
    if (!changed) break;
  }
  return cur;
}

/// Boundary polygons of the mask. Vessel pixels are 4-connected (diagonal
/// saddles are split). Without a field each vertex sits midway between the
/// inside and outside pixel centers (the 0.5 iso-level of the binary mask).
/// With a field, the vertex slides along the same grid edge to where the
/// linearly interpolated field crosses the local half-contrast level; the
/// topology still comes from the mask alone.
inline VesselContour extract_contours(const VesselMask& mask, const GrayImage* field = nullptr,
                                      int level_radius = 6) {
  const int w = mask.width(), h = mask.height();
  if (field && (field->width() != w || field->height() != h)) {
    throw Error(ErrorKind::InvalidArgument, "contour field size mismatch");
  }
  std::unordered_map<std::int64_t, double> levels;
  // Vertices live on pixel-center grid edges; key them in doubled coordinates.
  auto key = [](int X, int Y) { return (static_cast<std::int64_t>(Y) << 32) ^ static_cast<std::uint32_t>(X); };
  std::map<std::int64_t, Point2> coords;
  std::unordered_map<std::int64_t, std::int64_t> next;

  auto vertex = [&](int xi, int yi, int xo, int yo) {
    double t = 0.5;
    if (field && field->contains(xi, yi) && field->contains(xo, yo)) {
      const auto lk = static_cast<std::int64_t>(yi) * w + xi;
      auto it = levels.find(lk);
      if (it == levels.end()) it = levels.emplace(lk, detail::local_half_level(mask, *field, xi, yi, level_radius)).first;
      const double level = it->second;
      const double fi = field->at(xi, yi), fo = field->at(xo, yo);
      if (fi > level && fo < level) t = std::clamp((fi - level) / (fi - fo), 0.02, 0.98);
    }
    return Point2{xi + t * (xo - xi), yi + t * (yo - yi)};
  };

  for (int y = -1; y < h; ++y) {
    for (int x = -1; x < w; ++x) {
      // Corners in order TL, TR, BR, BL; edge e joins corner e and corner e+1.
      const int cx[4] = {x, x + 1, x + 1, x};
      const int cy[4] = {y, y, y + 1, y + 1};
      bool c[4];
      for (int k = 0; k < 4; ++k) c[k] = mask.at(cx[k], cy[k]);
      const int ex[4][2] = {{2 * x + 1, 2 * y}, {2 * x + 2, 2 * y + 1}, {2 * x + 1, 2 * y + 2}, {2 * x, 2 * y + 1}};
      auto edge_vertex = [&](int e) {
        const int a = e, b = (e + 1) % 4;
        return c[a] ? vertex(cx[a], cy[a], cx[b], cy[b]) : vertex(cx[b], cy[b], cx[a], cy[a]);
      };
      int crossings[4];
      int nc = 0;
      for (int e = 0; e < 4; ++e)
        if (c[e] != c[(e + 1) % 4]) crossings[nc++] = e;
      for (int i = 0; i < nc; ++i) {
        const int e = crossings[i];
        if (!c[e]) continue;  // only in->out crossings start a segment
        const int prev = crossings[(i + nc - 1) % nc];
        const auto a = key(ex[e][0], ex[e][1]);
        const auto b = key(ex[prev][0], ex[prev][1]);
        coords[a] = edge_vertex(e);
        coords[b] = edge_vertex(prev);
        next[a] = b;
      }
    }
  }

  VesselContour out;
  std::unordered_map<std::int64_t, bool> used;
  for (const auto& [start, xy] : coords) {
    if (used[start] || !next.count(start)) continue;
    ContourPolygon poly;
    auto k = start;
    do {
      used[k] = true;
      poly.points.push_back(coords.at(k));
      k = next.at(k);
    } while (k != start);
    poly.points.push_back(poly.points.front());
    poly.outer = signed_area(poly.points) > 0.0;
    out.polygons.push_back(std::move(poly));
  }
  return out;
}

/// Even-odd point-in-polygon over all rings.
inline bool contour_contains(const VesselContour& contour, Point2 p) {
  bool in = false;
  for (const auto& poly : contour.polygons) {
    const auto& r = poly.points;
    for (std::size_t i = 0; i + 1 < r.size(); ++i) {
      const Point2 a = r[i], b = r[i + 1];
      if ((a.y > p.y) != (b.y > p.y)) {
        const double xc = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
        if (p.x < xc) in = !in;
      }
    }
  }
  return in;
}

inline VesselMask rasterize(const VesselContour& contour, int width, int height) {
  VesselMask m(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) m.inside(x, y) = contour_contains(contour, {double(x), double(y)}) ? 1 : 0;
  return m;
}

// ---------------------------------------------------------------------------
// Line / contour intersection

struct RayHit {
  double t = 0.0;  // signed distance from the origin along the direction
  Point2 point;
};

namespace detail {

// Returns false when the line passes through a polygon vertex.
inline bool line_hits(const VesselContour& contour, Point2 origin, Point2 dir, std::vector<RayHit>& hits) {
  constexpr double vertex_eps = 1e-9;
  bool clean = true;
  for (const auto& poly : contour.polygons) {
    const auto& r = poly.points;
    for (std::size_t i = 0; i + 1 < r.size(); ++i) {
      const Point2 a = r[i], b = r[i + 1];
      const Point2 e = b - a;
      const double denom = cross(dir, e);
      const double elen = norm(e);
      if (std::abs(denom) < 1e-12 * std::max(1.0, elen)) {
        if (std::abs(cross(a - origin, dir)) < 1e-9) {
          hits.push_back({dot(a - origin, dir), a});
          hits.push_back({dot(b - origin, dir), b});
        }
        continue;
      }
      const double s = cross(a - origin, dir) / denom;
      if (s < -vertex_eps || s > 1.0 + vertex_eps) continue;
      if (std::abs(s) <= vertex_eps || std::abs(s - 1.0) <= vertex_eps) clean = false;
      const Point2 p = a + s * e;
      hits.push_back({dot(p - origin, dir), p});
    }
  }
  return clean;
}

}  // namespace detail

/// All intersections of the full line through `origin` along +-dir with the
/// contour edges, sorted by signed distance. Lines grazing a vertex are
/// shifted sideways by 1e-6 px (up to three times) before giving up and
/// merging coincident hits.
inline std::vector<RayHit> ray_contour_hits(const VesselContour& contour, Point2 origin, Direction2 dir) {
  std::vector<RayHit> hits;
  Point2 o = origin;
  for (int attempt = 0; attempt <= 3; ++attempt) {
    hits.clear();
    if (detail::line_hits(contour, o, dir.vec(), hits)) break;
    o = origin + (1e-6 * (attempt + 1)) * dir.normal();
  }
  for (auto& hit : hits) hit.t = dot(hit.point - origin, dir.vec());
  std::sort(hits.begin(), hits.end(), [](const RayHit& a, const RayHit& b) {
    if (a.t != b.t) return a.t < b.t;
    return a.point.y != b.point.y ? a.point.y < b.point.y : a.point.x < b.point.x;
  });
  hits.erase(std::unique(hits.begin(), hits.end(),
                         [](const RayHit& a, const RayHit& b) { return std::abs(a.t - b.t) < 1e-9; }),
             hits.end());
  return hits;
}

inline std::vector<Point2> ray_contour_intersections(const VesselContour& contour, Point2 origin, Direction2 dir) {
  std::vector<Point2> out;
  for (const auto& h : ray_contour_hits(contour, origin, dir)) out.push_back(h.point);
  return out;
}

/// Nearest hit strictly on each side of the origin, if both exist.
inline bool nearest_pair(const std::vector<RayHit>& hits, RayHit& neg, RayHit& pos) {
  bool has_neg = false, has_pos = false;
  for (const auto& h : hits) {
    if (h.t < 0.0) {
      neg = h;
      has_neg = true;
    } else if (h.t > 0.0 && !has_pos) {
      pos = h;
      has_pos = true;
    }
  }
  return has_neg && has_pos;
}

}  // namespace angio
