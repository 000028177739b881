#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "angio/config.hpp"
#include "angio/contour.hpp"
#include "angio/core.hpp"
#include "angio/tracker.hpp"

namespace angio {

struct VesselSegment {
  int id = 0;
  int source_track = 0;
  int first = 0;  // ordinal range within the source track
  int last = 0;
  std::vector<TrackPoint> points;
  std::vector<std::optional<double>> diameters;  // empty optional: unmeasured
  double mean_diameter = 0.0;                    // 0 when nothing was measured
  std::vector<std::optional<double>> degrees;

  std::size_t measured_count() const {
    return static_cast<std::size_t>(std::count_if(diameters.begin(), diameters.end(), [](const auto& d) {
      return d.has_value();
    }));
  }
};

struct StenosisFinding {
  int segment_id = 0;
  int range_first = 0;  // ordinals within the segment, inclusive
  int range_last = 0;
  Point2 location;
  double min_degree = 0.0;
  double mean_degree = 0.0;
};

namespace detail {

/// Direction of the total-least-squares line through the points (major
/// principal axis of their scatter).
inline Direction2 tls_direction(const std::vector<Point2>& pts) {
  Point2 mean{0.0, 0.0};
  for (const auto& p : pts) mean = mean + p;
  mean = (1.0 / static_cast<double>(pts.size())) * mean;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (const auto& p : pts) {
    const Point2 q = p - mean;
    sxx += q.x * q.x;
    syy += q.y * q.y;
    sxy += q.x * q.y;
  }
  const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  return Direction2::from_angle(theta);
}

}  // namespace detail

/// Local vessel axis at point k: TLS line through the (up to) four points of
/// the segment closest to P_k, P_k included. Ties go to the lower ordinal.
inline Direction2 local_axis(const std::vector<TrackPoint>& points, std::size_t k) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const Point2 pk = points[k].pos;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return distance(points[a].pos, pk) < distance(points[b].pos, pk);
  });
  const std::size_t n = std::min<std::size_t>(4, points.size());
  std::vector<Point2> nearest;
  for (std::size_t i = 0; i < n; ++i) nearest.push_back(points[order[i]].pos);
  return detail::tls_direction(nearest);
}

/// Diameter at point k: distance between the nearest contour crossings on
/// either side of P_k along the normal to the local axis. Unmeasured when a
/// side has no crossing or when P_k is closer than half that diameter to the
/// contour along the axis.
inline std::optional<double> measure_diameter(const std::vector<TrackPoint>& points, std::size_t k,
                                              const VesselContour& contour) {
  if (points.size() < 2) throw Error(ErrorKind::InvalidArgument, "diameter needs at least two points");
  if (k >= points.size()) throw Error(ErrorKind::InvalidArgument, "point ordinal out of range");
  const Direction2 axis = local_axis(points, k);
  const Direction2 normal = Direction2::from_vector(axis.normal());
  RayHit neg, pos;
  if (!nearest_pair(ray_contour_hits(contour, points[k].pos, normal), neg, pos)) return std::nullopt;
  const double d = distance(neg.point, pos.point);
  // Within half a diameter of a vessel end the cross-section is cut by the
  // cap and no longer measures the lumen.
  RayHit back, ahead;
  if (!nearest_pair(ray_contour_hits(contour, points[k].pos, axis), back, ahead)) return std::nullopt;
  if (std::min(-back.t, ahead.t) < 0.5 * d) return std::nullopt;
  return d;
}

namespace detail {

inline double median_of(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

}  // namespace detail

/// Diameters along a segment in order. Points outside the contour (track
/// ends past the vessel cap) are unmeasured, and so is any value above
/// `outlier_factor` times the median of the segment's diameters (normals
/// near junctions can run into the neighbouring branch).
inline std::vector<std::optional<double>> measure_diameters(const std::vector<TrackPoint>& points,
                                                            const VesselContour& contour, double outlier_factor) {
  std::vector<std::optional<double>> out(points.size());
  if (points.size() < 2) return out;
  std::vector<double> values;
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (!contour_contains(contour, points[k].pos)) continue;
    auto d = measure_diameter(points, k, contour);
    if (!d || !(*d > 0.0)) continue;
    out[k] = d;
    values.push_back(*d);
  }
  if (values.empty()) return out;
  const double limit = outlier_factor * detail::median_of(values);
  for (auto& d : out)
    if (d && *d > limit) d.reset();
  return out;
}

inline std::vector<std::optional<double>> stenotic_degree(const std::vector<std::optional<double>>& diameters,
                                                          double mean_diameter) {
  if (!(mean_diameter > 0.0)) throw Error(ErrorKind::InvalidArgument, "mean diameter must be positive");
  std::vector<std::optional<double>> out(diameters.size());
  for (std::size_t i = 0; i < diameters.size(); ++i)
    if (diameters[i]) out[i] = *diameters[i] / mean_diameter;
  return out;
}

/// 1 marks a narrowed point (S < tau_3); unmeasured points are 0.
inline std::vector<int> discriminate(const std::vector<std::optional<double>>& degrees, double tau_3) {
  std::vector<int> out(degrees.size(), 0);
  for (std::size_t i = 0; i < degrees.size(); ++i) out[i] = degrees[i] && *degrees[i] < tau_3 ? 1 : 0;
  return out;
}

inline std::vector<int> discriminate(const std::vector<double>& degrees, double tau_3) {
  std::vector<std::optional<double>> wrapped(degrees.begin(), degrees.end());
  return discriminate(wrapped, tau_3);
}

/// Builds a quantified segment: diameters, their mean and the degrees.
inline VesselSegment quantify_segment(int id, int source_track, int first, int last, std::vector<TrackPoint> points,
                                      const VesselContour& contour, const Config& cfg) {
  VesselSegment s;
  s.id = id;
  s.source_track = source_track;
  s.first = first;
  s.last = last;
  s.points = std::move(points);
  s.diameters = measure_diameters(s.points, contour, cfg.outlier_factor);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& d : s.diameters)
    if (d) {
      sum += *d;
      ++n;
    }
  if (n > 0) {
    s.mean_diameter = sum / static_cast<double>(n);
    s.degrees = stenotic_degree(s.diameters, s.mean_diameter);
  } else {
    s.degrees.assign(s.points.size(), std::nullopt);
  }
  return s;
}

inline std::vector<VesselSegment> quantify_tracks(const std::vector<CenterlineTrack>& tracks,
                                                  const VesselContour& contour, const Config& cfg) {
  std::vector<VesselSegment> out;
  for (auto& g : split_segments(tracks, cfg.min_segment_points)) {
    const int id = static_cast<int>(out.size());
    out.push_back(quantify_segment(id, g.track, g.first, g.last, std::move(g.points), contour, cfg));
  }
  return out;
}

/// Maximal runs of narrowed points. Unmeasured points neither extend nor
/// break a run; runs with fewer than `min_finding_run` narrowed points are
/// dropped.
inline std::vector<StenosisFinding> find_stenoses(const VesselSegment& segment, const Config& cfg) {
  std::vector<StenosisFinding> out;
  const auto delta = discriminate(segment.degrees, cfg.stenosis_tau_3);
  std::vector<std::size_t> run;
  auto flush = [&] {
    if (static_cast<int>(run.size()) >= cfg.min_finding_run) {
      StenosisFinding f;
      f.segment_id = segment.id;
      f.range_first = static_cast<int>(run.front());
      f.range_last = static_cast<int>(run.back());
      f.min_degree = *segment.degrees[run.front()];
      f.location = segment.points[run.front()].pos;
      double sum = 0.0;
      for (std::size_t i : run) {
        const double s = *segment.degrees[i];
        sum += s;
        if (s < f.min_degree) {
          f.min_degree = s;
          f.location = segment.points[i].pos;
        }
      }
      f.mean_degree = sum / static_cast<double>(run.size());
      out.push_back(f);
    }
    run.clear();
  };
  for (std::size_t i = 0; i < delta.size(); ++i) {
    if (!segment.degrees[i]) continue;
    if (delta[i]) {
      run.push_back(i);
    } else {
      flush();
    }
  }
  flush();
  return out;
}

inline std::vector<StenosisFinding> find_all_stenoses(const std::vector<VesselSegment>& segments, const Config& cfg) {
  std::vector<StenosisFinding> out;
  for (const auto& s : segments) {
    auto f = find_stenoses(s, cfg);
    out.insert(out.end(), f.begin(), f.end());
  }
  return out;
}

}  // namespace angio
