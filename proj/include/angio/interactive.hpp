#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "angio/config.hpp"
#include "angio/contour.hpp"
#include "angio/core.hpp"
#include "angio/quant.hpp"
#include "angio/tracker.hpp"

namespace angio {

struct InteractiveRequest {
  Point2 start_click;
  Point2 end_click;
};

enum class RouteDirection { Forward, Backward };

inline const char* to_string(RouteDirection d) { return d == RouteDirection::Forward ? "forward" : "backward"; }

/// One energy-guided walk from the snapped start point.
struct RouteAttempt {
  std::vector<TrackPoint> points;
  bool reached = false;
  Termination reason = Termination::None;  // why the walk stopped short
};

struct RouteResult {
  Point2 start;  // snapped
  Point2 end;
  std::vector<TrackPoint> route;
  RouteDirection chosen_direction = RouteDirection::Forward;
  bool degenerate = false;
  VesselSegment segment;
  std::vector<StenosisFinding> findings;
  RouteAttempt forward;
  RouteAttempt backward;
};

/// Raised when neither direction gets within stop_tau_d of the end point.
class UnreachableEndpoint : public Error {
 public:
  UnreachableEndpoint(RouteAttempt forward, RouteAttempt backward)
      : Error(ErrorKind::Unreachable, "no route reaches the end point"),
        forward_(std::move(forward)),
        backward_(std::move(backward)) {}
  const RouteAttempt& forward() const { return forward_; }
  const RouteAttempt& backward() const { return backward_; }

 private:
  RouteAttempt forward_;
  RouteAttempt backward_;
};

/// Nearest ridge point to the click; ties go to the smaller (y, x).
inline Point2 snap_to_ridge(Point2 click, const RidgeSet& ridges) {
  if (ridges.empty()) throw Error(ErrorKind::EmptyRidges, "no ridge points to snap to");
  const Point2* best = nullptr;
  double best_d = 0.0;
  for (const auto& p : ridges.points) {
    const double d = distance(p, click);
    const bool better = !best || d < best_d ||
                        (d == best_d && (p.y < best->y || (p.y == best->y && p.x < best->x)));
    if (better) {
      best = &p;
      best_d = d;
    }
  }
  return *best;
}

/// Potential energy of a candidate: intensity plus an attraction towards the
/// end point that grows as the candidate approaches it.
inline double energy(const GrayImage& img, Point2 p, Point2 p_end, double lambda) {
  const double d = distance(p, p_end);
  if (d == 0.0) return std::numeric_limits<double>::infinity();
  return img.sample(p) + lambda / std::sqrt(d);
}

namespace detail {

constexpr double junction_width_factor = 1.5;

inline RouteAttempt energy_walk(const GrayImage& img, const VesselContour& contour, Point2 start, Direction2 dir,
                                Point2 end, const Config& cfg) {
  RouteAttempt out;
  TrackerState state(img.width(), img.height());
  TrackPoint cur;
  cur.pos = cur.raw_pos = start;
  cur.dir = dir;
  out.points.push_back(cur);
  mark_visited(state, start, 0, cfg);
  if (distance(start, end) < cfg.stop_tau_d) {
    out.reached = true;
    return out;
  }
  const double d = cfg.search_radius_d;
  const std::size_t cap = static_cast<std::size_t>(img.width()) * img.height() / 4;
  std::vector<double> widths;
  while (out.points.size() < cap) {
    if (!has_margin(img, cur.pos, d + 1.0)) {
      out.reason = Termination::Border;
      return out;
    }
    const auto best = arc_argmax(cur.pos, d, cur.dir.theta(), cfg.delta_theta, cfg.arc_step,
                                 [&](Point2 p) { return energy(img, p, end, cfg.energy_lambda); });
    if (!(img.sample(best.point) > cfg.gray_floor_I0)) {
      out.reason = Termination::LowIntensity;
      return out;
    }
    if (state.np_at(best.point) >= cfg.crowd_tau_P) {
      out.reason = Termination::Crowded;
      return out;
    }
    TrackPoint next;
    next.raw_pos = next.pos = best.point;
    next.dir = Direction2::from_vector(best.point - cur.pos);
    next.index = cur.index + 1;
    // Near a junction the normal spans the pocket between branches and the
    // midpoint drifts towards the other branch; such cross-sections are left
    // unadjusted.
    const double max_width = widths.empty() ? 0.0 : junction_width_factor * median_of(widths);
    double width = 0.0;
    next = adjust_to_centerline(next, &cur, contour, cfg, max_width, &width);
    if (next.adjusted) widths.push_back(width);
    mark_visited(state, next.pos, next.index, cfg);
    out.points.push_back(next);
    cur = next;
    if (distance(cur.pos, end) < cfg.stop_tau_d) {
      out.reached = true;
      return out;
    }
  }
  out.reason = Termination::Crowded;
  return out;
}

}  // namespace detail

/// Routes between two clicks: both initial directions are walked with the
/// energy-maximizing step, and among the walks that reach the end point the
/// one with fewer points is kept and quantified.
inline RouteResult track_segment(const GrayImage& img, const RidgeSet& ridges, const VesselContour& contour,
                                 const InteractiveRequest& req, const Config& cfg) {
  for (Point2 c : {req.start_click, req.end_click}) {
    if (!(c.x >= 0 && c.y >= 0 && c.x <= img.width() - 1 && c.y <= img.height() - 1)) {
      throw Error(ErrorKind::InvalidArgument, "click outside the image");
    }
  }
  RouteResult r;
  r.start = snap_to_ridge(req.start_click, ridges);
  r.end = snap_to_ridge(req.end_click, ridges);
  if (r.start == r.end) {
    TrackPoint only;
    only.pos = only.raw_pos = r.start;
    r.route = {only};
    r.degenerate = true;
    r.segment.points = r.route;
    r.segment.diameters.assign(1, std::nullopt);
    r.segment.degrees.assign(1, std::nullopt);
    return r;
  }
  const auto init = initial_directions(img, r.start, cfg);
  r.forward = detail::energy_walk(img, contour, r.start, init.forward, r.end, cfg);
  r.backward = detail::energy_walk(img, contour, r.start, init.backward, r.end, cfg);
  if (!r.forward.reached && !r.backward.reached) throw UnreachableEndpoint(r.forward, r.backward);
  const bool use_forward =
      r.forward.reached && (!r.backward.reached || r.forward.points.size() <= r.backward.points.size());
  r.chosen_direction = use_forward ? RouteDirection::Forward : RouteDirection::Backward;
  r.route = use_forward ? r.forward.points : r.backward.points;
  if (r.route.size() < 2) {
    r.degenerate = true;
    r.segment.points = r.route;
    r.segment.diameters.assign(r.route.size(), std::nullopt);
    r.segment.degrees.assign(r.route.size(), std::nullopt);
    return r;
  }
  r.segment = quantify_segment(0, -1, 0, static_cast<int>(r.route.size()) - 1, r.route, contour, cfg);
  r.findings = find_stenoses(r.segment, cfg);
  return r;
}

}  // namespace angio
