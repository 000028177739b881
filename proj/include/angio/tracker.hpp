#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "angio/config.hpp"
#include "angio/contour.hpp"
#include "angio/core.hpp"
#include "angio/filters.hpp"

namespace angio {

// ---------------------------------------------------------------------------
// Ridge points

struct RidgeSet {
  std::vector<Point2> points;  // integer pixel positions, row-major order
  Grid<std::uint8_t> occupancy;

  bool contains(int x, int y) const { return occupancy.contains(x, y) && occupancy(x, y) != 0; }
  bool empty() const { return points.empty(); }
  std::size_t size() const { return points.size(); }
};

/// Per-pixel quantities the ridge test looks at.
struct RidgeFields {
  GrayImage gx, gy;            // Gaussian-derivative gradient
  GrayImage lambda1, lambda2;  // sigma^2-normalized Hessian eigenvalues, |lambda1| <= |lambda2|
};

inline RidgeFields ridge_fields(const GrayImage& img, double sigma) {
  const DerivativeFields d = gaussian_derivatives(img, sigma);
  RidgeFields f{d.dx, d.dy, GrayImage(img.width(), img.height()), GrayImage(img.width(), img.height())};
  const double s2 = sigma * sigma;
  for (std::size_t i = 0; i < img.size(); ++i) {
    const SymEigen2 e = sym_eigen2(s2 * d.dxx.data()[i], s2 * d.dxy.data()[i], s2 * d.dyy.data()[i]);
    f.lambda1.data()[i] = e.lambda1;
    f.lambda2.data()[i] = e.lambda2;
  }
  return f;
}

namespace detail {

constexpr double gradient_zero = 1e-9;

inline Point2 snapped_gradient(const RidgeFields& f, int x, int y) {
  Point2 g{f.gx.at(x, y), f.gy.at(x, y)};
  if (std::abs(g.x) < gradient_zero) g.x = 0.0;
  if (std::abs(g.y) < gradient_zero) g.y = 0.0;
  return g;
}

/// Opposing (or vanishing on one side) gradients across a pixel diagonal.
inline bool gradient_flips(Point2 a, Point2 b) {
  const bool a_zero = a.x == 0.0 && a.y == 0.0;
  const bool b_zero = b.x == 0.0 && b.y == 0.0;
  if (a_zero && b_zero) return false;
  return dot(a, b) <= 0.0;
}

inline bool concave(const RidgeFields& f, int x, int y, double tol) {
  const double l1 = f.lambda1.at(x, y), l2 = f.lambda2.at(x, y);
  return std::max(l1, l2) < tol && std::min(l1, l2) < -tol;
}

}  // namespace detail

/// Ridge test for the pixel cell with top-left corner (x, y): the gradient
/// turns across one of the two diagonals and the intensity surface is
/// concave at all four corners.
inline bool is_ridge(const RidgeFields& f, int x, int y, double tol) {
  if (x < 0 || y < 0 || x + 1 >= f.gx.width() || y + 1 >= f.gx.height()) return false;
  const Point2 g00 = detail::snapped_gradient(f, x, y), g11 = detail::snapped_gradient(f, x + 1, y + 1);
  const Point2 g10 = detail::snapped_gradient(f, x + 1, y), g01 = detail::snapped_gradient(f, x, y + 1);
  if (!detail::gradient_flips(g00, g11) && !detail::gradient_flips(g10, g01)) return false;
  for (int n = 0; n <= 1; ++n)
    for (int m = 0; m <= 1; ++m)
      if (!detail::concave(f, x + m, y + n, tol)) return false;
  return true;
}

inline RidgeSet detect_ridges(const GrayImage& img, double sigma = 1.0, double tol = 1e-3) {
  const RidgeFields f = ridge_fields(img, sigma);
  RidgeSet r;
  r.occupancy = Grid<std::uint8_t>(img.width(), img.height(), 0);
  for (int y = 0; y + 1 < img.height(); ++y)
    for (int x = 0; x + 1 < img.width(); ++x)
      if (is_ridge(f, x, y, tol)) {
        r.points.push_back({double(x), double(y)});
        r.occupancy(x, y) = 1;
      }
  return r;
}

inline RidgeSet detect_ridges(const GrayImage& img, const Config& cfg) {
  return detect_ridges(img, cfg.ridge_sigma, cfg.ridge_tol);
}

// ---------------------------------------------------------------------------
// Tracking types

enum class Termination { None, LowIntensity, Crowded, Border };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::None: return "none";
    case Termination::LowIntensity: return "low_intensity";
    case Termination::Crowded: return "crowded";
    case Termination::Border: return "border";
  }
  return "none";
}

struct TrackPoint {
  Point2 pos;      // after centerline adjustment
  Point2 raw_pos;  // where the arc search landed
  Direction2 dir;  // tracking direction arriving at this point
  int index = 0;   // ordinal within its track
  bool adjusted = false;
};

enum class CutoffKind { Bifurcation, Termination };

inline const char* to_string(CutoffKind k) { return k == CutoffKind::Bifurcation ? "bifurcation" : "termination"; }

struct Cutoff {
  int ordinal = 0;
  CutoffKind kind = CutoffKind::Termination;
  friend bool operator==(const Cutoff&, const Cutoff&) = default;
};

struct CenterlineTrack {
  int id = 0;
  std::vector<TrackPoint> points;
  std::vector<Cutoff> cutoffs;
  Point2 seed;
  int direction_sign = 0;  // 0: seed tracked both ways; +1: branch tracked forward from its seed
  int parent = -1;         // track that spawned this branch, -1 for seed tracks
  Termination start_reason = Termination::None;
  Termination end_reason = Termination::None;
};

struct BranchSeed {
  Point2 point;
  Direction2 dir;
  int parent_track = -1;
  int parent_pass = -1;
  int parent_ordinal = -1;  // ordinal within the parent pass
};

/// Mutable bookkeeping shared by every pass over one image.
struct TrackerState {
  Grid<int> np;          // N_P: tracking points within neighborhood_radius_P
  Grid<int> nb;          // N_B: detected branch points within neighborhood_radius_B
  Grid<int> first_pass;  // pass that first claimed the pixel, -1 if none
  Grid<int> first_index;
  std::deque<BranchSeed> queue;
  int pass = 0;  // id of the pass currently being tracked

  TrackerState() = default;
  TrackerState(int w, int h) : np(w, h, 0), nb(w, h, 0), first_pass(w, h, -1), first_index(w, h, -1) {}

  int np_at(Point2 p) const {
    const int x = static_cast<int>(std::lround(p.x)), y = static_cast<int>(std::lround(p.y));
    return np.contains(x, y) ? np(x, y) : 0;
  }
  int nb_at(Point2 p) const {
    const int x = static_cast<int>(std::lround(p.x)), y = static_cast<int>(std::lround(p.y));
    return nb.contains(x, y) ? nb(x, y) : 0;
  }
};

namespace detail {

template <typename F>
void for_disc(int w, int h, Point2 c, double r, F&& f) {
  const int x0 = std::max(0, static_cast<int>(std::floor(c.x - r))), x1 = std::min(w - 1, static_cast<int>(std::ceil(c.x + r)));
  const int y0 = std::max(0, static_cast<int>(std::floor(c.y - r))), y1 = std::min(h - 1, static_cast<int>(std::ceil(c.y + r)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if ((x - c.x) * (x - c.x) + (y - c.y) * (y - c.y) <= r * r) f(x, y);
}

inline bool has_margin(const GrayImage& img, Point2 p, double margin) {
  return p.x >= margin && p.y >= margin && p.x <= img.width() - 1 - margin && p.y <= img.height() - 1 - margin;
}

struct ArcBest {
  Point2 point;
  double value = 0.0;
  double deviation = 0.0;
};

/// Best sample on the arc of radius r about `center`, angles theta0 + j*step
/// for |j*step| <= half_width. Ties go to the smaller |deviation|, then the
/// smaller signed deviation.
template <typename Score>
ArcBest arc_argmax(Point2 center, double r, double theta0, double half_width, double step, Score&& score) {
  const int n = static_cast<int>(std::floor(half_width / step + 1e-9));
  ArcBest best;
  bool have = false;
  for (int j = -n; j <= n; ++j) {
    const double dev = j * step;
    const Point2 p{center.x + r * std::cos(theta0 + dev), center.y + r * std::sin(theta0 + dev)};
    const double v = score(p);
    bool better = !have || v > best.value;
    if (have && v == best.value) {
      const double a = std::abs(dev), b = std::abs(best.deviation);
      better = a < b || (a == b && dev < best.deviation);
    }
    if (better) {
      best = {p, v, dev};
      have = true;
    }
  }
  return best;
}

}  // namespace detail

/// Marks an accepted tracking point: N_P grows around it and unclaimed
/// pixels remember the pass and ordinal that reached them first.
inline void mark_visited(TrackerState& state, Point2 p, int index, const Config& cfg) {
  detail::for_disc(state.np.width(), state.np.height(), p, cfg.neighborhood_radius_P, [&](int x, int y) {
    state.np(x, y) += 1;
    if (state.first_pass(x, y) < 0) {
      state.first_pass(x, y) = state.pass;
      state.first_index(x, y) = index;
    }
  });
}

struct InitialDirections {
  Direction2 forward;
  Direction2 backward;
  Point2 p_plus;
  Point2 p_minus;
};

/// Forward direction towards the brightest point of the full circle of
/// radius d (ties to the smallest angle); backward towards the brightest
/// point of the arc about the reversed forward angle.
inline InitialDirections initial_directions(const GrayImage& img, Point2 seed, const Config& cfg) {
  const double d = cfg.search_radius_d;
  if (!detail::has_margin(img, seed, d)) throw Error(ErrorKind::Border, "seed closer than d to the image border");
  const int n = static_cast<int>(std::lround(2.0 * std::numbers::pi / cfg.arc_step));
  Point2 best{};
  double best_v = -1.0;
  for (int j = 0; j < n; ++j) {
    const double a = j * cfg.arc_step;
    const Point2 p{seed.x + d * std::cos(a), seed.y + d * std::sin(a)};
    const double v = img.sample(p);
    if (v > best_v) {
      best_v = v;
      best = p;
    }
  }
  InitialDirections out;
  out.p_plus = best;
  out.forward = Direction2::from_vector(best - seed);
  const auto back = detail::arc_argmax(seed, d, out.forward.theta() + std::numbers::pi, cfg.delta_theta, cfg.arc_step,
                                       [&](Point2 p) { return img.sample(p); });
  out.p_minus = back.point;
  out.backward = Direction2::from_vector(back.point - seed);
  return out;
}

struct StepResult {
  std::optional<TrackPoint> point;
  Termination reason = Termination::None;
};

/// One arc-search step from `prev`. Besides the gray-floor and crowding
/// guards, a step that lands on pixels first claimed by
/// another pass, or by an older point of this pass, ends the pass as
/// crowded: tracking has joined a centerline that is already known.
/// With `mark` false the caller marks the point itself (after adjustment).
inline StepResult track_step(const GrayImage& img, const TrackPoint& prev, TrackerState& state, const Config& cfg,
                             bool mark = true) {
  const double d = cfg.search_radius_d;
  if (!detail::has_margin(img, prev.pos, d + 1.0)) return {std::nullopt, Termination::Border};
  const auto best = detail::arc_argmax(prev.pos, d, prev.dir.theta(), cfg.delta_theta, cfg.arc_step,
                                       [&](Point2 p) { return img.sample(p); });
  if (!(best.value > cfg.gray_floor_I0)) return {std::nullopt, Termination::LowIntensity};
  if (state.np_at(best.point) >= cfg.crowd_tau_P) return {std::nullopt, Termination::Crowded};
  const int grace = static_cast<int>(std::ceil(cfg.bif_r2 / d));
  const int cx = static_cast<int>(std::lround(best.point.x)), cy = static_cast<int>(std::lround(best.point.y));
  if (prev.index + 1 > grace && state.first_pass.contains(cx, cy)) {
    const int owner = state.first_pass(cx, cy);
    const int recent = static_cast<int>(std::ceil(2.0 * cfg.neighborhood_radius_P / d)) + 1;
    if (owner >= 0 && (owner != state.pass || state.first_index(cx, cy) < prev.index + 1 - recent)) {
      return {std::nullopt, Termination::Crowded};
    }
  }
  TrackPoint tp;
  tp.raw_pos = best.point;
  tp.pos = best.point;
  tp.dir = Direction2::from_vector(best.point - prev.pos);
  tp.index = prev.index + 1;
  if (mark) mark_visited(state, tp.pos, tp.index, cfg);
  return {tp, Termination::None};
}

/// Re-centers a tracking point between the two nearest contour crossings of
/// the normal through it. Skipped when a side has no crossing or when the
/// shift would exceed the step length d. The shift is perpendicular to the
/// step, so the spacing to the predecessor stays within [d, sqrt(2) d].
/// A cross-section wider than `max_width` (when given) is also skipped.
inline TrackPoint adjust_to_centerline(const TrackPoint& tp, const TrackPoint* prev, const VesselContour& contour,
                                       const Config& cfg, double max_width = 0.0, double* width = nullptr) {
  TrackPoint out = tp;
  out.pos = tp.raw_pos;
  out.adjusted = false;
  const Direction2 normal = Direction2::from_vector(tp.dir.normal());
  RayHit g1, g2;
  if (!nearest_pair(ray_contour_hits(contour, tp.raw_pos, normal), g1, g2)) return out;
  const double cross_section = distance(g1.point, g2.point);
  if (width) *width = cross_section;
  if (max_width > 0.0 && cross_section > max_width) return out;
  const Point2 mid = 0.5 * (g1.point + g2.point);
  if (distance(mid, tp.raw_pos) > cfg.search_radius_d) return out;
  out.pos = mid;
  out.adjusted = true;
  if (prev && distance(mid, prev->pos) > 0.0) out.dir = Direction2::from_vector(mid - prev->pos);
  return out;
}

struct BranchCandidate {
  Point2 point;
  Direction2 dir;
};

/// Searches the fan ring r1 < |P - P_k| < r2, within bif_delta_theta of the
/// tracking direction, for the brightest ridge point that satisfies the
/// branch conditions. On success N_B grows around it and the branch is
/// queued.
inline std::optional<BranchCandidate> detect_bifurcation(const GrayImage& img, const RidgeSet& ridges,
                                                         const TrackPoint& current, const TrackPoint& prev,
                                                         TrackerState& state, const Config& cfg,
                                                         int track_id = -1) {
  const Point2 pk = current.pos;
  const double tk = current.dir.theta(), tk1 = prev.dir.theta();
  const int x0 = std::max(0, static_cast<int>(std::floor(pk.x - cfg.bif_r2)));
  const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(pk.x + cfg.bif_r2)));
  const int y0 = std::max(0, static_cast<int>(std::floor(pk.y - cfg.bif_r2)));
  const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(pk.y + cfg.bif_r2)));
  std::optional<BranchCandidate> best;
  double best_v = 0.0, best_r = 0.0;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (!ridges.contains(x, y)) continue;
      const Point2 pb{double(x), double(y)};
      const double r = distance(pb, pk);
      if (!(r > cfg.bif_r1 && r < cfg.bif_r2)) continue;
      const double tb = std::atan2(pb.y - pk.y, pb.x - pk.x);
      if (angle_distance(tb, tk) > cfg.bif_delta_theta) continue;
      if (!(angle_distance(tb, tk) > cfg.tau_1)) continue;
      if (!(angle_distance(tb, tk1) > cfg.tau_2)) continue;
      if (!(r > cfg.min_branch_dist_d)) continue;
      if (state.nb(x, y) >= cfg.bif_crowd_tau_B) continue;
      if (state.np(x, y) > 0) continue;  // already on a tracked centerline
      const double v = img.at(x, y);
      if (!(v > cfg.gray_floor_I0)) continue;
      if (!best || v > best_v || (v == best_v && r < best_r)) {
        best = BranchCandidate{pb, Direction2::from_vector(pb - pk)};
        best_v = v;
        best_r = r;
      }
    }
  }
  if (best) {
    detail::for_disc(img.width(), img.height(), best->point, cfg.neighborhood_radius_B,
                     [&](int x, int y) { state.nb(x, y) += 1; });
    state.queue.push_back({best->point, best->dir, track_id, state.pass, current.index});
  }
  return best;
}

// ---------------------------------------------------------------------------
// Whole-tree tracking

struct PassResult {
  std::vector<TrackPoint> points;  // points[0] is the starting point
  std::vector<int> branch_ordinals;  // ordinals at which a branch was queued
  std::vector<std::size_t> branch_queue_slots;
  Termination reason = Termination::None;
};

namespace detail {

/// Tracks one direction from `start`. `first` is the first arc point (from
/// the initial direction search) or empty to search from start.dir.
inline PassResult track_pass(const GrayImage& img, const RidgeSet& ridges, const VesselContour& contour,
                             const TrackPoint& start, std::optional<Point2> first, TrackerState& state,
                             const Config& cfg, int track_id) {
  PassResult res;
  res.points.push_back(start);
  const std::size_t cap = static_cast<std::size_t>(img.width()) * img.height() / 4 + 16;
  while (res.points.size() < cap) {
    const TrackPoint& prev = res.points.back();
    StepResult step;
    if (first && res.points.size() == 1) {
      // The initial direction search already chose this point; apply the guards to it.
      const Point2 p = *first;
      if (!(img.sample(p) > cfg.gray_floor_I0)) {
        step.reason = Termination::LowIntensity;
      } else if (state.np_at(p) >= cfg.crowd_tau_P) {
        step.reason = Termination::Crowded;
      } else {
        TrackPoint tp;
        tp.raw_pos = p;
        tp.pos = p;
        tp.dir = Direction2::from_vector(p - prev.pos);
        tp.index = 1;
        step.point = tp;
      }
    } else {
      step = track_step(img, prev, state, cfg, false);
    }
    if (!step.point) {
      res.reason = step.reason;
      break;
    }
    TrackPoint tp = adjust_to_centerline(*step.point, &prev, contour, cfg);
    mark_visited(state, tp.pos, tp.index, cfg);
    res.points.push_back(tp);
    const std::size_t before = state.queue.size();
    if (detect_bifurcation(img, ridges, tp, prev, state, cfg, track_id)) {
      res.branch_ordinals.push_back(tp.index);
      res.branch_queue_slots.push_back(before);
    }
  }
  return res;
}

}  // namespace detail

namespace detail {

/// Where a branch leaves its parent. Branches are found up to r2 beyond the
/// junction, and on narrow forks the arms stay merged for a while, so the
/// detection ordinal `found` can sit well inside an arm. The branch's first
/// steps are extended backwards to where the line crosses the parent
/// polyline (within 2 r2 of `found`); the parent point nearest that crossing
/// is the junction. Without a crossing, the parent point closest to the line
/// is used.
inline int junction_ordinal(const CenterlineTrack& parent, int found, const CenterlineTrack& branch,
                            const Config& cfg) {
  if (branch.points.size() < 2) return found;
  const Point2 b0 = branch.points.front().pos;
  const Point2 b1 = branch.points[std::min<std::size_t>(3, branch.points.size() - 1)].pos;
  if (!(distance(b0, b1) > 0.0)) return found;
  const Point2 u = Direction2::from_vector(b1 - b0).vec();
  const int window = static_cast<int>(std::ceil(2.0 * cfg.bif_r2 / cfg.search_radius_d));
  const int n = static_cast<int>(parent.points.size());
  const int lo = std::max(0, found - window), hi = std::min(n - 1, found + window);
  auto pos = [&](int k) { return parent.points[static_cast<std::size_t>(k)].pos; };

  int best = found;
  double best_t = std::numeric_limits<double>::infinity();
  for (int k = lo; k < hi; ++k) {
    const Point2 p = pos(k), e = pos(k + 1) - pos(k);
    const double den = cross(u, e);
    if (den == 0.0) continue;
    const double t = cross(p - b0, e) / den;    // along the branch line
    const double v = cross(p - b0, u) / den;    // along the parent edge
    if (v < 0.0 || v > 1.0 || t > 0.0) continue;
    if (-t < best_t) {
      best_t = -t;
      best = v <= 0.5 ? k : k + 1;
    }
  }
  if (std::isfinite(best_t)) return best;

  double best_off = std::numeric_limits<double>::infinity();
  for (int k = lo; k <= hi; ++k) {
    const Point2 q = pos(k) - b0;
    if (dot(q, u) > 0.0) continue;
    const double off = std::abs(cross(u, q));
    if (off < best_off || (off == best_off && std::abs(k - found) < std::abs(best - found))) {
      best_off = off;
      best = k;
    }
  }
  return best;
}

}  // namespace detail

struct TrackTreeResult {
  std::vector<CenterlineTrack> tracks;
  int seeds_used = 0;
  std::size_t unvisited_ridges = 0;
};

/// Seeds drawn from a shuffled ridge list (rng_seed) are tracked both ways;
/// queued branches are tracked forward from their branch point. Stops when
/// fewer than unvisited_stop_fraction of the ridge points are unvisited or
/// the seed budget is spent.
inline TrackTreeResult track_tree_full(const GrayImage& img, const RidgeSet& ridges, const VesselContour& contour,
                                       const Config& cfg) {
  if (ridges.empty()) throw Error(ErrorKind::EmptyRidges, "no ridge points to seed tracking");
  TrackerState state(img.width(), img.height());
  Grid<std::uint8_t> tried(img.width(), img.height(), 0);
  std::vector<Point2> order = ridges.points;
  std::mt19937_64 rng(cfg.rng_seed);
  // Fisher-Yates with an explicit draw so the order does not depend on the
  // standard library's shuffle implementation.
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }

  TrackTreeResult out;
  struct Pending {
    int track;
    int ordinal;  // ordinal in the merged parent track
  };
  auto unvisited = [&] {
    std::size_t n = 0;
    for (const auto& p : ridges.points) {
      const int x = int(p.x), y = int(p.y);
      if (state.np(x, y) == 0 && !tried(x, y)) ++n;
    }
    return n;
  };
  const double stop_count = cfg.unvisited_stop_fraction * static_cast<double>(ridges.size());

  // Branch queue entries refer to passes; map a pass to (track, merged ordinal).
  struct PassInfo {
    int track = -1;
    bool reversed = false;
    int offset = 0;  // merged ordinal = reversed ? offset - ordinal : offset + ordinal
  };
  std::vector<PassInfo> passes;

  auto drain_branches = [&](auto&& emit) {
    while (!state.queue.empty()) {
      const BranchSeed b = state.queue.front();
      state.queue.pop_front();
      if (state.np_at(b.point) > 0) continue;
      if (!detail::has_margin(img, b.point, cfg.search_radius_d + 1.0)) continue;
      emit(b);
    }
  };

  std::size_t cursor = 0;
  while (out.seeds_used < cfg.seed_budget && static_cast<double>(unvisited()) >= stop_count) {
    // Next unvisited seed.
    Point2 seed{};
    bool found = false;
    while (cursor < order.size()) {
      const Point2 p = order[cursor++];
      const int x = int(p.x), y = int(p.y);
      if (state.np(x, y) > 0 || tried(x, y)) continue;
      tried(x, y) = 1;
      if (!detail::has_margin(img, p, cfg.search_radius_d + 1.0) || !(img.at(x, y) > cfg.gray_floor_I0)) continue;
      seed = p;
      found = true;
      break;
    }
    if (!found) break;
    ++out.seeds_used;

    const auto init = initial_directions(img, seed, cfg);
    TrackPoint start;
    start.raw_pos = seed;
    start.pos = seed;
    start.dir = init.forward;
    const int track_id = static_cast<int>(out.tracks.size());

    state.pass = static_cast<int>(passes.size());
    passes.push_back({});
    mark_visited(state, seed, 0, cfg);
    auto fwd = detail::track_pass(img, ridges, contour, start, init.p_plus, state, cfg, track_id);
    TrackPoint back_start = start;
    back_start.dir = init.backward;
    state.pass = static_cast<int>(passes.size());
    passes.push_back({});
    auto bwd = detail::track_pass(img, ridges, contour, back_start, init.p_minus, state, cfg, track_id);

    std::vector<std::pair<BranchSeed, int>> spawned;  // branch seed, merged ordinal in this track
    auto assemble = [&](CenterlineTrack& t, const PassResult& f, const PassResult& b) {
      const int nb = static_cast<int>(b.points.size()) - 1;  // backward points excluding the seed
      for (int i = nb; i >= 1; --i) t.points.push_back(b.points[static_cast<std::size_t>(i)]);
      for (const auto& p : f.points) t.points.push_back(p);
      for (std::size_t i = 0; i < t.points.size(); ++i) t.points[i].index = static_cast<int>(i);
      // Directions follow the merged order.
      for (std::size_t i = 1; i < t.points.size(); ++i) {
        if (distance(t.points[i].pos, t.points[i - 1].pos) > 0.0)
          t.points[i].dir = Direction2::from_vector(t.points[i].pos - t.points[i - 1].pos);
      }
      if (t.points.size() > 1 && distance(t.points[1].pos, t.points[0].pos) > 0.0)
        t.points[0].dir = Direction2::from_vector(t.points[1].pos - t.points[0].pos);
      return nb;
    };

    CenterlineTrack track;
    track.id = track_id;
    track.seed = seed;
    track.direction_sign = 0;
    const int nb = assemble(track, fwd, bwd);
    track.start_reason = bwd.reason;
    track.end_reason = fwd.reason;
    const bool keep = track.points.size() >= 2;
    passes[static_cast<std::size_t>(state.pass) - 1] = {keep ? track_id : -1, false, nb};
    passes[static_cast<std::size_t>(state.pass)] = {keep ? track_id : -1, true, nb};
    if (!keep) continue;
    out.tracks.push_back(std::move(track));

    // Branches, breadth-first.
    drain_branches([&](const BranchSeed& b) {
      const int branch_id = static_cast<int>(out.tracks.size());
      TrackPoint bs;
      bs.raw_pos = b.point;
      bs.pos = b.point;
      bs.dir = b.dir;
      state.pass = static_cast<int>(passes.size());
      passes.push_back({branch_id, false, 0});
      mark_visited(state, b.point, 0, cfg);
      auto pr = detail::track_pass(img, ridges, contour, bs, std::nullopt, state, cfg, branch_id);
      CenterlineTrack bt;
      bt.id = branch_id;
      bt.seed = b.point;
      bt.direction_sign = +1;
      bt.parent = b.parent_track;
      assemble(bt, pr, PassResult{});
      bt.start_reason = Termination::None;
      bt.end_reason = pr.reason;
      if (bt.points.size() < static_cast<std::size_t>(cfg.min_segment_points)) {
        passes.back().track = -1;
        return;
      }
      // The branch is real: cut its parent at the junction and let the
      // branch start there.
      const PassInfo& pi = passes[static_cast<std::size_t>(b.parent_pass)];
      if (pi.track >= 0 && pi.track < static_cast<int>(out.tracks.size())) {
        auto& parent = out.tracks[static_cast<std::size_t>(pi.track)];
        const int found = pi.reversed ? pi.offset - b.parent_ordinal : pi.offset + b.parent_ordinal;
        const int ord = detail::junction_ordinal(parent, found, bt, cfg);
        if (ord > 0 && ord + 1 < static_cast<int>(parent.points.size())) {
          parent.cutoffs.push_back({ord, CutoffKind::Bifurcation});
          TrackPoint j = parent.points[static_cast<std::size_t>(ord)];
          if (distance(j.pos, bt.points.front().pos) > 0.0) {
            PassResult joined;
            joined.points.push_back(j);
            joined.points.insert(joined.points.end(), bt.points.begin(), bt.points.end());
            bt.points.clear();
            assemble(bt, joined, PassResult{});
          }
        }
      }
      out.tracks.push_back(std::move(bt));
    });
  }

  for (auto& t : out.tracks) {
    t.cutoffs.push_back({0, CutoffKind::Termination});
    t.cutoffs.push_back({static_cast<int>(t.points.size()) - 1, CutoffKind::Termination});
    std::sort(t.cutoffs.begin(), t.cutoffs.end(), [](const Cutoff& a, const Cutoff& b) { return a.ordinal < b.ordinal; });
    t.cutoffs.erase(std::unique(t.cutoffs.begin(), t.cutoffs.end(),
                                [](const Cutoff& a, const Cutoff& b) { return a.ordinal == b.ordinal; }),
                    t.cutoffs.end());
  }
  out.unvisited_ridges = unvisited();
  return out;
}

inline std::vector<CenterlineTrack> track_tree(const GrayImage& img, const RidgeSet& ridges,
                                               const VesselContour& contour, const Config& cfg) {
  return track_tree_full(img, ridges, contour, cfg).tracks;
}

/// Point runs between consecutive cutoffs (inclusive at both ends).
struct SegmentGeometry {
  int track = 0;
  int first = 0;  // ordinal range within the track
  int last = 0;
  std::vector<TrackPoint> points;
};

inline std::vector<SegmentGeometry> split_segments(const std::vector<CenterlineTrack>& tracks,
                                                   int min_points = 5) {
  std::vector<SegmentGeometry> out;
  for (const auto& t : tracks) {
    if (t.points.empty()) continue;
    std::vector<int> cuts{0};
    for (const auto& c : t.cutoffs)
      if (c.ordinal > 0 && c.ordinal < static_cast<int>(t.points.size()) - 1) cuts.push_back(c.ordinal);
    cuts.push_back(static_cast<int>(t.points.size()) - 1);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      SegmentGeometry s;
      s.track = t.id;
      s.first = cuts[i];
      s.last = cuts[i + 1];
      if (s.last - s.first + 1 < min_points) continue;
      s.points.assign(t.points.begin() + s.first, t.points.begin() + s.last + 1);
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace angio
