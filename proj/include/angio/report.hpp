#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "angio/config.hpp"
#include "angio/image_io.hpp"
#include "angio/interactive.hpp"
#include "angio/pipeline.hpp"
#include "angio/quant.hpp"
#include "angio/tracker.hpp"

namespace angio {

/// Wall-clock durations of named stages, in insertion order.
class StageTimer {
 public:
  template <typename F>
  decltype(auto) time(const std::string& stage, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    struct Record {
      StageTimer* self;
      std::string stage;
      std::chrono::steady_clock::time_point t0;
      ~Record() {
        self->stages_.emplace_back(
            stage, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
      }
    } record{this, stage, t0};
    return f();
  }
  const std::vector<std::pair<std::string, double>>& stages() const { return stages_; }
  double total_ms() const {
    double t = 0.0;
    for (const auto& s : stages_) t += s.second;
    return t;
  }
  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, ms] : stages_) j[name] = ms;
    j["total"] = total_ms();
    return j;
  }

 private:
  std::vector<std::pair<std::string, double>> stages_;
};

struct AutoAnalysis {
  std::vector<CenterlineTrack> tracks;
  std::vector<VesselSegment> segments;
  std::vector<StenosisFinding> findings;
};

inline AutoAnalysis run_auto(const ImageContext& ctx, const Config& cfg, StageTimer* timer = nullptr) {
  StageTimer local;
  StageTimer& t = timer ? *timer : local;
  AutoAnalysis a;
  a.tracks = t.time("track", [&] { return track_tree(ctx.stages.tracking, ctx.ridges, ctx.contour, cfg); });
  a.segments = t.time("quantify", [&] { return quantify_tracks(a.tracks, ctx.contour, cfg); });
  a.findings = t.time("stenosis", [&] { return find_all_stenoses(a.segments, cfg); });
  return a;
}

inline ImageContext prepare_image_timed(const GrayImage& input, const Config& cfg, StageTimer& timer) {
  return timer.time("prepare", [&] { return prepare_image(input, cfg); });
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(Point2 p) { return nlohmann::json::array({p.x, p.y}); }

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json to_json(const StenosisFinding& f) {
  return {{"segment", f.segment_id},
          {"range", {f.range_first, f.range_last}},
          {"location", to_json(f.location)},
          {"min_degree", f.min_degree},
          {"mean_degree", f.mean_degree}};
}

inline nlohmann::json to_json(const VesselSegment& s) {
  nlohmann::json points = nlohmann::json::array(), diameters = nlohmann::json::array(),
                 degrees = nlohmann::json::array();
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    points.push_back(to_json(s.points[i].pos));
    diameters.push_back(optional_json(s.diameters[i]));
    degrees.push_back(optional_json(s.degrees[i]));
  }
  return {{"id", s.id},
          {"track", s.source_track},
          {"range", {s.first, s.last}},
          {"mean_diameter", s.mean_diameter},
          {"points", points},
          {"diameters", diameters},
          {"degrees", degrees}};
}

inline nlohmann::json to_json(const CenterlineTrack& t) {
  nlohmann::json points = nlohmann::json::array(), cutoffs = nlohmann::json::array();
  for (const auto& p : t.points) {
    points.push_back(
        {{"pos", to_json(p.pos)}, {"raw", to_json(p.raw_pos)}, {"dir", p.dir.theta()}, {"adjusted", p.adjusted}});
  }
  for (const auto& c : t.cutoffs) cutoffs.push_back({{"ordinal", c.ordinal}, {"kind", to_string(c.kind)}});
  return {{"id", t.id},
          {"parent", t.parent},
          {"seed", to_json(t.seed)},
          {"start_reason", to_string(t.start_reason)},
          {"end_reason", to_string(t.end_reason)},
          {"points", points},
          {"cutoffs", cutoffs}};
}

inline nlohmann::json to_json(const VesselContour& c) {
  nlohmann::json polys = nlohmann::json::array();
  for (const auto& p : c.polygons) {
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& q : p.points) pts.push_back(to_json(q));
    polys.push_back({{"outer", p.outer}, {"points", pts}});
  }
  return {{"polygons", polys}};
}

/// Deterministic analysis report: no timing and no wall-clock data.
inline nlohmann::json report_json(const std::string& context_id, const ImageContext& ctx, const AutoAnalysis& a) {
  nlohmann::json tracks = nlohmann::json::array(), segments = nlohmann::json::array(),
                 findings = nlohmann::json::array();
  for (const auto& t : a.tracks) tracks.push_back(to_json(t));
  for (const auto& s : a.segments) segments.push_back(to_json(s));
  for (const auto& f : a.findings) findings.push_back(to_json(f));
  return {{"context", context_id},
          {"width", ctx.input.width()},
          {"height", ctx.input.height()},
          {"ridge_points", ctx.ridges.size()},
          {"tracks", tracks},
          {"segments", segments},
          {"findings", findings}};
}

inline nlohmann::json to_json(const RouteAttempt& a) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : a.points) pts.push_back(to_json(p.pos));
  return {{"points", pts}, {"reached", a.reached}, {"reason", to_string(a.reason)}};
}

inline nlohmann::json to_json(const RouteResult& r) {
  nlohmann::json findings = nlohmann::json::array();
  for (const auto& f : r.findings) findings.push_back(to_json(f));
  return {{"start", to_json(r.start)},
          {"end", to_json(r.end)},
          {"direction", to_string(r.chosen_direction)},
          {"degenerate", r.degenerate},
          {"segment", to_json(r.segment)},
          {"findings", findings},
          {"forward", to_json(r.forward)},
          {"backward", to_json(r.backward)}};
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// CSV and overlay

inline std::string diameter_csv(const VesselSegment& s) {
  std::string out = "ordinal,x,y,diameter,degree\n";
  char buf[160];
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.3f,%.3f,", i, s.points[i].pos.x, s.points[i].pos.y);
    out += buf;
    if (s.diameters[i]) {
      std::snprintf(buf, sizeof buf, "%.4f,%.4f\n", *s.diameters[i], *s.degrees[i]);
      out += buf;
    } else {
      out += ",\n";
    }
  }
  return out;
}

namespace detail {

inline void draw_line(RgbImage& img, Point2 a, Point2 b, Rgb c) {
  const double len = distance(a, b);
  const int n = std::max(1, static_cast<int>(std::ceil(len * 2.0)));
  for (int i = 0; i <= n; ++i) {
    const Point2 p = a + (static_cast<double>(i) / n) * (b - a);
    img.set(static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y)), c.r, c.g, c.b);
  }
}

inline void fill_disc(RgbImage& img, Point2 c, double r, Rgb color) {
  for_disc(img.width, img.height, c, r, [&](int x, int y) { img.set(x, y, color.r, color.g, color.b); });
}

}  // namespace detail

/// Overlay on the preprocessed image: contour, centerlines, segment
/// boundaries, and findings as discs whose radius grows with the narrowing.
inline RgbImage render_overlay(const ImageContext& ctx, const AutoAnalysis& a, const OverlayStyle& style) {
  const GrayImage& base = ctx.stages.equalized;
  RgbImage img(base.width(), base.height());
  for (int y = 0; y < base.height(); ++y)
    for (int x = 0; x < base.width(); ++x) {
      const auto v = detail::to_byte(base.at(x, y));
      img.set(x, y, v, v, v);
    }
  for (const auto& poly : ctx.contour.polygons)
    for (std::size_t i = 0; i + 1 < poly.points.size(); ++i)
      detail::draw_line(img, poly.points[i], poly.points[i + 1], style.contour);
  for (const auto& s : a.segments)
    for (std::size_t i = 0; i + 1 < s.points.size(); ++i)
      detail::draw_line(img, s.points[i].pos, s.points[i + 1].pos, style.centerline);
  for (const auto& s : a.segments) {
    detail::fill_disc(img, s.points.front().pos, 1.5, style.boundary);
    detail::fill_disc(img, s.points.back().pos, 1.5, style.boundary);
  }
  for (const auto& f : a.findings) detail::fill_disc(img, f.location, 3.0 + 12.0 * (1.0 - f.min_degree), style.finding);
  return img;
}

/// Writes report.json, one diameters CSV per segment, and overlay.png.
inline void write_outputs(const std::filesystem::path& dir, const std::string& context_id, const ImageContext& ctx,
                          const AutoAnalysis& a, const Config& cfg) {
  std::filesystem::create_directories(dir);
  auto write_text = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorKind::NotFound, "cannot write " + p.string());
    out << text;
  };
  write_text(dir / "report.json", dump(report_json(context_id, ctx, a)));
  for (const auto& s : a.segments) {
    char name[64];
    std::snprintf(name, sizeof name, "diameters_%03d.csv", s.id);
    write_text(dir / name, diameter_csv(s));
  }
  save_png(render_overlay(ctx, a, cfg.overlay), (dir / "overlay.png").string());
}

}  // namespace angio
