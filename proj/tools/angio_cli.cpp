#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "angio/config.hpp"
#include "angio/evalmetrics.hpp"
#include "angio/image_io.hpp"
#include "angio/interactive.hpp"
#include "angio/phantom.hpp"
#include "angio/pipeline.hpp"
#include "angio/report.hpp"
#include "angio/service.hpp"

namespace fs = std::filesystem;
using namespace angio;

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "Config file of key = value lines; defaults are used when absent");
  cmd->add_option("--seed", o.seed, "Overrides rng_seed");
  cmd->add_option("--out", o.out_dir, "Output directory")->capture_default_str();
}

Config resolve_config(const CommonOptions& o) {
  Config cfg = o.config_path.empty() || !fs::exists(o.config_path) ? config_default() : load_config(o.config_path);
  if (!o.config_path.empty() && !fs::exists(o.config_path)) {
    std::cerr << "config " << o.config_path << " not found, using defaults\n";
  }
  if (o.seed) cfg.rng_seed = *o.seed;
  validate(cfg);
  return cfg;
}

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::NotFound, "cannot write " + p.string());
  out << text;
}

std::string context_name(const std::string& image_path) { return fs::path(image_path).stem().string(); }

int cmd_prepare(const std::string& image, const CommonOptions& o) {
  const Config cfg = resolve_config(o);
  StageTimer timer;
  const GrayImage img = timer.time("load", [&] { return load_gray_image(image); });
  const ImageContext ctx = prepare_image_timed(img, cfg, timer);
  const fs::path dir = o.out_dir;
  fs::create_directories(dir);
  save_png(ctx.stages.denoised, (dir / "denoised.png").string());
  save_png(ctx.stages.sharpened, (dir / "sharpened.png").string());
  save_png(ctx.stages.equalized, (dir / "equalized.png").string());
  save_png(ctx.stages.vessel, (dir / "vesselness.png").string());
  save_png(ctx.stages.tracking, (dir / "tracking.png").string());
  write_text(dir / "context.json", dump({{"context", context_name(image)},
                                         {"width", img.width()},
                                         {"height", img.height()},
                                         {"ridge_points", ctx.ridges.size()},
                                         {"contour", to_json(ctx.contour)}}));
  write_text(dir / "timing.json", dump(timer.to_json()));
  std::cout << "prepared " << image << ": " << ctx.ridges.size() << " ridge points, " << ctx.contour.polygons.size()
            << " contour polygons -> " << dir.string() << "\n";
  return 0;
}

int cmd_auto(const std::string& image, const CommonOptions& o) {
  const Config cfg = resolve_config(o);
  StageTimer timer;
  const GrayImage img = timer.time("load", [&] { return load_gray_image(image); });
  const ImageContext ctx = prepare_image_timed(img, cfg, timer);
  const AutoAnalysis a = run_auto(ctx, cfg, &timer);
  timer.time("write", [&] { write_outputs(o.out_dir, context_name(image), ctx, a, cfg); });
  write_text(fs::path(o.out_dir) / "timing.json", dump(timer.to_json()));
  std::cout << a.tracks.size() << " tracks, " << a.segments.size() << " segments, " << a.findings.size()
            << " findings -> " << o.out_dir << "\n";
  for (const auto& f : a.findings) {
    std::printf("  segment %d at (%.1f, %.1f): min degree %.3f\n", f.segment_id, f.location.x, f.location.y,
                f.min_degree);
  }
  return 0;
}

int cmd_segment(const std::string& image, const std::vector<double>& start, const std::vector<double>& end,
                const CommonOptions& o) {
  const Config cfg = resolve_config(o);
  StageTimer timer;
  const GrayImage img = timer.time("load", [&] { return load_gray_image(image); });
  const ImageContext ctx = prepare_image_timed(img, cfg, timer);
  const InteractiveRequest req{{start[0], start[1]}, {end[0], end[1]}};
  const fs::path dir = o.out_dir;
  try {
    const RouteResult r = timer.time(
        "route", [&] { return track_segment(ctx.stages.tracking, ctx.ridges, ctx.contour, req, cfg); });
    write_text(dir / "route.json", dump(to_json(r)));
    write_text(dir / "diameters.csv", diameter_csv(r.segment));
    write_text(dir / "timing.json", dump(timer.to_json()));
    std::printf("%s route with %zu points, mean diameter %.2f, %zu findings\n", to_string(r.chosen_direction),
                r.route.size(), r.segment.mean_diameter, r.findings.size());
    return 0;
  } catch (const UnreachableEndpoint& e) {
    write_text(dir / "route.json",
               dump({{"error", "unreachable"}, {"forward", to_json(e.forward())}, {"backward", to_json(e.backward())}}));
    throw;
  }
}

int cmd_eval(const CommonOptions& o, std::uint64_t render_seed) {
  const Config cfg = resolve_config(o);
  const fs::path dir = o.out_dir;
  nlohmann::json phantoms = nlohmann::json::array();
  std::vector<std::pair<std::string, REStats>> rows;
  std::vector<double> all_re;
  int tp = 0, fn = 0, fp = 0;
  for (const auto& entry : standard_suite()) {
    const auto [img, truth] = render_phantom(entry.spec, render_seed);
    StageTimer timer;
    const ImageContext ctx = prepare_image_timed(img, cfg, timer);
    const AutoAnalysis a = run_auto(ctx, cfg, &timer);
    std::vector<double> re;
    for (const auto& s : a.segments) {
      const auto stats = segment_relative_error(s, truth);
      re.insert(re.end(), stats.values.begin(), stats.values.end());
    }
    const REStats stats = re_stats(re);
    all_re.insert(all_re.end(), re.begin(), re.end());
    rows.emplace_back(entry.spec.name, stats);
    const DetectionOutcome outcome = match_findings(a.findings, truth.stenoses, cfg.match_radius);
    tp += outcome.tp;
    fn += outcome.fn;
    fp += outcome.fp;
    phantoms.push_back({{"name", entry.spec.name},
                        {"category", to_string(entry.category)},
                        {"segments", a.segments.size()},
                        {"relative_error", to_json(stats)},
                        {"detection", to_json(outcome)},
                        {"timing_ms", timer.to_json()}});
  }
  const REStats overall = re_stats(all_re);
  rows.emplace_back("all", overall);
  const DetectionScores scores = sen_pre_f1(tp, fn, fp);
  write_text(dir / "eval.json", dump({{"phantoms", phantoms},
                                      {"relative_error", to_json(overall)},
                                      {"detection", {{"tp", tp}, {"fn", fn}, {"fp", fp}}},
                                      {"scores", to_json(scores)}}));
  const std::string table = format_re_table(rows);
  write_text(dir / "relative_error.txt", table);
  std::cout << table;
  auto show = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("undefined"); };
  std::cout << "detection: TP " << tp << " FN " << fn << " FP " << fp << "  Sen " << show(scores.sen) << " Pre "
            << show(scores.pre) << " F1 " << show(scores.f1) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coronary angiogram stenosis analysis"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string image;
  std::vector<double> start, end;
  std::uint64_t render_seed = 7;
  std::string host = "127.0.0.1", static_dir;
  int port = 8080;

  auto* prepare = app.add_subcommand("prepare", "Preprocess an image and extract ridges and contours");
  prepare->add_option("image", image, "8-bit grayscale PNG or PGM")->required();
  add_common(prepare, common);

  auto* automatic = app.add_subcommand("auto", "Track the whole vessel tree and report stenoses");
  automatic->add_option("image", image, "8-bit grayscale PNG or PGM")->required();
  add_common(automatic, common);

  auto* segment = app.add_subcommand("analyze-segment", "Track and analyze the segment between two points");
  segment->add_option("image", image, "8-bit grayscale PNG or PGM")->required();
  segment->add_option("--start", start, "Start point as x,y")->delimiter(',')->expected(2)->required();
  segment->add_option("--end", end, "End point as x,y")->delimiter(',')->expected(2)->required();
  add_common(segment, common);

  auto* eval = app.add_subcommand("eval-phantoms", "Run the automatic pipeline on the phantom suite");
  eval->add_option("--render-seed", render_seed, "Noise seed for phantom rendering")->capture_default_str();
  add_common(eval, common);

  auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API");
  serve_cmd->add_option("--host", host)->capture_default_str();
  serve_cmd->add_option("--port", port)->capture_default_str();
  serve_cmd->add_option("--static", static_dir, "Directory served at /");
  add_common(serve_cmd, common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prepare) return cmd_prepare(image, common);
    if (*automatic) return cmd_auto(image, common);
    if (*segment) return cmd_segment(image, start, end, common);
    if (*eval) return cmd_eval(common, render_seed);
    if (*serve_cmd) {
      std::cout << "listening on http://" << host << ":" << port << "\n" << std::flush;
      if (!serve(resolve_config(common), host, port, static_dir)) {
        std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
        return 1;
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
