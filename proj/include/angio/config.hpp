#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <type_traits>
#include <string>
#include <vector>

#include "json.hpp"

#include "angio/core.hpp"

namespace angio {

struct PreprocessParams {
  double rof_lambda = 0.125;  // TV weight on the [0,1]-normalized image; larger is smoother
  int rof_iters = 100;
  double um_amount = 1.0;
  double um_sigma = 2.0;
  int clahe_tiles = 8;
  double clahe_clip = 0.01;
  std::vector<double> frangi_scales{1.0, 2.0, 3.0, 4.0};
  double frangi_beta = 0.5;
  double frangi_c = 0.0;  // <= 0 selects the per-image adaptive value
};

struct CvParams {
  double mu = 0.2 * 255.0 * 255.0;
  double nu = 0.0;
  double lambda_in = 1.0;
  double lambda_out = 1.0;
  double dt = 0.5;
  double eps = 1.0;
  int max_iters = 300;
  double tol = 1e-3;
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct OverlayStyle {
  Rgb centerline{0, 220, 255};
  Rgb boundary{255, 255, 0};
  Rgb finding{255, 40, 40};
  Rgb contour{60, 200, 60};
};

/// Every tunable of the pipeline. Angles are radians here; config files
/// carry degrees.
struct Config {
  double search_radius_d = 5.0;
  double delta_theta = deg2rad(45.0);
  double bif_r1 = 7.0;
  double bif_r2 = 12.0;
  double bif_delta_theta = deg2rad(135.0);
  double gray_floor_I0 = 10.0;
  int crowd_tau_P = 4;
  double tau_1 = deg2rad(45.0);
  double tau_2 = deg2rad(30.0);
  double min_branch_dist_d = 5.0;
  int bif_crowd_tau_B = 2;
  double stenosis_tau_3 = 0.8;
  double energy_lambda = 10000.0;
  double stop_tau_d = 5.0;
  double neighborhood_radius_P = 5.0;
  double neighborhood_radius_B = 5.0;
  std::uint64_t rng_seed = 1;

  double ridge_sigma = 2.0;
  double ridge_tol = 2.0;
  double arc_step = deg2rad(1.0);
  int seed_budget = 200;
  double unvisited_stop_fraction = 0.01;
  int min_segment_points = 5;
  int min_finding_run = 2;
  double outlier_factor = 4.0;
  double match_radius = 10.0;
  double clahe_weight = 0.5;
  double background_position = 0.5;
  double luminance_sigma = 1.5;
  int lru_capacity = 32;

  PreprocessParams pre;
  CvParams cv;
  OverlayStyle overlay;
};

inline Config config_default() { return Config{}; }

inline void validate(const Config& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorKind::Config, std::string("invalid config: ") + what);
  };
  require(c.search_radius_d > 0, "search_radius_d must be positive");
  require(c.delta_theta > 0, "delta_theta must be positive");
  require(c.bif_r1 > 0 && c.bif_r1 < c.bif_r2, "require 0 < bif_r1 < bif_r2");
  require(c.bif_delta_theta > 0, "bif_delta_theta must be positive");
  require(c.gray_floor_I0 > 0, "gray_floor_I0 must be positive");
  require(c.crowd_tau_P > 0, "crowd_tau_P must be positive");
  require(c.tau_1 > 0 && c.tau_2 > 0, "tau_1 and tau_2 must be positive");
  require(c.min_branch_dist_d > 0, "min_branch_dist_d must be positive");
  require(c.bif_crowd_tau_B > 0, "bif_crowd_tau_B must be positive");
  require(c.stenosis_tau_3 > 0 && c.stenosis_tau_3 < 1, "stenosis_tau_3 must lie in (0,1)");
  require(c.energy_lambda >= 0, "energy_lambda must be non-negative");
  require(c.stop_tau_d > 0, "stop_tau_d must be positive");
  require(c.neighborhood_radius_P > 0 && c.neighborhood_radius_B > 0, "neighborhood radii must be positive");
  require(c.ridge_sigma > 0 && c.ridge_tol >= 0, "ridge_sigma must be positive");
  require(c.arc_step > 0, "arc_step must be positive");
  require(c.seed_budget > 0, "seed_budget must be positive");
  require(c.min_segment_points >= 2, "min_segment_points must be at least 2");
  require(c.min_finding_run >= 1, "min_finding_run must be at least 1");
  require(c.outlier_factor > 1, "outlier_factor must exceed 1");
  require(c.match_radius > 0, "match_radius must be positive");
  require(c.clahe_weight >= 0 && c.clahe_weight <= 1, "clahe_weight must lie in [0,1]");
  require(c.background_position >= 0 && c.background_position <= 1, "background_position must lie in [0,1]");
  require(c.luminance_sigma >= 0, "luminance_sigma must be non-negative");
  require(c.lru_capacity > 0, "lru_capacity must be positive");
  const auto& p = c.pre;
  require(p.rof_lambda > 0 && p.rof_iters > 0, "ROF parameters must be positive");
  require(p.um_amount > 0 && p.um_sigma > 0, "unsharp-mask parameters must be positive");
  require(p.clahe_tiles > 0 && p.clahe_clip > 0, "CLAHE parameters must be positive");
  require(!p.frangi_scales.empty(), "frangi_scales must be nonempty");
  for (std::size_t i = 0; i < p.frangi_scales.size(); ++i) {
    require(p.frangi_scales[i] > 0, "frangi_scales must be positive");
    if (i > 0) require(p.frangi_scales[i] > p.frangi_scales[i - 1], "frangi_scales must be ascending");
  }
  require(p.frangi_beta > 0, "frangi_beta must be positive");
  const auto& v = c.cv;
  require(v.mu > 0 && v.dt > 0 && v.eps > 0 && v.max_iters > 0 && v.tol > 0, "C-V parameters must be positive");
}

namespace detail {

using nlohmann::json;

struct ConfigField {
  std::function<void(Config&, const json&)> set;
  std::function<json(const Config&)> get;
};

template <class T>
T json_as(const std::string& key, const json& v) {
  const bool ok = std::is_integral_v<T> ? v.is_number_integer() : v.is_number();
  if (!ok) {
    throw Error(ErrorKind::Config,
                "config key '" + key + "': expected " + (std::is_integral_v<T> ? "an integer" : "a number"));
  }
  return v.get<T>();
}

inline Rgb json_color(const std::string& key, const json& v) {
  if (!v.is_array() || v.size() != 3 || !std::all_of(v.begin(), v.end(), [](const json& c) {
        return c.is_number_integer() && c.get<int>() >= 0 && c.get<int>() <= 255;
      })) {
    throw Error(ErrorKind::Config, "config key '" + key + "': expected [r, g, b] with 0..255 components");
  }
  return {v[0].get<std::uint8_t>(), v[1].get<std::uint8_t>(), v[2].get<std::uint8_t>()};
}

inline const std::map<std::string, ConfigField, std::less<>>& config_fields() {
  static const std::map<std::string, ConfigField, std::less<>> fields = [] {
    std::map<std::string, ConfigField, std::less<>> m;
    // `pick` selects the sub-struct holding the member.
    auto number = [&](const char* name, auto pick, auto member) {
      using T = std::remove_reference_t<decltype(pick(std::declval<Config&>()).*member)>;
      m[name] = ConfigField{[=](Config& c, const json& v) { pick(c).*member = json_as<T>(name, v); },
                            [=](const Config& c) { return json(pick(const_cast<Config&>(c)).*member); }};
    };
    auto angle = [&](const char* name, auto member) {
      m[name] = ConfigField{[=](Config& c, const json& v) { c.*member = deg2rad(json_as<double>(name, v)); },
                            [=](const Config& c) { return json(rad2deg(c.*member)); }};
    };
    auto color = [&](const char* name, auto member) {
      m[name] = ConfigField{[=](Config& c, const json& v) { c.overlay.*member = json_color(name, v); },
                            [=](const Config& c) {
                              const Rgb x = c.overlay.*member;
                              return json::array({x.r, x.g, x.b});
                            }};
    };
    auto top = [](Config& c) -> Config& { return c; };
    auto pre = [](Config& c) -> PreprocessParams& { return c.pre; };
    auto cv = [](Config& c) -> CvParams& { return c.cv; };

    number("search_radius_d", top, &Config::search_radius_d);
    angle("delta_theta", &Config::delta_theta);
    number("bif_r1", top, &Config::bif_r1);
    number("bif_r2", top, &Config::bif_r2);
    angle("bif_delta_theta", &Config::bif_delta_theta);
    number("gray_floor_I0", top, &Config::gray_floor_I0);
    number("crowd_tau_P", top, &Config::crowd_tau_P);
    angle("tau_1", &Config::tau_1);
    angle("tau_2", &Config::tau_2);
    number("min_branch_dist_d", top, &Config::min_branch_dist_d);
    number("bif_crowd_tau_B", top, &Config::bif_crowd_tau_B);
    number("stenosis_tau_3", top, &Config::stenosis_tau_3);
    number("energy_lambda", top, &Config::energy_lambda);
    number("stop_tau_d", top, &Config::stop_tau_d);
    number("neighborhood_radius_P", top, &Config::neighborhood_radius_P);
    number("neighborhood_radius_B", top, &Config::neighborhood_radius_B);
    number("rng_seed", top, &Config::rng_seed);
    number("ridge_sigma", top, &Config::ridge_sigma);
    number("ridge_tol", top, &Config::ridge_tol);
    angle("arc_step", &Config::arc_step);
    number("seed_budget", top, &Config::seed_budget);
    number("unvisited_stop_fraction", top, &Config::unvisited_stop_fraction);
    number("min_segment_points", top, &Config::min_segment_points);
    number("min_finding_run", top, &Config::min_finding_run);
    number("outlier_factor", top, &Config::outlier_factor);
    number("match_radius", top, &Config::match_radius);
    number("clahe_weight", top, &Config::clahe_weight);
    number("background_position", top, &Config::background_position);
    number("luminance_sigma", top, &Config::luminance_sigma);
    number("lru_capacity", top, &Config::lru_capacity);

    number("rof_lambda", pre, &PreprocessParams::rof_lambda);
    number("rof_iters", pre, &PreprocessParams::rof_iters);
    number("um_amount", pre, &PreprocessParams::um_amount);
    number("um_sigma", pre, &PreprocessParams::um_sigma);
    number("clahe_tiles", pre, &PreprocessParams::clahe_tiles);
    number("clahe_clip", pre, &PreprocessParams::clahe_clip);
    number("frangi_beta", pre, &PreprocessParams::frangi_beta);
    number("frangi_c", pre, &PreprocessParams::frangi_c);
    m["frangi_scales"] = ConfigField{[](Config& c, const json& v) {
                                       if (!v.is_array()) {
                                         throw Error(ErrorKind::Config, "config key 'frangi_scales': expected an array");
                                       }
                                       std::vector<double> scales;
                                       for (const auto& x : v) scales.push_back(json_as<double>("frangi_scales", x));
                                       c.pre.frangi_scales = std::move(scales);
                                     },
                                     [](const Config& c) { return json(c.pre.frangi_scales); }};

    number("cv_mu", cv, &CvParams::mu);
    number("cv_nu", cv, &CvParams::nu);
    number("cv_lambda_in", cv, &CvParams::lambda_in);
    number("cv_lambda_out", cv, &CvParams::lambda_out);
    number("cv_dt", cv, &CvParams::dt);
    number("cv_eps", cv, &CvParams::eps);
    number("cv_max_iters", cv, &CvParams::max_iters);
    number("cv_tol", cv, &CvParams::tol);

    color("overlay_centerline_color", &OverlayStyle::centerline);
    color("overlay_boundary_color", &OverlayStyle::boundary);
    color("overlay_finding_color", &OverlayStyle::finding);
    color("overlay_contour_color", &OverlayStyle::contour);
    return m;
  }();
  return fields;
}

}  // namespace detail

/// Applies a flat JSON object on top of the defaults; unknown keys are errors.
inline Config config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::Config, "config must be a JSON object");
  Config cfg = config_default();
  const auto& fields = detail::config_fields();
  for (const auto& [key, value] : j.items()) {
    const auto it = fields.find(key);
    if (it == fields.end()) throw Error(ErrorKind::Config, "unknown config key '" + key + "'");
    it->second.set(cfg, value);
  }
  validate(cfg);
  return cfg;
}

/// Parses `key = value` lines on top of the defaults. Values are JSON
/// literals (numbers, `[r, g, b]` colors, the frangi_scales list); blank lines
/// and lines starting with '#' are skipped; unknown keys are errors.
inline Config parse_config(const std::string& text) {
  nlohmann::json j = nlohmann::json::object();
  std::istringstream in(text);
  std::string line;
  for (int line_no = 1; std::getline(in, line); ++line_no) {
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(line_no);
    if (eq == std::string::npos) throw Error(ErrorKind::Config, where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!detail::config_fields().count(key)) throw Error(ErrorKind::Config, where + ": unknown key '" + key + "'");
    try {
      j[key] = nlohmann::json::parse(value);
    } catch (const nlohmann::json::parse_error&) {
      throw Error(ErrorKind::Config, where + ": bad value for '" + key + "': " + value);
    }
  }
  return config_from_json(j);
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::NotFound, "cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Every key with its value, angles in degrees.
inline nlohmann::json config_to_json(const Config& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, field] : detail::config_fields()) j[key] = field.get(cfg);
  return j;
}

/// Inverse of parse_config: one `key = value` line per field.
inline std::string format_config(const Config& cfg) {
  const nlohmann::json j = config_to_json(cfg);
  std::string out;
  for (const auto& [key, value] : j.items()) out += key + " = " + value.dump() + "\n";
  return out;
}

}  // namespace angio
