#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "angio/config.hpp"
#include "angio/core.hpp"
#include "angio/filters.hpp"

namespace angio {

struct HessianEigen {
  double lambda1 = 0.0;  // |lambda1| <= |lambda2|
  double lambda2 = 0.0;
  Direction2 principal_dir;  // eigenvector of lambda1, i.e. along the vessel
};

/// Discrete isotropic total variation with forward differences and
/// replicated borders.
inline double total_variation(const GrayImage& img) {
  double tv = 0.0;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double gx = x + 1 < img.width() ? img.at(x + 1, y) - img.at(x, y) : 0.0;
      const double gy = y + 1 < img.height() ? img.at(x, y + 1) - img.at(x, y) : 0.0;
      tv += std::hypot(gx, gy);
    }
  }
  return tv;
}

/// ROF denoising by Chambolle's dual projection with a fixed iteration count.
/// Works on the image scaled to [0,1]; rof_lambda is the TV weight there.
inline GrayImage rof_denoise(const GrayImage& img, const PreprocessParams& params) {
  constexpr double tau = 0.248;
  const int w = img.width(), h = img.height();
  const double lambda = params.rof_lambda;
  std::vector<double> f(img.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = img.data()[i] / 255.0;
  std::vector<double> px(f.size(), 0.0), py(f.size(), 0.0), div(f.size(), 0.0), t(f.size(), 0.0);
  auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };

  auto compute_div = [&] {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto i = idx(x, y);
        double d = 0.0;
        if (x < w - 1) d += px[i];
        if (x > 0) d -= px[idx(x - 1, y)];
        if (y < h - 1) d += py[i];
        if (y > 0) d -= py[idx(x, y - 1)];
        div[i] = d;
      }
    }
  };

  for (int it = 0; it < params.rof_iters; ++it) {
    compute_div();
    for (std::size_t i = 0; i < f.size(); ++i) t[i] = div[i] - f[i] / lambda;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto i = idx(x, y);
        const double gx = x < w - 1 ? t[idx(x + 1, y)] - t[i] : 0.0;
        const double gy = y < h - 1 ? t[idx(x, y + 1)] - t[i] : 0.0;
        const double denom = 1.0 + tau * std::hypot(gx, gy);
        px[i] = (px[i] + tau * gx) / denom;
        py[i] = (py[i] + tau * gy) / denom;
      }
    }
  }
  compute_div();
  GrayImage out(w, h);
  for (std::size_t i = 0; i < f.size(); ++i) {
    out.data()[i] = std::clamp(255.0 * (f[i] - lambda * div[i]), 0.0, 255.0);
  }
  return out;
}

inline GrayImage unsharp_mask(const GrayImage& img, const PreprocessParams& params) {
  const GrayImage blurred = gaussian_blur(img, params.um_sigma);
  GrayImage out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = img.data()[i];
    out.data()[i] = std::clamp(v + params.um_amount * (v - blurred.data()[i]), 0.0, 255.0);
  }
  return out;
}

/// Per-tile equalization lookup table: 256 entries mapping a bin to [0, 255].
using ClaheMap = std::array<double, 256>;

/// Builds the clipped-histogram equalization map for a set of intensities.
inline ClaheMap clahe_tile_map(const std::vector<double>& values, double clip) {
  std::array<double, 256> hist{};
  for (double v : values) hist[static_cast<std::size_t>(std::lround(std::clamp(v, 0.0, 255.0)))] += 1.0;
  const double n = static_cast<double>(values.size());
  const double limit = std::max(1.0, clip * n);
  double excess = 0.0;
  for (auto& b : hist) {
    if (b > limit) {
      excess += b - limit;
      b = limit;
    }
  }
  const double share = excess / 256.0;
  ClaheMap map{};
  double cdf = 0.0;
  for (std::size_t i = 0; i < 256; ++i) {
    cdf += hist[i] + share;
    map[i] = 255.0 * cdf / n;
  }
  return map;
}

/// Tile maps laid out row-major over the tiles x tiles grid, exposed for tests.
inline std::vector<ClaheMap> clahe_maps(const GrayImage& img, const PreprocessParams& params) {
  const int tiles = params.clahe_tiles;
  std::vector<ClaheMap> maps;
  maps.reserve(static_cast<std::size_t>(tiles) * tiles);
  for (int ty = 0; ty < tiles; ++ty) {
    const int y0 = ty * img.height() / tiles, y1 = (ty + 1) * img.height() / tiles;
    for (int tx = 0; tx < tiles; ++tx) {
      const int x0 = tx * img.width() / tiles, x1 = (tx + 1) * img.width() / tiles;
      std::vector<double> values;
      values.reserve(static_cast<std::size_t>(x1 - x0) * (y1 - y0));
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) values.push_back(img.at(x, y));
      maps.push_back(clahe_tile_map(values, params.clahe_clip));
    }
  }
  return maps;
}

inline GrayImage clahe(const GrayImage& img, const PreprocessParams& params) {
  const int tiles = params.clahe_tiles;
  if (img.width() < tiles || img.height() < tiles) {
    throw Error(ErrorKind::InvalidArgument, "image smaller than the CLAHE tile grid");
  }
  const auto maps = clahe_maps(img, params);
  auto center = [tiles](int t, int extent) {
    const int a = t * extent / tiles, b = (t + 1) * extent / tiles;
    return 0.5 * (a + b - 1);
  };
  auto lookup = [&](int tx, int ty, double v) {
    const auto& m = maps[static_cast<std::size_t>(ty) * tiles + tx];
    const double c = std::clamp(v, 0.0, 255.0);
    const int lo = static_cast<int>(std::floor(c));
    const int hi = std::min(lo + 1, 255);
    const double f = c - lo;
    return m[lo] * (1.0 - f) + m[hi] * f;
  };
  // Locate the pair of tile centers bracketing a coordinate.
  auto bracket = [&](double p, int extent, int& t0, int& t1, double& frac) {
    t0 = 0;
    while (t0 + 1 < tiles && center(t0 + 1, extent) <= p) ++t0;
    t1 = std::min(t0 + 1, tiles - 1);
    const double c0 = center(t0, extent), c1 = center(t1, extent);
    frac = (t1 == t0 || p <= c0) ? 0.0 : std::min(1.0, (p - c0) / (c1 - c0));
  };
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    int ty0, ty1;
    double fy;
    bracket(y, img.height(), ty0, ty1, fy);
    for (int x = 0; x < img.width(); ++x) {
      int tx0, tx1;
      double fx;
      bracket(x, img.width(), tx0, tx1, fx);
      const double v = img.at(x, y);
      const double top = lookup(tx0, ty0, v) * (1.0 - fx) + lookup(tx1, ty0, v) * fx;
      const double bottom = lookup(tx0, ty1, v) * (1.0 - fx) + lookup(tx1, ty1, v) * fx;
      out.at(x, y) = std::clamp(top * (1.0 - fy) + bottom * fy, 0.0, 255.0);
    }
  }
  return out;
}

/// Scale-normalized (sigma^2) Hessian at one point, by direct Gaussian
/// second-derivative correlation.
inline HessianEigen hessian_at(const GrayImage& img, Point2 p, double sigma) {
  const double margin = 3.0 * sigma;
  if (p.x < margin || p.y < margin || p.x > img.width() - 1 - margin || p.y > img.height() - 1 - margin) {
    throw Error(ErrorKind::Border, "point too close to the image border for the Hessian scale");
  }
  const int cx = static_cast<int>(std::lround(p.x));
  const int cy = static_cast<int>(std::lround(p.y));
  const Kernel1D g = gaussian_kernel(sigma);
  const Kernel1D d1 = gaussian_d1_kernel(sigma);
  const Kernel1D d2 = gaussian_d2_kernel(sigma);
  const int r = g.radius;
  double hxx = 0.0, hxy = 0.0, hyy = 0.0;
  for (int j = -r; j <= r; ++j) {
    for (int i = -r; i <= r; ++i) {
      const double v = img.at_mirror(cx + i, cy + j);
      hxx += v * d2[i] * g[j];
      hxy += v * d1[i] * d1[j];
      hyy += v * g[i] * d2[j];
    }
  }
  const double s2 = sigma * sigma;
  const SymEigen2 e = sym_eigen2(s2 * hxx, s2 * hxy, s2 * hyy);
  return {e.lambda1, e.lambda2, Direction2::from_vector(e.v1)};
}

/// Frangi tubular response for one eigen pair (bright vessels only).
inline double frangi_response(double lambda1, double lambda2, double beta, double c) {
  if (lambda2 >= 0.0) return 0.0;
  const double rb = lambda1 / lambda2;
  const double s2 = lambda1 * lambda1 + lambda2 * lambda2;
  return std::exp(-rb * rb / (2.0 * beta * beta)) * (1.0 - std::exp(-s2 / (2.0 * c * c)));
}

/// Multiscale vesselness, rescaled so the strongest response maps to 255.
inline GrayImage vesselness(const GrayImage& img, const PreprocessParams& params) {
  const int w = img.width(), h = img.height();
  GrayImage response(w, h, 0.0);
  double c = params.frangi_c;
  for (std::size_t si = 0; si < params.frangi_scales.size(); ++si) {
    const double sigma = params.frangi_scales[si];
    const double s2 = sigma * sigma;
    const Kernel1D g = gaussian_kernel(sigma);
    const Kernel1D d1 = gaussian_d1_kernel(sigma);
    const Kernel1D d2 = gaussian_d2_kernel(sigma);
    const GrayImage hxx = correlate_separable(img, d2, g);
    const GrayImage hxy = correlate_separable(img, d1, d1);
    const GrayImage hyy = correlate_separable(img, g, d2);
    if (si == 0 && !(c > 0.0)) {
      double max_norm = 0.0;
      for (std::size_t i = 0; i < img.size(); ++i) {
        const double a = s2 * hxx.data()[i], b = s2 * hxy.data()[i], d = s2 * hyy.data()[i];
        max_norm = std::max(max_norm, std::sqrt(a * a + 2.0 * b * b + d * d));
      }
      // Round-off from the derivative taps is not structure.
      const double scale = std::max(1.0, *std::max_element(img.data().begin(), img.data().end()));
      c = max_norm > 1e-9 * scale ? 0.5 * max_norm : 0.0;
    }
    if (!(c > 0.0)) return GrayImage(w, h, 0.0);
    for (std::size_t i = 0; i < img.size(); ++i) {
      const SymEigen2 e = sym_eigen2(s2 * hxx.data()[i], s2 * hxy.data()[i], s2 * hyy.data()[i]);
      const double v = frangi_response(e.lambda1, e.lambda2, params.frangi_beta, c);
      response.data()[i] = std::max(response.data()[i], v);
    }
  }
  const double peak = *std::max_element(response.data().begin(), response.data().end());
  if (peak > 0.0) {
    for (auto& v : response.data()) v = 255.0 * v / peak;
  }
  return response;
}

/// Intensity quantile (q in [0,1], nearest-rank on the lower side).
inline double intensity_quantile(const GrayImage& img, double q) {
  std::vector<double> v = img.data();
  const auto k = static_cast<std::ptrdiff_t>(std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1));
  std::nth_element(v.begin(), v.begin() + k, v.end());
  return v[static_cast<std::size_t>(k)];
}

inline double median_intensity(const GrayImage& img) { return intensity_quantile(img, 0.5); }

/// Threshold that starts at the given percentile and is moved to the
/// midpoint of the two class means until it settles (two-means clustering,
/// i.e. the region term alone). Returns the threshold.
inline double two_means_threshold(const GrayImage& img, double percentile = 85.0) {
  std::vector<double> v = img.data();
  const auto k = static_cast<std::size_t>(std::clamp(percentile / 100.0, 0.0, 1.0) * (v.size() - 1));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  double thr = v[k];
  for (int it = 0; it < 100; ++it) {
    double s1 = 0, n1 = 0, s2 = 0, n2 = 0;
    for (double x : img.data()) {
      (x > thr ? s1 : s2) += x;
      (x > thr ? n1 : n2) += 1;
    }
    if (n1 == 0 || n2 == 0) break;
    const double next = 0.5 * (s1 / n1 + s2 / n2);
    if (std::abs(next - thr) < 1e-9) break;
    thr = next;
  }
  return thr;
}

/// Background level of the equalized image: the two-means threshold splits
/// it into background and foreground classes, and the level sits at
/// `position` of the way from the background-class mean to the threshold.
/// CLAHE leaves a long bright tail in the background next to vessels; a
/// level inside that tail removes it from the luminance term.
inline double background_level(const GrayImage& equalized, double position) {
  const double thr = two_means_threshold(equalized);
  double sum = 0.0;
  std::size_t n = 0;
  for (double v : equalized.data()) {
    if (v <= thr) {
      sum += v;
      ++n;
    }
  }
  const double mean = n > 0 ? sum / static_cast<double>(n) : thr;
  return mean + position * (thr - mean);
}

/// Blend used for ridge detection, tracking and contouring: the equalized
/// luminance with its background level removed and lightly smoothed, mixed with the vesselness
/// response.
inline GrayImage tracking_blend(const GrayImage& equalized, const GrayImage& vessel, double clahe_weight,
                                double background_position, double luminance_sigma) {
  const double bg = background_level(equalized, background_position);
  const double span = std::max(1.0, 255.0 - bg);
  GrayImage level(equalized.width(), equalized.height());
  for (std::size_t i = 0; i < level.size(); ++i)
    level.data()[i] = std::clamp((equalized.data()[i] - bg) * 255.0 / span, 0.0, 255.0);
  // Unsharp masking leaves bright rims inside wide vessels; smoothing the
  // luminance keeps the blend peaked on the vessel axis.
  if (luminance_sigma > 0.0) level = gaussian_blur(level, luminance_sigma);
  GrayImage out(equalized.width(), equalized.height());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = std::clamp(clahe_weight * level.data()[i] + (1.0 - clahe_weight) * vessel.data()[i], 0.0, 255.0);
  return out;
}

struct PreprocessStages {
  GrayImage denoised;
  GrayImage sharpened;
  GrayImage equalized;
  GrayImage vessel;
  GrayImage tracking;  // the blend every later stage consumes
};

inline PreprocessStages preprocess(const GrayImage& img, const Config& cfg) {
  PreprocessStages s;
  s.denoised = rof_denoise(img, cfg.pre);
  s.sharpened = unsharp_mask(s.denoised, cfg.pre);
  s.equalized = clahe(s.sharpened, cfg.pre);
  s.vessel = vesselness(s.equalized, cfg.pre);
  s.tracking = tracking_blend(s.equalized, s.vessel, cfg.clahe_weight, cfg.background_position, cfg.luminance_sigma);
  return s;
}

}  // namespace angio
