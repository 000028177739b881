#pragma once

#include <cmath>
#include <vector>

#include "angio/core.hpp"

namespace angio {

/// Sampled 1-D kernel on offsets [-radius, radius].
struct Kernel1D {
  int radius = 0;
  std::vector<double> taps;  // taps[k + radius] is the weight at offset k
  double operator[](int k) const { return taps[static_cast<std::size_t>(k + radius)]; }
};

inline int gaussian_radius(double sigma) { return std::max(1, static_cast<int>(std::ceil(3.0 * sigma))); }

/// Normalized Gaussian (weights sum to 1).
inline Kernel1D gaussian_kernel(double sigma) {
  Kernel1D k;
  k.radius = gaussian_radius(sigma);
  k.taps.resize(2 * k.radius + 1);
  double sum = 0.0;
  for (int i = -k.radius; i <= k.radius; ++i) {
    k.taps[i + k.radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k.taps[i + k.radius];
  }
  for (auto& t : k.taps) t /= sum;
  return k;
}

/// First-derivative-of-Gaussian taps for correlation: sum_k f(x+k) h(k)
/// returns exactly 1 on f(x) = x.
inline Kernel1D gaussian_d1_kernel(double sigma) {
  const Kernel1D g = gaussian_kernel(sigma);
  Kernel1D k{g.radius, std::vector<double>(g.taps.size())};
  double moment = 0.0;
  for (int i = -k.radius; i <= k.radius; ++i) {
    k.taps[i + k.radius] = i / (sigma * sigma) * g[i];
    moment += i * k.taps[i + k.radius];
  }
  for (auto& t : k.taps) t /= moment;
  return k;
}

/// Second-derivative-of-Gaussian taps: zero sum, and exactly 2 on f(x) = x^2.
inline Kernel1D gaussian_d2_kernel(double sigma) {
  const Kernel1D g = gaussian_kernel(sigma);
  Kernel1D k{g.radius, std::vector<double>(g.taps.size())};
  const double s2 = sigma * sigma;
  double mean = 0.0;
  for (int i = -k.radius; i <= k.radius; ++i) {
    k.taps[i + k.radius] = (i * i / (s2 * s2) - 1.0 / s2) * g[i];
    mean += k.taps[i + k.radius];
  }
  mean /= static_cast<double>(k.taps.size());
  double moment = 0.0;
  for (int i = -k.radius; i <= k.radius; ++i) {
    k.taps[i + k.radius] -= mean;
    moment += static_cast<double>(i) * i * k.taps[i + k.radius];
  }
  for (auto& t : k.taps) t *= 2.0 / moment;
  return k;
}

/// Separable correlation with mirror padding: rows with kx, then columns with ky.
inline GrayImage correlate_separable(const GrayImage& img, const Kernel1D& kx, const Kernel1D& ky) {
  const int w = img.width(), h = img.height();
  GrayImage tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -kx.radius; k <= kx.radius; ++k) acc += img.at_mirror(x + k, y) * kx[k];
      tmp.at(x, y) = acc;
    }
  }
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -ky.radius; k <= ky.radius; ++k) acc += tmp.at_mirror(x, y + k) * ky[k];
      out.at(x, y) = acc;
    }
  }
  return out;
}

inline GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  const Kernel1D g = gaussian_kernel(sigma);
  return correlate_separable(img, g, g);
}

/// Gaussian-derivative fields of an image at one scale (not scale-normalized).
struct DerivativeFields {
  GrayImage dx, dy, dxx, dxy, dyy;
};

inline DerivativeFields gaussian_derivatives(const GrayImage& img, double sigma) {
  const Kernel1D g = gaussian_kernel(sigma);
  const Kernel1D d1 = gaussian_d1_kernel(sigma);
  const Kernel1D d2 = gaussian_d2_kernel(sigma);
  return {correlate_separable(img, d1, g), correlate_separable(img, g, d1), correlate_separable(img, d2, g),
          correlate_separable(img, d1, d1), correlate_separable(img, g, d2)};
}

/// Eigen-decomposition of a symmetric 2x2 matrix [[a, b], [b, c]].
struct SymEigen2 {
  double lambda1 = 0.0;  // smaller magnitude
  double lambda2 = 0.0;  // larger magnitude
  Point2 v1{1.0, 0.0};   // unit eigenvector of lambda1
};

inline SymEigen2 sym_eigen2(double a, double b, double c) {
  const double half_tr = 0.5 * (a + c);
  const double disc = std::hypot(0.5 * (a - c), b);
  double mu1 = half_tr + disc;
  double mu2 = half_tr - disc;
  if (std::abs(mu1) > std::abs(mu2)) std::swap(mu1, mu2);
  SymEigen2 e;
  e.lambda1 = mu1;
  e.lambda2 = mu2;
  // (A - mu1 I) v = 0: pick the better-conditioned row.
  Point2 v{b, mu1 - a};
  Point2 alt{mu1 - c, b};
  if (norm(alt) > norm(v)) v = alt;
  const double n = norm(v);
  if (n > 1e-300) {
    e.v1 = {v.x / n, v.y / n};
  } else {
    e.v1 = {1.0, 0.0};
  }
  return e;
}

}  // namespace angio
