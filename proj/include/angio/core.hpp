#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace angio {

enum class ErrorKind {
  NotFound,
  Format,
  NotGrayscale,
  InvalidArgument,
  Border,
  Degenerate,
  EmptyRidges,
  Unreachable,
  Config,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::NotFound: return "not_found";
    case ErrorKind::Format: return "format";
    case ErrorKind::NotGrayscale: return "not_grayscale";
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::Border: return "border";
    case ErrorKind::Degenerate: return "degenerate";
    case ErrorKind::EmptyRidges: return "empty_ridges";
    case ErrorKind::Unreachable: return "unreachable";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Sub-pixel image position. x is the column, y the row; pixel centers sit on
/// integer coordinates with the origin at the top-left pixel.
struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
  friend Point2 operator*(Point2 a, double s) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }

/// Unit direction with its angle kept alongside. Construct through the
/// factories so the two representations never disagree.
class Direction2 {
 public:
  Direction2() = default;

  static Direction2 from_angle(double theta) {
    Direction2 d;
    d.ux_ = std::cos(theta);
    d.uy_ = std::sin(theta);
    d.theta_ = std::atan2(d.uy_, d.ux_);
    return d;
  }

  /// Throws on a zero-length vector.
  static Direction2 from_vector(Point2 v) {
    const double n = norm(v);
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw Error(ErrorKind::InvalidArgument, "direction from zero-length vector");
    }
    Direction2 d;
    d.ux_ = v.x / n;
    d.uy_ = v.y / n;
    d.theta_ = std::atan2(d.uy_, d.ux_);
    return d;
  }

  double ux() const { return ux_; }
  double uy() const { return uy_; }
  double theta() const { return theta_; }
  Point2 vec() const { return {ux_, uy_}; }
  Direction2 reversed() const { return from_vector({-ux_, -uy_}); }
  /// Left-hand normal (rotated +90 degrees in image coordinates).
  Point2 normal() const { return {-uy_, ux_}; }

  friend bool operator==(const Direction2&, const Direction2&) = default;

 private:
  double ux_ = 1.0;
  double uy_ = 0.0;
  double theta_ = 0.0;
};

/// Circular distance between two angles, in [0, pi].
inline double angle_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), 2.0 * std::numbers::pi);
  return d > std::numbers::pi ? 2.0 * std::numbers::pi - d : d;
}

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Row-major scalar raster with intensities in [0, 255].
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, double fill = 0.0) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
      throw Error(ErrorKind::InvalidArgument, "image dimensions must be positive");
    }
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }
  GrayImage(int width, int height, std::vector<double> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width <= 0 || height <= 0) {
      throw Error(ErrorKind::InvalidArgument, "image dimensions must be positive");
    }
    if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw Error(ErrorKind::InvalidArgument, "image data length does not match dimensions");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int x, int y) { return data_[index(x, y)]; }
  double at(int x, int y) const { return data_[index(x, y)]; }
  /// Mirror-padded access (half-sample symmetric, edge pixel repeated).
  double at_mirror(int x, int y) const { return data_[index(mirror(x, width_), mirror(y, height_))]; }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  bool contains(Point2 p) const {
    return p.x >= 0.0 && p.y >= 0.0 && p.x <= width_ - 1.0 && p.y <= height_ - 1.0;
  }

  /// Bilinear interpolation; coordinates are clamped to the pixel-center hull.
  double sample(Point2 p) const {
    const double x = std::clamp(p.x, 0.0, width_ - 1.0);
    const double y = std::clamp(p.y, 0.0, height_ - 1.0);
    const int x0 = std::min(static_cast<int>(std::floor(x)), width_ - 1);
    const int y0 = std::min(static_cast<int>(std::floor(y)), height_ - 1);
    const int x1 = std::min(x0 + 1, width_ - 1);
    const int y1 = std::min(y0 + 1, height_ - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
    const double bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
    return top * (1.0 - fy) + bottom * fy;
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  void clamp_to_range(double lo = 0.0, double hi = 255.0) {
    for (auto& v : data_) v = std::clamp(v, lo, hi);
  }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

  static int mirror(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
  }

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Checks the raster invariants: positive size, finite values within [0, 255].
inline bool is_valid(const GrayImage& img) {
  if (img.width() <= 0 || img.height() <= 0) return false;
  return std::all_of(img.data().begin(), img.data().end(),
                     [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 255.0; });
}

/// Dense per-pixel field of any type, same indexing as GrayImage.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  T& operator()(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  const T& operator()(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  const std::vector<T>& data() const { return data_; }
  std::vector<T>& data() { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

}  // namespace angio
