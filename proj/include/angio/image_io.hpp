#pragma once

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "angio/core.hpp"

namespace angio {

using Bytes = std::vector<std::uint8_t>;

/// 8-bit RGB raster used for overlays.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // interleaved RGB, row-major

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    auto* px = &data[(static_cast<std::size_t>(y) * width + x) * 3];
    px[0] = r;
    px[1] = g;
    px[2] = b;
  }
};

namespace detail {

inline Bytes read_file(const std::string& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::NotFound, "no such file: " + path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::NotFound, "cannot open file: " + path);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::NotFound, "cannot write file: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

class PnmReader {
 public:
  explicit PnmReader(const Bytes& b) : bytes_(b) {}

  // Next whitespace-delimited header token, skipping '#' comments.
  std::string token() {
    for (;;) {
      while (pos_ < bytes_.size() && std::isspace(bytes_[pos_])) ++pos_;
      if (pos_ < bytes_.size() && bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
        continue;
      }
      break;
    }
    std::string t;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_]) && bytes_[pos_] != '#') t += static_cast<char>(bytes_[pos_++]);
    return t;
  }

  int number() {
    const auto t = token();
    if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) ||
        t.size() > 9) {
      throw Error(ErrorKind::Format, "malformed PGM header");
    }
    return std::stoi(t);
  }

  std::size_t pos() const { return pos_; }
  void skip_single_whitespace() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw Error(ErrorKind::Format, "malformed PGM header");
    ++pos_;
  }

 private:
  const Bytes& bytes_;
  std::size_t pos_ = 0;
};

inline GrayImage decode_pgm(const Bytes& bytes) {
  PnmReader r(bytes);
  const auto magic = r.token();
  if (magic == "P3" || magic == "P6") throw Error(ErrorKind::NotGrayscale, "color PPM input is not supported");
  if (magic != "P5" && magic != "P2") throw Error(ErrorKind::Format, "malformed PGM header");
  const int w = r.number();
  const int h = r.number();
  const int maxval = r.number();
  if (w <= 0 || h <= 0) throw Error(ErrorKind::Format, "malformed PGM header: bad dimensions");
  if (maxval != 255) throw Error(ErrorKind::Format, "only 8-bit PGM (maxval 255) is supported");
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  std::vector<double> data(n);
  if (magic == "P5") {
    r.skip_single_whitespace();
    if (bytes.size() - r.pos() < n) throw Error(ErrorKind::Format, "truncated PGM pixel data");
    for (std::size_t i = 0; i < n; ++i) data[i] = bytes[r.pos() + i];
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const int v = r.number();
      if (v > 255) throw Error(ErrorKind::Format, "PGM sample exceeds maxval");
      data[i] = v;
    }
  }
  return GrayImage(w, h, std::move(data));
}

inline GrayImage decode_png(const Bytes& bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw Error(ErrorKind::Format, std::string("malformed PNG: ") + image.message);
  }
  if (image.format & PNG_FORMAT_FLAG_COLOR) {
    png_image_free(&image);
    throw Error(ErrorKind::NotGrayscale, "color PNG input is not supported");
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw Error(ErrorKind::Format, "only 8-bit grayscale PNG is supported");
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    throw Error(ErrorKind::Format, std::string("malformed PNG: ") + image.message);
  }
  std::vector<double> data(buf.begin(), buf.end());
  return GrayImage(static_cast<int>(image.width), static_cast<int>(image.height), std::move(data));
}

inline Bytes encode_png_raw(int w, int h, const std::uint8_t* pixels, png_uint_32 format) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels, 0, nullptr)) {
    throw Error(ErrorKind::Format, std::string("PNG encode failed: ") + image.message);
  }
  Bytes out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels, 0, nullptr)) {
    throw Error(ErrorKind::Format, std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

}  // namespace detail

/// Decodes an 8-bit grayscale PGM (P5/P2) or PNG held in memory.
inline GrayImage decode_gray_image(const Bytes& bytes) {
  static constexpr std::uint8_t png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::equal(png_sig, png_sig + 8, bytes.begin())) return detail::decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P') return detail::decode_pgm(bytes);
  throw Error(ErrorKind::Format, "unsupported image format (expected PGM or PNG)");
}

inline GrayImage load_gray_image(const std::string& path) { return decode_gray_image(detail::read_file(path)); }

inline Bytes encode_pgm(const GrayImage& img) {
  const std::string header = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.reserve(out.size() + img.size());
  for (double v : img.data()) out.push_back(detail::to_byte(v));
  return out;
}

inline Bytes encode_png(const GrayImage& img) {
  std::vector<std::uint8_t> px(img.size());
  std::transform(img.data().begin(), img.data().end(), px.begin(), detail::to_byte);
  return detail::encode_png_raw(img.width(), img.height(), px.data(), PNG_FORMAT_GRAY);
}

inline Bytes encode_png(const RgbImage& img) {
  return detail::encode_png_raw(img.width, img.height, img.data.data(), PNG_FORMAT_RGB);
}

inline void save_pgm(const GrayImage& img, const std::string& path) { detail::write_file(path, encode_pgm(img)); }
inline void save_png(const GrayImage& img, const std::string& path) { detail::write_file(path, encode_png(img)); }
inline void save_png(const RgbImage& img, const std::string& path) { detail::write_file(path, encode_png(img)); }

/// Writes PNG or PGM depending on the extension.
inline void save_gray_image(const GrayImage& img, const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".png" || ext == ".PNG") {
    save_png(img, path);
  } else {
    save_pgm(img, path);
  }
}

}  // namespace angio
