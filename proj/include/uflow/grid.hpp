#pragma once

// Core raster types. Conventions used across the whole toolkit:
//   - pixel centers sit at integer coordinates, origin at the top-left pixel
//   - x runs rightward (columns, flow component u), y runs downward (rows, v)
//   - storage is row-major: data[y * width + x], channels interleaved

#include <cmath>
#include <cstdint>
#include <vector>

#include "uflow/error.hpp"

namespace uflow {

struct ScalarGrid {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  ScalarGrid() = default;
  ScalarGrid(int h, int w, double fill = 0.0) : height(h), width(w), data(size_t(h) * w, fill) {
    require(h >= 1 && w >= 1, ErrorCode::DimensionMismatch, "ScalarGrid needs positive dims");
  }

  double& at(int x, int y) { return data[size_t(y) * width + x]; }
  double at(int x, int y) const { return data[size_t(y) * width + x]; }
  size_t size() const { return data.size(); }

  bool same_dims(const ScalarGrid& o) const { return height == o.height && width == o.width; }
};

struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;  // interleaved, data[(y*width + x)*channels + c]

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c), data(size_t(h) * w * c, fill) {
    require(h >= 1 && w >= 1, ErrorCode::DimensionMismatch, "Image needs positive dims");
    require(c == 1 || c == 3, ErrorCode::DimensionMismatch, "Image channels must be 1 or 3");
  }

  double& at(int x, int y, int c) { return data[(size_t(y) * width + x) * channels + c]; }
  double at(int x, int y, int c) const { return data[(size_t(y) * width + x) * channels + c]; }

  bool same_dims(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

struct FlowField {
  int height = 0;
  int width = 0;
  ScalarGrid u;  // horizontal displacement, pixels
  ScalarGrid v;  // vertical displacement, pixels

  FlowField() = default;
  FlowField(int h, int w, double fill_u = 0.0, double fill_v = 0.0)
      : height(h), width(w), u(h, w, fill_u), v(h, w, fill_v) {}

  bool same_dims(const FlowField& o) const { return height == o.height && width == o.width; }

  bool all_finite() const {
    for (double x : u.data)
      if (!std::isfinite(x)) return false;
    for (double x : v.data)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

struct ValidityMask {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> bits;  // row-major, 0 or 1

  ValidityMask() = default;
  ValidityMask(int h, int w, bool fill = false)
      : height(h), width(w), bits(size_t(h) * w, fill ? 1 : 0) {
    require(h >= 1 && w >= 1, ErrorCode::DimensionMismatch, "ValidityMask needs positive dims");
  }

  bool at(int x, int y) const { return bits[size_t(y) * width + x] != 0; }
  void set(int x, int y, bool b) { bits[size_t(y) * width + x] = b ? 1 : 0; }

  size_t count_true() const {
    size_t n = 0;
    for (uint8_t b : bits) n += b;
    return n;
  }
};

// Bilinear sample with clamp-to-edge semantics; used by resampling paths
// (augmentation, pyramid handoff) where border extension is wanted. The
// flow warp in warp.hpp deliberately does NOT clamp (zero-padded sum).
inline double sample_bilinear_clamped(const Image& img, double x, double y, int c) {
  if (x < 0.0) x = 0.0;
  if (y < 0.0) y = 0.0;
  if (x > img.width - 1) x = img.width - 1;
  if (y > img.height - 1) y = img.height - 1;
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  int x1 = x0 + 1 < img.width ? x0 + 1 : x0;
  int y1 = y0 + 1 < img.height ? y0 + 1 : y0;
  double fx = x - x0, fy = y - y0;
  double a = img.at(x0, y0, c) * (1.0 - fx) + img.at(x1, y0, c) * fx;
  double b = img.at(x0, y1, c) * (1.0 - fx) + img.at(x1, y1, c) * fx;
  return a * (1.0 - fy) + b * fy;
}

inline double sample_bilinear_clamped(const ScalarGrid& g, double x, double y) {
  if (x < 0.0) x = 0.0;
  if (y < 0.0) y = 0.0;
  if (x > g.width - 1) x = g.width - 1;
  if (y > g.height - 1) y = g.height - 1;
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  int x1 = x0 + 1 < g.width ? x0 + 1 : x0;
  int y1 = y0 + 1 < g.height ? y0 + 1 : y0;
  double fx = x - x0, fy = y - y0;
  double a = g.at(x0, y0) * (1.0 - fx) + g.at(x1, y0) * fx;
  double b = g.at(x0, y1) * (1.0 - fx) + g.at(x1, y1) * fx;
  return a * (1.0 - fy) + b * fy;
}

}  // namespace uflow
