#pragma once

// 8-bit PNG input/output (grayscale or RGB) via libpng's simplified API.
// The IHDR chunk is sniffed up front so bad signatures, truncated headers
// and 16-bit files each map to their own error code.

#include <png.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "uflow/error.hpp"
#include "uflow/grid.hpp"

namespace uflow {

namespace detail {

struct PngHeader {
  uint32_t width = 0, height = 0;
  int bit_depth = 0;
  int color_type = 0;
};

inline PngHeader sniff_png_header(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw Error(ErrorCode::MissingFile, "cannot open " + path);
  unsigned char buf[33];
  size_t got = std::fread(buf, 1, sizeof(buf), f);
  std::fclose(f);
  static const unsigned char sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  if (got < 33 || std::memcmp(buf, sig, 8) != 0 || std::memcmp(buf + 12, "IHDR", 4) != 0)
    throw Error(ErrorCode::MalformedRaster, "malformed raster: " + path);
  PngHeader h;
  h.width = (uint32_t(buf[16]) << 24) | (uint32_t(buf[17]) << 16) | (uint32_t(buf[18]) << 8) | buf[19];
  h.height = (uint32_t(buf[20]) << 24) | (uint32_t(buf[21]) << 16) | (uint32_t(buf[22]) << 8) | buf[23];
  h.bit_depth = buf[24];
  h.color_type = buf[25];
  if (h.width == 0 || h.height == 0)
    throw Error(ErrorCode::MalformedRaster, "malformed raster: " + path);
  if (h.bit_depth > 8)
    throw Error(ErrorCode::UnsupportedBitDepth, "unsupported bit depth " +
                                                    std::to_string(h.bit_depth) + ": " + path);
  return h;
}

}  // namespace detail

// Reads an 8-bit (or narrower) PNG. Grayscale stays 1-channel, everything
// else is decoded as RGB; alpha is composited away. Values scaled to [0,1].
inline Image read_image(const std::string& path) {
  detail::PngHeader hdr = detail::sniff_png_header(path);
  // color types: 0 gray, 2 rgb, 3 palette, 4 gray+alpha, 6 rgba
  bool gray = (hdr.color_type == 0 || hdr.color_type == 4);

  png_image pimg;
  std::memset(&pimg, 0, sizeof(pimg));
  pimg.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&pimg, path.c_str()))
    throw Error(ErrorCode::MalformedRaster, std::string("malformed raster: ") + pimg.message);
  pimg.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  int channels = gray ? 1 : 3;
  std::vector<unsigned char> bytes(size_t(pimg.width) * pimg.height * channels);
  if (!png_image_finish_read(&pimg, nullptr, bytes.data(), 0, nullptr)) {
    png_image_free(&pimg);
    throw Error(ErrorCode::MalformedRaster, std::string("malformed raster: ") + pimg.message);
  }

  Image out(int(pimg.height), int(pimg.width), channels);
  for (size_t i = 0; i < bytes.size(); ++i) out.data[i] = bytes[i] / 255.0;
  return out;
}

// Writes an 8-bit PNG; values are clamped to [0,1] and quantized with
// round-half-away (0.5 -> 128). Round-trips within 1/(2*255) per sample.
inline void write_image(const Image& img, const std::string& path) {
  png_image pimg;
  std::memset(&pimg, 0, sizeof(pimg));
  pimg.version = PNG_IMAGE_VERSION;
  pimg.width = png_uint_32(img.width);
  pimg.height = png_uint_32(img.height);
  pimg.format = img.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;

  std::vector<unsigned char> bytes(img.data.size());
  for (size_t i = 0; i < img.data.size(); ++i) {
    double v = img.data[i];
    if (v < 0.0) v = 0.0;
    if (v > 1.0) v = 1.0;
    bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  if (!png_image_write_to_file(&pimg, path.c_str(), 0, bytes.data(), 0, nullptr))
    throw Error(ErrorCode::Unwritable, std::string("cannot write ") + path + ": " + pimg.message);
}

// Masks interchange as 0/255 grayscale PNGs.
inline void write_mask(const ValidityMask& mask, const std::string& path) {
  Image img(mask.height, mask.width, 1);
  for (size_t i = 0; i < mask.bits.size(); ++i) img.data[i] = mask.bits[i] ? 1.0 : 0.0;
  write_image(img, path);
}

inline ValidityMask read_mask(const std::string& path) {
  Image img = read_image(path);
  require(img.channels == 1, ErrorCode::MalformedRaster, "mask must be grayscale: " + path);
  ValidityMask mask(img.height, img.width);
  for (size_t i = 0; i < img.data.size(); ++i) mask.bits[i] = img.data[i] >= 0.5 ? 1 : 0;
  return mask;
}

}  // namespace uflow
