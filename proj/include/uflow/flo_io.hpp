#pragma once

// Middlebury .flo interchange: little-endian float 202021.25, int32 width,
// int32 height, then row-major interleaved (u, v) float32 pairs. Encoding is
// bit-exact: write(read(f)) reproduces f byte for byte.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "uflow/error.hpp"
#include "uflow/grid.hpp"

namespace uflow {

namespace detail {

constexpr float kFloMagic = 202021.25f;

inline void put_le32(std::vector<unsigned char>& out, uint32_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back((v >> 16) & 0xff);
  out.push_back((v >> 24) & 0xff);
}

inline uint32_t get_le32(const unsigned char* p) {
  return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
}

inline uint32_t float_bits(float f) {
  uint32_t u;
  std::memcpy(&u, &f, 4);
  return u;
}

inline float bits_float(uint32_t u) {
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

}  // namespace detail

inline FlowField read_flo(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw Error(ErrorCode::MissingFile, "cannot open " + path);
  std::fseek(f, 0, SEEK_END);
  long len = std::ftell(f);
  std::fseek(f, 0, SEEK_SET);
  std::vector<unsigned char> buf(len > 0 ? size_t(len) : 0);
  if (len > 0 && std::fread(buf.data(), 1, size_t(len), f) != size_t(len)) {
    std::fclose(f);
    throw Error(ErrorCode::NotFloFile, "short read: " + path);
  }
  std::fclose(f);

  if (buf.size() < 12 || detail::bits_float(detail::get_le32(buf.data())) != detail::kFloMagic)
    throw Error(ErrorCode::NotFloFile, "not a flo file: " + path);
  int32_t w = int32_t(detail::get_le32(buf.data() + 4));
  int32_t h = int32_t(detail::get_le32(buf.data() + 8));
  if (w < 1 || h < 1)
    throw Error(ErrorCode::NotFloFile, "not a flo file (bad dims): " + path);
  size_t expect = 12 + size_t(w) * h * 8;
  if (buf.size() != expect)
    throw Error(ErrorCode::SizeMismatch, "flo payload size mismatch: " + path);

  FlowField flow(h, w);
  const unsigned char* p = buf.data() + 12;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      flow.u.at(x, y) = detail::bits_float(detail::get_le32(p));
      p += 4;
      flow.v.at(x, y) = detail::bits_float(detail::get_le32(p));
      p += 4;
    }
  }
  return flow;
}

inline void write_flo(const FlowField& flow, const std::string& path) {
  require(flow.all_finite(), ErrorCode::NonFinite, "flow has non-finite values");
  std::vector<unsigned char> buf;
  buf.reserve(12 + flow.u.size() * 8);
  detail::put_le32(buf, detail::float_bits(detail::kFloMagic));
  detail::put_le32(buf, uint32_t(flow.width));
  detail::put_le32(buf, uint32_t(flow.height));
  for (int y = 0; y < flow.height; ++y) {
    for (int x = 0; x < flow.width; ++x) {
      detail::put_le32(buf, detail::float_bits(float(flow.u.at(x, y))));
      detail::put_le32(buf, detail::float_bits(float(flow.v.at(x, y))));
    }
  }
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw Error(ErrorCode::Unwritable, "cannot write " + path);
  size_t wrote = std::fwrite(buf.data(), 1, buf.size(), f);
  std::fclose(f);
  if (wrote != buf.size()) throw Error(ErrorCode::Unwritable, "short write: " + path);
}

}  // namespace uflow
