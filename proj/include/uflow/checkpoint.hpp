#pragma once

// Checkpoint container: versioned header, architecture + input-preprocessing
// echo, then the parameter blobs as little-endian float32 in declaration
// order. Training runs append an exact-state section (float64 parameters and
// Adam moments) so a resumed run replays the uninterrupted one bit for bit.

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "uflow/adam.hpp"
#include "uflow/error.hpp"
#include "uflow/net.hpp"

namespace uflow {

struct NetPreprocess {
  bool response_norm = true;  // apply 9x9 response normalization to net inputs
  int window = 9;
  double kappa = 0.01;
};

struct TrainerState {
  int64_t iteration = 0;
  double base_lr = 0.0;
  AdamState adam;
  std::vector<double> params;  // exact float64 parameters at `iteration`
};

struct Checkpoint {
  MiniFlowNetSpec spec;
  NetPreprocess preprocess;
  std::vector<float> params32;
  bool has_trainer_state = false;
  TrainerState trainer;
};

namespace detail {

struct ByteWriter {
  std::vector<unsigned char> buf;
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back((v >> (8 * i)) & 0xff);
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back((v >> (8 * i)) & 0xff);
  }
  void f32(float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    u32(u);
  }
  void f64(double v) {
    uint64_t u;
    std::memcpy(&u, &v, 8);
    u64(u);
  }
  void bytes(const char* p, size_t n) { buf.insert(buf.end(), p, p + n); }
};

struct ByteReader {
  const unsigned char* p;
  const unsigned char* end;
  void need(size_t n) const {
    require(size_t(end - p) >= n, ErrorCode::SizeMismatch, "checkpoint truncated");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(p[i]) << (8 * i);
    p += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(p[i]) << (8 * i);
    p += 8;
    return v;
  }
  float f32() {
    uint32_t u = u32();
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }
  double f64() {
    uint64_t u = u64();
    double v;
    std::memcpy(&v, &u, 8);
    return v;
  }
};

}  // namespace detail

inline void write_checkpoint(const std::string& path, const MiniFlowNet& net,
                             const NetPreprocess& pre, const TrainerState* trainer = nullptr) {
  detail::ByteWriter w;
  w.bytes("UFNC", 4);
  w.u32(1);  // format version
  const MiniFlowNetSpec& s = net.spec();
  w.u32(uint32_t(s.input_channels));
  w.u32(4);
  for (int c : s.channels) w.u32(uint32_t(c));
  for (int k : s.kernels) w.u32(uint32_t(k));
  w.u32(uint32_t(s.decoder_kernel));
  w.u32(uint32_t(s.prediction_levels));
  w.f64(s.lrelu_slope);
  w.u32(pre.response_norm ? 1 : 0);
  w.u32(uint32_t(pre.window));
  w.f64(pre.kappa);

  w.u64(net.param_count());
  for (double v : net.params()) w.f32(float(v));

  if (trainer) {
    w.bytes("TRNR", 4);
    w.u64(uint64_t(trainer->iteration));
    w.f64(trainer->base_lr);
    w.u64(uint64_t(trainer->adam.t));
    w.u64(trainer->params.size());
    for (double v : trainer->params) w.f64(v);
    for (double v : trainer->adam.m) w.f64(v);
    for (double v : trainer->adam.v) w.f64(v);
  }

  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw Error(ErrorCode::Unwritable, "cannot write " + path);
  size_t wrote = std::fwrite(w.buf.data(), 1, w.buf.size(), f);
  std::fclose(f);
  if (wrote != w.buf.size()) throw Error(ErrorCode::Unwritable, "short write: " + path);
}

inline Checkpoint read_checkpoint(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw Error(ErrorCode::MissingCheckpoint, "cannot open checkpoint " + path);
  std::fseek(f, 0, SEEK_END);
  long len = std::ftell(f);
  std::fseek(f, 0, SEEK_SET);
  std::vector<unsigned char> buf(len > 0 ? size_t(len) : 0);
  if (len > 0 && std::fread(buf.data(), 1, size_t(len), f) != size_t(len)) {
    std::fclose(f);
    throw Error(ErrorCode::SizeMismatch, "checkpoint truncated: " + path);
  }
  std::fclose(f);

  detail::ByteReader r{buf.data(), buf.data() + buf.size()};
  r.need(8);
  require(std::memcmp(r.p, "UFNC", 4) == 0, ErrorCode::MissingCheckpoint,
          "not a checkpoint file: " + path);
  r.p += 4;
  uint32_t version = r.u32();
  require(version == 1, ErrorCode::MissingCheckpoint, "unknown checkpoint version");

  Checkpoint ck;
  ck.spec.input_channels = int(r.u32());
  uint32_t stages = r.u32();
  require(stages == 4, ErrorCode::MissingCheckpoint, "unexpected stage count");
  ck.spec.channels.resize(4);
  ck.spec.kernels.resize(4);
  for (int i = 0; i < 4; ++i) ck.spec.channels[i] = int(r.u32());
  for (int i = 0; i < 4; ++i) ck.spec.kernels[i] = int(r.u32());
  ck.spec.decoder_kernel = int(r.u32());
  ck.spec.prediction_levels = int(r.u32());
  ck.spec.lrelu_slope = r.f64();
  ck.preprocess.response_norm = r.u32() != 0;
  ck.preprocess.window = int(r.u32());
  ck.preprocess.kappa = r.f64();

  uint64_t count = r.u64();
  ck.params32.resize(count);
  for (uint64_t i = 0; i < count; ++i) ck.params32[i] = r.f32();

  if (size_t(r.end - r.p) >= 4 && std::memcmp(r.p, "TRNR", 4) == 0) {
    r.p += 4;
    ck.has_trainer_state = true;
    ck.trainer.iteration = int64_t(r.u64());
    ck.trainer.base_lr = r.f64();
    int64_t adam_t = int64_t(r.u64());
    uint64_t n = r.u64();
    ck.trainer.params.resize(n);
    ck.trainer.adam.reset(n);
    ck.trainer.adam.t = adam_t;
    for (uint64_t i = 0; i < n; ++i) ck.trainer.params[i] = r.f64();
    for (uint64_t i = 0; i < n; ++i) ck.trainer.adam.m[i] = r.f64();
    for (uint64_t i = 0; i < n; ++i) ck.trainer.adam.v[i] = r.f64();
  }
  return ck;
}

// Builds a runnable net from the float32 interchange blobs.
inline MiniFlowNet net_from_checkpoint(const Checkpoint& ck) {
  MiniFlowNet net(ck.spec);
  require(ck.params32.size() == net.param_count(), ErrorCode::SizeMismatch,
          "checkpoint parameter count mismatch");
  std::vector<double> p(ck.params32.begin(), ck.params32.end());
  net.set_params(p);
  return net;
}

}  // namespace uflow
