#pragma once

// NCHW tensor used by the network's forward/backward passes.

#include <vector>

#include "uflow/error.hpp"
#include "uflow/grid.hpp"

namespace uflow {

template <class T>
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_), data(size_t(n_) * c_ * h_ * w_, fill) {
    require(n_ >= 1 && c_ >= 1 && h_ >= 1 && w_ >= 1, ErrorCode::DimensionMismatch,
            "Tensor4 needs positive dims");
  }

  T& at(int in, int ic, int iy, int ix) {
    return data[((size_t(in) * c + ic) * h + iy) * w + ix];
  }
  T at(int in, int ic, int iy, int ix) const {
    return data[((size_t(in) * c + ic) * h + iy) * w + ix];
  }

  T* plane(int in, int ic) { return data.data() + (size_t(in) * c + ic) * h * w; }
  const T* plane(int in, int ic) const { return data.data() + (size_t(in) * c + ic) * h * w; }

  size_t size() const { return data.size(); }
  bool same_shape(const Tensor4& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
};

using Tensor4d = Tensor4<double>;

// Stacks two 3-channel images into one [1, 6, H, W] network input.
inline Tensor4d stack_pair(const Image& I1, const Image& I2) {
  require(I1.same_dims(I2), ErrorCode::DimensionMismatch, "stack_pair: image dims differ");
  require(I1.channels == 3, ErrorCode::DimensionMismatch, "stack_pair: expects 3-channel images");
  Tensor4d x(1, 6, I1.height, I1.width);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < I1.height; ++y)
      for (int xx = 0; xx < I1.width; ++xx) {
        x.at(0, c, y, xx) = I1.at(xx, y, c);
        x.at(0, c + 3, y, xx) = I2.at(xx, y, c);
      }
  return x;
}

// [1, 2, h, w] <-> FlowField (channel 0 = u, channel 1 = v)
inline FlowField tensor_to_flow(const Tensor4d& t, int item = 0) {
  require(t.c == 2, ErrorCode::DimensionMismatch, "tensor_to_flow: needs 2 channels");
  FlowField f(t.h, t.w);
  for (int y = 0; y < t.h; ++y)
    for (int x = 0; x < t.w; ++x) {
      f.u.at(x, y) = t.at(item, 0, y, x);
      f.v.at(x, y) = t.at(item, 1, y, x);
    }
  return f;
}

inline Tensor4d flow_to_tensor(const FlowField& f) {
  Tensor4d t(1, 2, f.height, f.width);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      t.at(0, 0, y, x) = f.u.at(x, y);
      t.at(0, 1, y, x) = f.v.at(x, y);
    }
  return t;
}

}  // namespace uflow
