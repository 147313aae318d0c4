#pragma once

// Test-only reference implementations, kept deliberately naive and separate
// from the library code they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "uflow/grid.hpp"
#include "uflow/tensor.hpp"

namespace oracle {

// Literal warp sum over every source pixel with hinge weights
// M(t) = max(0, t): out = sum_ij I(i,j) M(1-|x2-i|) M(1-|y2-j|).
inline uflow::Image warp_double_loop(const uflow::Image& src, const uflow::FlowField& flow) {
  uflow::Image out(src.height, src.width, src.channels);
  auto hinge = [](double t) { return t > 0.0 ? t : 0.0; };
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      double x2 = x + flow.u.at(x, y);
      double y2 = y + flow.v.at(x, y);
      for (int c = 0; c < src.channels; ++c) {
        double acc = 0.0;
        for (int j = 0; j < src.height; ++j)
          for (int i = 0; i < src.width; ++i)
            acc += src.at(i, j, c) * hinge(1.0 - std::abs(x2 - i)) * hinge(1.0 - std::abs(y2 - j));
        out.at(x, y, c) = acc;
      }
    }
  return out;
}

// Six-loop direct cross-correlation with zero padding.
inline uflow::Tensor4d conv_six_loop(const uflow::Tensor4d& x, const std::vector<double>& w,
                                     const std::vector<double>& b, int out_ch, int kernel,
                                     int stride) {
  int p = (kernel - 1) / 2;
  int oh = stride == 1 ? x.h : (x.h - 1) / 2 + 1;
  int ow = stride == 1 ? x.w : (x.w - 1) / 2 + 1;
  uflow::Tensor4d y(x.n, out_ch, oh, ow);
  for (int n = 0; n < x.n; ++n)
    for (int oc = 0; oc < out_ch; ++oc)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = b.empty() ? 0.0 : b[oc];
          for (int ic = 0; ic < x.c; ++ic)
            for (int ky = 0; ky < kernel; ++ky)
              for (int kx = 0; kx < kernel; ++kx) {
                int iy = oy * stride + ky - p;
                int ix = ox * stride + kx - p;
                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                acc += w[((size_t(oc) * x.c + ic) * kernel + ky) * kernel + kx] *
                       x.at(n, ic, iy, ix);
              }
          y.at(n, oc, oy, ox) = acc;
        }
  return y;
}

// Scalar Adam, transcribed independently of the library implementation.
struct ScalarAdam {
  double m = 0.0, v = 0.0;
  int64_t t = 0;

  double step(double g, double lr, double b1, double b2, double eps) {
    t += 1;
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    double mhat = m / (1.0 - std::pow(b1, double(t)));
    double vhat = v / (1.0 - std::pow(b2, double(t)));
    return -lr * mhat / (std::sqrt(vhat) + eps);
  }
};

// Direct per-pixel endpoint error.
inline double epe_reference(const uflow::FlowField& a, const uflow::FlowField& b) {
  double sum = 0.0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x)
      sum += std::sqrt((a.u.at(x, y) - b.u.at(x, y)) * (a.u.at(x, y) - b.u.at(x, y)) +
                       (a.v.at(x, y) - b.v.at(x, y)) * (a.v.at(x, y) - b.v.at(x, y)));
  return sum / double(size_t(a.height) * a.width);
}

// Direct HSV -> RGB, written against the textbook sector formula.
inline void hsv_reference(double h, double s, double v, double& r, double& g, double& b) {
  double c = v * s;
  double hp = h * 6.0;
  double xv = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r1 = 0, g1 = 0, b1 = 0;
  if (hp < 1) { r1 = c; g1 = xv; }
  else if (hp < 2) { r1 = xv; g1 = c; }
  else if (hp < 3) { g1 = c; b1 = xv; }
  else if (hp < 4) { g1 = xv; b1 = c; }
  else if (hp < 5) { r1 = xv; b1 = c; }
  else { r1 = c; b1 = xv; }
  double m = v - c;
  r = r1 + m;
  g = g1 + m;
  b = b1 + m;
}

}  // namespace oracle
