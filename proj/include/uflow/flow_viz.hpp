#pragma once

// Flow visualization: hue encodes direction, saturation encodes magnitude,
// zero flow renders white.

#include <algorithm>
#include <cmath>

#include "uflow/grid.hpp"

namespace uflow {

namespace detail {

// h, s, v in [0,1] -> rgb in [0,1]
inline void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  double hh = h * 6.0;
  if (hh >= 6.0) hh -= 6.0;
  int sector = static_cast<int>(hh);
  double f = hh - sector;
  double p = v * (1.0 - s);
  double q = v * (1.0 - s * f);
  double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

}  // namespace detail

// max_magnitude <= 0 selects the field's own maximum.
inline Image colorize_flow(const FlowField& flow, double max_magnitude = 0.0) {
  double scale = max_magnitude;
  if (scale <= 0.0) {
    for (int y = 0; y < flow.height; ++y)
      for (int x = 0; x < flow.width; ++x)
        scale = std::max(scale, std::hypot(flow.u.at(x, y), flow.v.at(x, y)));
  }
  Image out(flow.height, flow.width, 3);
  const double two_pi = 2.0 * 3.14159265358979323846;
  for (int y = 0; y < flow.height; ++y) {
    for (int x = 0; x < flow.width; ++x) {
      double u = flow.u.at(x, y), v = flow.v.at(x, y);
      double mag = std::hypot(u, v);
      double sat = (scale > 0.0 && std::isfinite(mag)) ? std::min(mag / scale, 1.0) : 0.0;
      double ang = std::atan2(v, u);  // [-pi, pi], 0 along +x
      double hue = ang / two_pi;
      if (hue < 0.0) hue += 1.0;
      double r, g, b;
      detail::hsv_to_rgb(hue, sat, 1.0, r, g, b);
      out.at(x, y, 0) = r;
      out.at(x, y, 1) = g;
      out.at(x, y, 2) = b;
    }
  }
  return out;
}

}  // namespace uflow
