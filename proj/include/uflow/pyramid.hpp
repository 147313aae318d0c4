#pragma once

// Image pyramid helpers: 2x2 area-average downsampling (exact for even dims,
// window clipped at odd borders) and bilinear flow upsampling with value
// rescaling. A flow value of 1.0 always means one pixel at its own level;
// moving one level finer multiplies values by 2.

#include <cmath>
#include <vector>

#include "uflow/grid.hpp"

namespace uflow {

inline int half_dim(int n) { return (n + 1) / 2; }

inline Image downsample_half(const Image& img) {
  int oh = half_dim(img.height), ow = half_dim(img.width);
  Image out(oh, ow, img.channels);
  for (int y = 0; y < oh; ++y) {
    int y0 = 2 * y, y1 = std::min(2 * y + 1, img.height - 1);
    int ny = (y1 > y0) ? 2 : 1;
    for (int x = 0; x < ow; ++x) {
      int x0 = 2 * x, x1 = std::min(2 * x + 1, img.width - 1);
      int nx = (x1 > x0) ? 2 : 1;
      for (int c = 0; c < img.channels; ++c) {
        double sum = img.at(x0, y0, c);
        if (nx == 2) sum += img.at(x1, y0, c);
        if (ny == 2) sum += img.at(x0, y1, c);
        if (nx == 2 && ny == 2) sum += img.at(x1, y1, c);
        out.at(x, y, c) = sum / (nx * ny);
      }
    }
  }
  return out;
}

inline Image downsample_levels(const Image& img, int levels) {
  Image cur = img;
  for (int i = 0; i < levels; ++i) cur = downsample_half(cur);
  return cur;
}

// Resize flow to (th, tw) with clamped bilinear sampling and rescale the
// displacement values by the resolution ratio.
inline FlowField resize_flow(const FlowField& flow, int th, int tw) {
  FlowField out(th, tw);
  double sx = double(flow.width) / tw;
  double sy = double(flow.height) / th;
  for (int y = 0; y < th; ++y) {
    for (int x = 0; x < tw; ++x) {
      double srcx = (x + 0.5) * sx - 0.5;
      double srcy = (y + 0.5) * sy - 0.5;
      out.u.at(x, y) = sample_bilinear_clamped(flow.u, srcx, srcy) / sx;
      out.v.at(x, y) = sample_bilinear_clamped(flow.v, srcx, srcy) / sy;
    }
  }
  return out;
}

inline FlowField upsample_flow_2x(const FlowField& flow, int th, int tw) {
  return resize_flow(flow, th, tw);
}

}  // namespace uflow
