#pragma once

// Differentiable backward warping. The sampling grid maps each target pixel
// (x, y) to (x + u, y + v) in the source image; the warped value is the
// bilinear combination of the <= 4 integer neighbors, with out-of-range
// neighbors contributing zero. The validity mask marks pixels whose sampling
// point lies inside [0, W-1] x [0, H-1].
//
// Sub-gradient convention at integer sampling coordinates: the floor-based
// cell (right-hand derivative) is used throughout.

#include <cmath>
#include <vector>

#include "uflow/grid.hpp"

namespace uflow {

struct SamplingGrid {
  ScalarGrid x2;  // source x per target pixel
  ScalarGrid y2;  // source y per target pixel
};

inline SamplingGrid sampling_grid(const FlowField& flow) {
  SamplingGrid g{ScalarGrid(flow.height, flow.width), ScalarGrid(flow.height, flow.width)};
  for (int y = 0; y < flow.height; ++y) {
    for (int x = 0; x < flow.width; ++x) {
      g.x2.at(x, y) = x + flow.u.at(x, y);
      g.y2.at(x, y) = y + flow.v.at(x, y);
    }
  }
  return g;
}

struct WarpResult {
  Image warped;
  ValidityMask mask;
  // Partial derivatives of the warped value with respect to the sampling
  // coordinates, one plane per source channel; these let loss code chain
  // gradients onto the flow without a second pass over the neighbors.
  std::vector<ScalarGrid> d_dx2;
  std::vector<ScalarGrid> d_dy2;
};

inline WarpResult bilinear_warp(const Image& source, const FlowField& flow) {
  require(source.height == flow.height && source.width == flow.width,
          ErrorCode::DimensionMismatch, "bilinear_warp: source/flow dims differ");
  const int H = source.height, W = source.width, C = source.channels;
  WarpResult res;
  res.warped = Image(H, W, C);
  res.mask = ValidityMask(H, W);
  res.d_dx2.assign(C, ScalarGrid(H, W));
  res.d_dy2.assign(C, ScalarGrid(H, W));

  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double x2 = x + flow.u.at(x, y);
      double y2 = y + flow.v.at(x, y);
      res.mask.set(x, y, x2 >= 0.0 && x2 <= W - 1 && y2 >= 0.0 && y2 <= H - 1);

      int x0 = static_cast<int>(std::floor(x2));
      int y0 = static_cast<int>(std::floor(y2));
      double fx = x2 - x0, fy = y2 - y0;
      int x1 = x0 + 1, y1 = y0 + 1;
      bool in_x0 = x0 >= 0 && x0 < W, in_x1 = x1 >= 0 && x1 < W;
      bool in_y0 = y0 >= 0 && y0 < H, in_y1 = y1 >= 0 && y1 < H;

      for (int c = 0; c < C; ++c) {
        double p00 = (in_x0 && in_y0) ? source.at(x0, y0, c) : 0.0;
        double p10 = (in_x1 && in_y0) ? source.at(x1, y0, c) : 0.0;
        double p01 = (in_x0 && in_y1) ? source.at(x0, y1, c) : 0.0;
        double p11 = (in_x1 && in_y1) ? source.at(x1, y1, c) : 0.0;
        res.warped.at(x, y, c) = (p00 * (1.0 - fx) + p10 * fx) * (1.0 - fy) +
                                 (p01 * (1.0 - fx) + p11 * fx) * fy;
        res.d_dx2[c].at(x, y) = (p10 - p00) * (1.0 - fy) + (p11 - p01) * fy;
        res.d_dy2[c].at(x, y) = (p01 - p00) * (1.0 - fx) + (p11 - p10) * fx;
      }
    }
  }
  return res;
}

// Reverse-mode pass for bilinear_warp. upstream holds dL/dwarped per pixel
// and channel. grad_flow chains through the sampling coordinates; grad_source
// is the transposed scatter of the bilinear gather. Accumulation order is
// fixed (row-major, then channel) so results are bitwise reproducible.
inline void warp_backward(const Image& source, const FlowField& flow, const Image& upstream,
                          FlowField& grad_flow, Image& grad_source) {
  require(source.height == flow.height && source.width == flow.width,
          ErrorCode::DimensionMismatch, "warp_backward: source/flow dims differ");
  require(upstream.same_dims(source), ErrorCode::DimensionMismatch,
          "warp_backward: upstream dims differ");
  const int H = source.height, W = source.width, C = source.channels;
  grad_flow = FlowField(H, W);
  grad_source = Image(H, W, C);

  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double x2 = x + flow.u.at(x, y);
      double y2 = y + flow.v.at(x, y);
      int x0 = static_cast<int>(std::floor(x2));
      int y0 = static_cast<int>(std::floor(y2));
      double fx = x2 - x0, fy = y2 - y0;
      int x1 = x0 + 1, y1 = y0 + 1;
      bool in_x0 = x0 >= 0 && x0 < W, in_x1 = x1 >= 0 && x1 < W;
      bool in_y0 = y0 >= 0 && y0 < H, in_y1 = y1 >= 0 && y1 < H;

      double gu = 0.0, gv = 0.0;
      for (int c = 0; c < C; ++c) {
        double up = upstream.at(x, y, c);
        double p00 = (in_x0 && in_y0) ? source.at(x0, y0, c) : 0.0;
        double p10 = (in_x1 && in_y0) ? source.at(x1, y0, c) : 0.0;
        double p01 = (in_x0 && in_y1) ? source.at(x0, y1, c) : 0.0;
        double p11 = (in_x1 && in_y1) ? source.at(x1, y1, c) : 0.0;
        gu += up * ((p10 - p00) * (1.0 - fy) + (p11 - p01) * fy);
        gv += up * ((p01 - p00) * (1.0 - fx) + (p11 - p10) * fx);

        if (in_x0 && in_y0) grad_source.at(x0, y0, c) += up * (1.0 - fx) * (1.0 - fy);
        if (in_x1 && in_y0) grad_source.at(x1, y0, c) += up * fx * (1.0 - fy);
        if (in_x0 && in_y1) grad_source.at(x0, y1, c) += up * (1.0 - fx) * fy;
        if (in_x1 && in_y1) grad_source.at(x1, y1, c) += up * fx * fy;
      }
      grad_flow.u.at(x, y) = gu;
      grad_flow.v.at(x, y) = gv;
    }
  }
}

}  // namespace uflow
