#pragma once

// The unsupervised objective: photometric constancy under a backward warp,
// robust smoothness on flow first-differences, their weighted total, and a
// multiscale aggregate over coarse-to-fine predictions. Each piece returns
// its analytic gradient with respect to the flow.
//
// Accumulation is row-major with a fixed channel order, so loss values are
// bitwise reproducible.

#include <cmath>
#include <vector>

#include "uflow/grid.hpp"
#include "uflow/penalty.hpp"
#include "uflow/pyramid.hpp"
#include "uflow/warp.hpp"

namespace uflow {

struct LossConfig {
  double lambda = 1.0;  // smoothness weight
  CharbonnierParams photo_params{0.25, 1e-3};
  CharbonnierParams smooth_params{0.37, 1e-3};
  // Exclude pixels whose sampling point leaves the source image. When false,
  // the zero-padded warp values enter the residual as-is.
  bool mask_out_of_bounds = true;
  // Divide each loss (and its gradient) by the number of included terms so
  // lambda and step sizes transfer across resolutions.
  bool normalize_by_pixel_count = true;

  void validate() const {
    require(lambda >= 0.0, ErrorCode::BadConfig, "loss lambda must be >= 0");
    photo_params.validate();
    smooth_params.validate();
  }
};

struct LossReport {
  double photometric = 0.0;
  double smoothness = 0.0;
  double total = 0.0;
  FlowField grad_flow;
};

// Charbonnier-penalized difference between I1 and I2 warped backward by the
// flow. Returns the loss value and writes dL/d(u,v).
inline double photometric_loss(const FlowField& flow, const Image& I1, const Image& I2,
                               const LossConfig& cfg, FlowField& grad_flow) {
  require(I1.same_dims(I2), ErrorCode::DimensionMismatch, "photometric_loss: image dims differ");
  require(I1.height == flow.height && I1.width == flow.width, ErrorCode::DimensionMismatch,
          "photometric_loss: flow dims differ");
  const int H = I1.height, W = I1.width, C = I1.channels;

  WarpResult wr = bilinear_warp(I2, flow);
  grad_flow = FlowField(H, W);

  double value = 0.0;
  size_t included = 0;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      if (cfg.mask_out_of_bounds && !wr.mask.at(x, y)) continue;
      double gu = 0.0, gv = 0.0;
      for (int c = 0; c < C; ++c) {
        double r = I1.at(x, y, c) - wr.warped.at(x, y, c);
        value += rho(r, cfg.photo_params);
        // d rho/d u = rho'(r) * (-d warped/d x2); same pattern for v
        double gr = rho_prime(r, cfg.photo_params);
        gu -= gr * wr.d_dx2[c].at(x, y);
        gv -= gr * wr.d_dy2[c].at(x, y);
      }
      grad_flow.u.at(x, y) = gu;
      grad_flow.v.at(x, y) = gv;
      included += size_t(C);
    }
  }
  if (cfg.normalize_by_pixel_count && included > 0) {
    double inv = 1.0 / double(included);
    value *= inv;
    for (auto& g : grad_flow.u.data) g *= inv;
    for (auto& g : grad_flow.v.data) g *= inv;
  }
  return value;
}

// Charbonnier penalty on horizontal and vertical first differences of u and
// v; differences that would cross the border are skipped. When normalizing,
// the divisor is the number of difference terms 2*(H*(W-1) + (H-1)*W).
inline double smoothness_loss(const FlowField& flow, const LossConfig& cfg, FlowField& grad_flow) {
  const int H = flow.height, W = flow.width;
  grad_flow = FlowField(H, W);
  const CharbonnierParams& p = cfg.smooth_params;

  double value = 0.0;
  for (const ScalarGrid* comp : {&flow.u, &flow.v}) {
    ScalarGrid& grad = (comp == &flow.u) ? grad_flow.u : grad_flow.v;
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        if (x + 1 < W) {
          double d = comp->at(x, y) - comp->at(x + 1, y);
          value += rho(d, p);
          double g = rho_prime(d, p);
          grad.at(x, y) += g;
          grad.at(x + 1, y) -= g;
        }
        if (y + 1 < H) {
          double d = comp->at(x, y) - comp->at(x, y + 1);
          value += rho(d, p);
          double g = rho_prime(d, p);
          grad.at(x, y) += g;
          grad.at(x, y + 1) -= g;
        }
      }
    }
  }
  size_t terms = 2 * (size_t(H) * (W - 1) + size_t(H - 1) * W);
  if (cfg.normalize_by_pixel_count && terms > 0) {
    double inv = 1.0 / double(terms);
    value *= inv;
    for (auto& g : grad_flow.u.data) g *= inv;
    for (auto& g : grad_flow.v.data) g *= inv;
  }
  return value;
}

inline LossReport total_loss(const FlowField& flow, const Image& I1, const Image& I2,
                             const LossConfig& cfg) {
  LossReport rep;
  FlowField grad_photo, grad_smooth;
  rep.photometric = photometric_loss(flow, I1, I2, cfg, grad_photo);
  rep.smoothness = smoothness_loss(flow, cfg, grad_smooth);
  rep.total = rep.photometric + cfg.lambda * rep.smoothness;
  rep.grad_flow = FlowField(flow.height, flow.width);
  for (size_t i = 0; i < rep.grad_flow.u.data.size(); ++i) {
    rep.grad_flow.u.data[i] = grad_photo.u.data[i] + cfg.lambda * grad_smooth.u.data[i];
    rep.grad_flow.v.data[i] = grad_photo.v.data[i] + cfg.lambda * grad_smooth.v.data[i];
  }
  return rep;
}

struct MultiscaleReport {
  double value = 0.0;
  double photometric = 0.0;  // weighted sums across levels
  double smoothness = 0.0;
  std::vector<LossReport> levels;      // per level, unweighted
  std::vector<FlowField> grads;        // d value / d prediction, per level
};

// Evaluates total_loss at every prediction scale. Each prediction's dims
// must divide the full dims by a power of two; images are repeatedly 2x2
// area-averaged down to each level. Flows are taken in their own level's
// pixel units.
inline MultiscaleReport multiscale_loss(const std::vector<FlowField>& predictions,
                                        const Image& I1, const Image& I2,
                                        const std::vector<double>& weights,
                                        const LossConfig& cfg) {
  require(I1.same_dims(I2), ErrorCode::DimensionMismatch, "multiscale_loss: image dims differ");
  require(predictions.size() == weights.size(), ErrorCode::DimensionMismatch,
          "multiscale_loss: weights count differs from predictions");
  MultiscaleReport rep;
  rep.levels.reserve(predictions.size());
  rep.grads.reserve(predictions.size());

  for (size_t k = 0; k < predictions.size(); ++k) {
    const FlowField& pred = predictions[k];
    int factor_w = I1.width / pred.width;
    int factor_h = I1.height / pred.height;
    require(factor_w == factor_h && factor_w >= 1 && factor_w * pred.width == I1.width &&
                factor_h * pred.height == I1.height && (factor_w & (factor_w - 1)) == 0,
            ErrorCode::DimensionMismatch, "multiscale_loss: level dims must divide full dims by 2^k");
    int down = 0;
    for (int f = factor_w; f > 1; f >>= 1) ++down;

    Image L1 = downsample_levels(I1, down);
    Image L2 = downsample_levels(I2, down);
    LossReport lr = total_loss(pred, L1, L2, cfg);
    rep.value += weights[k] * lr.total;
    rep.photometric += weights[k] * lr.photometric;
    rep.smoothness += weights[k] * lr.smoothness;

    FlowField g(pred.height, pred.width);
    for (size_t i = 0; i < g.u.data.size(); ++i) {
      g.u.data[i] = weights[k] * lr.grad_flow.u.data[i];
      g.v.data[i] = weights[k] * lr.grad_flow.v.data[i];
    }
    rep.levels.push_back(std::move(lr));
    rep.grads.push_back(std::move(g));
  }
  return rep;
}

}  // namespace uflow
