#pragma once

// Classical baseline: optimize a per-pair flow field directly by running
// Adam on the unsupervised loss over a coarse-to-fine image pyramid. The
// coarsest flow starts at zero; between levels the estimate is bilinearly
// upsampled and its values doubled.

#include <cstdint>
#include <vector>

#include "uflow/adam.hpp"
#include "uflow/grid.hpp"
#include "uflow/losses.hpp"
#include "uflow/pyramid.hpp"

namespace uflow {

struct PyramidConfig {
  int levels = 0;  // 0 = deepest pyramid whose coarsest level stays >= 8x8
  int iterations_per_level = 400;
  AdamParams optimizer{0.06, 0.9, 0.999, 1e-8};
  // per-iteration step-size decay within a level; anneals the search so the
  // trace settles instead of orbiting the minimum
  double lr_decay = 0.99;
};

struct SolveIterRecord {
  int level = 0;      // 0 = full resolution
  int iteration = 0;  // within the level
  double photometric = 0.0;
  double smoothness = 0.0;
  double total = 0.0;
};

struct SolveResult {
  FlowField flow;
  std::vector<SolveIterRecord> trace;
};

inline int max_pyramid_levels(int h, int w, int min_dim = 8) {
  int levels = 1;
  while (half_dim(h) >= min_dim && half_dim(w) >= min_dim) {
    h = half_dim(h);
    w = half_dim(w);
    ++levels;
  }
  return levels;
}

inline SolveResult solve_flow(const Image& I1, const Image& I2, const LossConfig& loss_cfg,
                              const PyramidConfig& pyr, uint64_t seed = 0) {
  (void)seed;  // zero initialization is deterministic; kept for interface stability
  require(I1.same_dims(I2), ErrorCode::DimensionMismatch, "solve_flow: image dims differ");
  loss_cfg.validate();
  pyr.optimizer.validate();

  int levels = pyr.levels > 0 ? pyr.levels : max_pyramid_levels(I1.height, I1.width);
  {
    int h = I1.height, w = I1.width;
    for (int i = 1; i < levels; ++i) {
      h = half_dim(h);
      w = half_dim(w);
    }
    require(h >= 8 && w >= 8, ErrorCode::PyramidTooDeep,
            "solve_flow: coarsest pyramid level would fall below 8x8");
  }

  std::vector<Image> pyr1(levels), pyr2(levels);
  pyr1[0] = I1;
  pyr2[0] = I2;
  for (int k = 1; k < levels; ++k) {
    pyr1[k] = downsample_half(pyr1[k - 1]);
    pyr2[k] = downsample_half(pyr2[k - 1]);
  }

  SolveResult res;
  FlowField flow(pyr1[levels - 1].height, pyr1[levels - 1].width);

  for (int k = levels - 1; k >= 0; --k) {
    const Image& L1 = pyr1[k];
    const Image& L2 = pyr2[k];
    if (flow.height != L1.height || flow.width != L1.width)
      flow = resize_flow(flow, L1.height, L1.width);

    size_t n = flow.u.size() * 2;
    AdamState state(n);
    std::vector<double> grad(n), delta(n);
    AdamParams step_params = pyr.optimizer;

    for (int it = 0; it < pyr.iterations_per_level; ++it) {
      LossReport rep = total_loss(flow, L1, L2, loss_cfg);
      res.trace.push_back({k, it, rep.photometric, rep.smoothness, rep.total});

      size_t half = flow.u.size();
      for (size_t i = 0; i < half; ++i) grad[i] = rep.grad_flow.u.data[i];
      for (size_t i = 0; i < half; ++i) grad[half + i] = rep.grad_flow.v.data[i];
      adam_step(state, grad, step_params, delta);
      for (size_t i = 0; i < half; ++i) flow.u.data[i] += delta[i];
      for (size_t i = 0; i < half; ++i) flow.v.data[i] += delta[half + i];
      step_params.lr *= pyr.lr_decay;
    }
  }
  res.flow = std::move(flow);
  return res;
}

}  // namespace uflow
