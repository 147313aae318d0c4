#pragma once

// Standard bias-corrected Adam over flat parameter vectors, plus the halving
// learning-rate schedule.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "uflow/error.hpp"

namespace uflow {

struct AdamParams {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;

  void validate() const {
    require(lr > 0.0, ErrorCode::BadConfig, "adam lr must be > 0");
    require(beta1 >= 0.0 && beta1 < 1.0, ErrorCode::BadConfig, "adam beta1 must be in [0,1)");
    require(beta2 >= 0.0 && beta2 < 1.0, ErrorCode::BadConfig, "adam beta2 must be in [0,1)");
    require(eps_hat > 0.0, ErrorCode::BadConfig, "adam eps_hat must be > 0");
  }
};

struct AdamState {
  std::vector<double> m;  // first moment
  std::vector<double> v;  // second moment
  int64_t t = 0;

  explicit AdamState(size_t n = 0) : m(n, 0.0), v(n, 0.0) {}

  void reset(size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
    t = 0;
  }
};

// One update: increments the step counter and writes the parameter delta
// (to be added to the parameters) into delta_out.
inline void adam_step(AdamState& state, std::span<const double> grad, const AdamParams& p,
                      std::span<double> delta_out) {
  require(state.m.size() == grad.size() && delta_out.size() == grad.size(),
          ErrorCode::DimensionMismatch, "adam_step: state/grad size mismatch");
  state.t += 1;
  double bc1 = 1.0 - std::pow(p.beta1, double(state.t));
  double bc2 = 1.0 - std::pow(p.beta2, double(state.t));
  for (size_t i = 0; i < grad.size(); ++i) {
    double g = grad[i];
    state.m[i] = p.beta1 * state.m[i] + (1.0 - p.beta1) * g;
    state.v[i] = p.beta2 * state.v[i] + (1.0 - p.beta2) * g * g;
    double mhat = state.m[i] / bc1;
    double vhat = state.v[i] / bc2;
    delta_out[i] = -p.lr * mhat / (std::sqrt(vhat) + p.eps_hat);
  }
}

// lr halves every `period` iterations (iteration counts from 0). Uses exact
// power-of-two scaling.
inline double halved_lr(double base_lr, int64_t iteration, int64_t period) {
  if (period <= 0) return base_lr;
  int64_t halvings = iteration / period;
  if (halvings > 1000) halvings = 1000;
  return std::ldexp(base_lr, -int(halvings));
}

}  // namespace uflow
