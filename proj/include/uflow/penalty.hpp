#pragma once

// Generalized Charbonnier penalty rho(x) = (x^2 + eps^2)^alpha and its
// derivative. Shared by the photometric and smoothness losses.

#include <cmath>

#include "uflow/error.hpp"

namespace uflow {

struct CharbonnierParams {
  double alpha = 0.25;
  double epsilon = 1e-3;

  void validate() const {
    require(alpha > 0.0 && alpha <= 1.0, ErrorCode::BadConfig, "charbonnier alpha must be in (0,1]");
    require(epsilon > 0.0, ErrorCode::BadConfig, "charbonnier epsilon must be > 0");
  }
};

inline double rho(double x, const CharbonnierParams& p) {
  return std::pow(x * x + p.epsilon * p.epsilon, p.alpha);
}

inline double rho_prime(double x, const CharbonnierParams& p) {
  return 2.0 * p.alpha * x * std::pow(x * x + p.epsilon * p.epsilon, p.alpha - 1.0);
}

}  // namespace uflow
