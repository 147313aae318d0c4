#pragma once

// Central finite-difference verification of every analytic gradient in the
// toolkit. The checks only ever evaluate forward passes, so they stay
// independent of the reverse-mode code they validate.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "uflow/data.hpp"
#include "uflow/losses.hpp"
#include "uflow/net.hpp"
#include "uflow/penalty.hpp"
#include "uflow/rng.hpp"
#include "uflow/warp.hpp"

namespace uflow {

struct CheckResult {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

namespace gradcheck_detail {

inline double rel_err(double analytic, double fd) {
  double denom = std::max({std::abs(analytic), std::abs(fd), 1e-6});
  return std::abs(analytic - fd) / denom;
}

inline CheckResult summarize(const std::string& name, double max_err, double tol) {
  return {name, max_err, tol, max_err <= tol};
}

// smooth random test image from the procedural texture
inline Image noise_image(uint64_t seed, int h, int w, int channels = 3) {
  detail::ProceduralTexture tex(seed, channels);
  Image img(h, w, channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) img.at(x, y, c) = tex.value(x * 3.1, y * 3.1, c);
  return img;
}

}  // namespace gradcheck_detail

inline std::vector<CheckResult> check_penalty() {
  using namespace gradcheck_detail;
  std::vector<CheckResult> out;
  const double h = 1e-6, tol = 1e-5;
  std::vector<CharbonnierParams> param_sets = {
      {0.25, 1e-3}, {0.38, 1e-3}, {0.37, 1e-3}, {0.21, 1e-3}, {0.5, 1e-3}, {1.0, 1e-3}};
  Rng rng(41);
  for (const auto& p : param_sets) {
    double max_err = 0.0;
    for (int i = 0; i < 100; ++i) {
      double x = rng.uniform(-2.0, 2.0);
      double fd = (rho(x + h, p) - rho(x - h, p)) / (2.0 * h);
      max_err = std::max(max_err, rel_err(rho_prime(x, p), fd));
    }
    char name[64];
    std::snprintf(name, sizeof(name), "penalty rho' (alpha=%.2f)", p.alpha);
    out.push_back(summarize(name, max_err, tol));
  }
  return out;
}

inline std::vector<CheckResult> check_warp() {
  using namespace gradcheck_detail;
  const double h = 1e-4, tol = 1e-4;
  Image src = noise_image(7, 8, 8);
  Rng rng(99);
  FlowField flow(8, 8);
  for (auto& v : flow.u.data) v = rng.uniform(0.1, 0.7);
  for (auto& v : flow.v.data) v = rng.uniform(0.1, 0.7);
  Image upstream(8, 8, 3);
  for (auto& v : upstream.data) v = rng.uniform(-1.0, 1.0);

  auto objective = [&](const FlowField& f) {
    WarpResult wr = bilinear_warp(src, f);
    double s = 0.0;
    for (size_t i = 0; i < wr.warped.data.size(); ++i) s += upstream.data[i] * wr.warped.data[i];
    return s;
  };

  FlowField grad_flow;
  Image grad_src;
  warp_backward(src, flow, upstream, grad_flow, grad_src);

  double max_err = 0.0;
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      FlowField fp = flow;
      fp.u.at(x, y) += h;
      FlowField fm = flow;
      fm.u.at(x, y) -= h;
      max_err = std::max(max_err,
                         rel_err(grad_flow.u.at(x, y), (objective(fp) - objective(fm)) / (2 * h)));
      fp = flow;
      fp.v.at(x, y) += h;
      fm = flow;
      fm.v.at(x, y) -= h;
      max_err = std::max(max_err,
                         rel_err(grad_flow.v.at(x, y), (objective(fp) - objective(fm)) / (2 * h)));
    }
  return {summarize("warp grad_flow", max_err, tol)};
}

namespace gradcheck_detail {

template <class Objective>
double flow_fd_check(const FlowField& flow, const FlowField& analytic, Objective&& objective,
                     double h, int samples, uint64_t seed) {
  Rng rng(seed);
  double max_err = 0.0;
  for (int i = 0; i < samples; ++i) {
    int x = int(rng.uniform_int(0, flow.width - 1));
    int y = int(rng.uniform_int(0, flow.height - 1));
    bool comp_u = rng.bernoulli(0.5);
    FlowField fp = flow, fm = flow;
    ScalarGrid& gp = comp_u ? fp.u : fp.v;
    ScalarGrid& gm = comp_u ? fm.u : fm.v;
    gp.at(x, y) += h;
    gm.at(x, y) -= h;
    double fd = (objective(fp) - objective(fm)) / (2 * h);
    double an = comp_u ? analytic.u.at(x, y) : analytic.v.at(x, y);
    max_err = std::max(max_err, rel_err(an, fd));
  }
  return max_err;
}

}  // namespace gradcheck_detail

inline std::vector<CheckResult> check_losses() {
  using namespace gradcheck_detail;
  std::vector<CheckResult> out;
  LossConfig cfg;
  cfg.validate();

  Image I1 = noise_image(11, 8, 8);
  Image I2 = noise_image(12, 8, 8);
  Rng rng(13);
  FlowField flow(8, 8);
  for (auto& v : flow.u.data) v = rng.uniform(0.1, 0.7);
  for (auto& v : flow.v.data) v = rng.uniform(0.1, 0.7);

  {
    FlowField grad;
    photometric_loss(flow, I1, I2, cfg, grad);
    auto obj = [&](const FlowField& f) {
      FlowField g;
      return photometric_loss(f, I1, I2, cfg, g);
    };
    // small step: the warp is piecewise linear but the Charbonnier curvature
    // near zero residuals is ~1/eps^1.5
    out.push_back(summarize("photometric_loss grad",
                            flow_fd_check(flow, grad, obj, 1e-5, 50, 21), 1e-4));
  }
  {
    FlowField flow6(6, 6);
    Rng r6(14);
    for (auto& v : flow6.u.data) v = r6.uniform(-1.5, 1.5);
    for (auto& v : flow6.v.data) v = r6.uniform(-1.5, 1.5);
    FlowField grad;
    smoothness_loss(flow6, cfg, grad);
    auto obj = [&](const FlowField& f) {
      FlowField g;
      return smoothness_loss(f, cfg, g);
    };
    out.push_back(
        summarize("smoothness_loss grad", flow_fd_check(flow6, grad, obj, 1e-6, 50, 22), 1e-5));
  }
  {
    LossReport rep = total_loss(flow, I1, I2, cfg);
    auto obj = [&](const FlowField& f) { return total_loss(f, I1, I2, cfg).total; };
    out.push_back(summarize("total_loss grad",
                            flow_fd_check(flow, rep.grad_flow, obj, 1e-6, 50, 23), 1e-4));
  }
  return out;
}

namespace gradcheck_detail {

// finite differences of an arbitrary scalar function of a conv layer's
// inputs/weights/bias against the analytic backward outputs
struct LayerCheckContext {
  Tensor4d x;
  std::vector<double> w, b;
  Tensor4d upstream;
  int out_ch, kernel, stride;
};

inline double layer_objective_fwd(const LayerCheckContext& ctx, const Tensor4d& x,
                                  const std::vector<double>& w, const std::vector<double>& b) {
  Tensor4d y = conv_fwd<double>(x, {w.data(), w.size()}, {b.data(), b.size()}, ctx.out_ch,
                                ctx.kernel, ctx.stride);
  double s = 0.0;
  for (size_t i = 0; i < y.data.size(); ++i) s += ctx.upstream.data[i] * y.data[i];
  return s;
}

inline CheckResult check_conv_layer(const std::string& name, int in_ch, int out_ch, int kernel,
                                    int stride, uint64_t seed) {
  LayerCheckContext ctx;
  Rng rng(seed);
  ctx.x = Tensor4d(2, in_ch, 6, 6);
  for (auto& v : ctx.x.data) v = rng.uniform(-1.0, 1.0);
  ctx.w.resize(size_t(out_ch) * in_ch * kernel * kernel);
  for (auto& v : ctx.w) v = rng.normal(0.0, 0.4);
  ctx.b.resize(out_ch);
  for (auto& v : ctx.b) v = rng.uniform(-0.2, 0.2);
  ctx.out_ch = out_ch;
  ctx.kernel = kernel;
  ctx.stride = stride;
  ctx.upstream = Tensor4d(2, out_ch, conv_out_dim(6, stride), conv_out_dim(6, stride));
  for (auto& v : ctx.upstream.data) v = rng.uniform(-1.0, 1.0);

  Tensor4d gx = conv_bwd_input<double>({ctx.w.data(), ctx.w.size()}, ctx.upstream, in_ch, kernel,
                                       stride, 6, 6);
  std::vector<double> gw = conv_bwd_weights(ctx.x, ctx.upstream, kernel, stride);
  std::vector<double> gb = conv_bwd_bias(ctx.upstream);

  const double h = 1e-5;
  double max_err = 0.0;
  Rng pick(seed ^ 0xF00D);
  for (int i = 0; i < 40; ++i) {
    int what = int(pick.uniform_int(0, 2));
    if (what == 0) {
      size_t j = size_t(pick.uniform_int(0, int64_t(ctx.x.data.size()) - 1));
      Tensor4d xp = ctx.x, xm = ctx.x;
      xp.data[j] += h;
      xm.data[j] -= h;
      double fd =
          (layer_objective_fwd(ctx, xp, ctx.w, ctx.b) - layer_objective_fwd(ctx, xm, ctx.w, ctx.b)) /
          (2 * h);
      max_err = std::max(max_err, rel_err(gx.data[j], fd));
    } else if (what == 1) {
      size_t j = size_t(pick.uniform_int(0, int64_t(ctx.w.size()) - 1));
      auto wp = ctx.w, wm = ctx.w;
      wp[j] += h;
      wm[j] -= h;
      double fd =
          (layer_objective_fwd(ctx, ctx.x, wp, ctx.b) - layer_objective_fwd(ctx, ctx.x, wm, ctx.b)) /
          (2 * h);
      max_err = std::max(max_err, rel_err(gw[j], fd));
    } else {
      size_t j = size_t(pick.uniform_int(0, int64_t(ctx.b.size()) - 1));
      auto bp = ctx.b, bm = ctx.b;
      bp[j] += h;
      bm[j] -= h;
      double fd =
          (layer_objective_fwd(ctx, ctx.x, ctx.w, bp) - layer_objective_fwd(ctx, ctx.x, ctx.w, bm)) /
          (2 * h);
      max_err = std::max(max_err, rel_err(gb[j], fd));
    }
  }
  return summarize(name, max_err, 1e-4);
}

}  // namespace gradcheck_detail

inline std::vector<CheckResult> check_layers() {
  using namespace gradcheck_detail;
  std::vector<CheckResult> out;
  out.push_back(check_conv_layer("conv k3 s1", 3, 4, 3, 1, 501));
  out.push_back(check_conv_layer("conv k3 s2", 3, 4, 3, 2, 502));
  out.push_back(check_conv_layer("conv k5 s2", 2, 3, 5, 2, 503));

  // leaky relu away from the origin
  {
    Rng rng(504);
    Tensor4d x(1, 2, 4, 4);
    for (auto& v : x.data) {
      v = rng.uniform(-1.0, 1.0);
      if (std::abs(v) < 0.05) v = 0.1;  // keep clear of the kink
    }
    Tensor4d up(1, 2, 4, 4);
    for (auto& v : up.data) v = rng.uniform(-1.0, 1.0);
    Tensor4d y = x;
    leaky_relu_fwd(y, 0.1);
    Tensor4d gx = leaky_relu_bwd(up, y, 0.1);
    const double h = 1e-6;
    double max_err = 0.0;
    for (size_t j = 0; j < x.data.size(); ++j) {
      Tensor4d xp = x, xm = x;
      xp.data[j] += h;
      xm.data[j] -= h;
      leaky_relu_fwd(xp, 0.1);
      leaky_relu_fwd(xm, 0.1);
      double sp = 0.0, sm = 0.0;
      for (size_t i = 0; i < xp.data.size(); ++i) {
        sp += up.data[i] * xp.data[i];
        sm += up.data[i] * xm.data[i];
      }
      max_err = std::max(max_err, rel_err(gx.data[j], (sp - sm) / (2 * h)));
    }
    out.push_back(summarize("leaky_relu", max_err, 1e-6));
  }
  return out;
}

// Whole-network check: true multiscale loss on a 32x32 pair, finite
// differences on a sample of parameters. Flow-head biases are pushed away
// from integer flow values so the warp stays differentiable under the
// perturbations.
inline std::vector<CheckResult> check_network(int n_params_checked = 20) {
  using namespace gradcheck_detail;
  MiniFlowNetSpec spec;
  MiniFlowNet net(spec);
  net.init_params(606);
  {
    auto& p = net.mutable_params();
    for (const auto& L : net.layers())
      if (L.name.rfind("flow", 0) == 0)
        for (size_t i = 0; i < L.b_cnt; ++i) p[L.b_off + i] = 0.4;
    net.bump_version();
  }

  Image I1 = noise_image(61, 32, 32);
  Image I2 = noise_image(62, 32, 32);
  LossConfig cfg;
  std::vector<double> weights{1.0, 1.0, 1.0};

  auto objective = [&]() {
    MiniFlowNet::ForwardPass ws;
    std::vector<Tensor4d> flows = net.forward(stack_pair(I1, I2), ws);
    std::vector<FlowField> preds;
    for (const auto& t : flows) preds.push_back(tensor_to_flow(t));
    return multiscale_loss(preds, I1, I2, weights, cfg);
  };

  MultiscaleReport mr = objective();
  MiniFlowNet::ForwardPass ws;
  std::vector<Tensor4d> flows = net.forward(stack_pair(I1, I2), ws);
  std::vector<Tensor4d> flow_grads;
  for (const auto& g : mr.grads) flow_grads.push_back(flow_to_tensor(g));
  std::vector<double> grads = net.backward(ws, flow_grads);

  Rng pick(707);
  const double h = 1e-5;
  double max_err = 0.0;
  for (int i = 0; i < n_params_checked; ++i) {
    size_t j = size_t(pick.uniform_int(0, int64_t(net.param_count()) - 1));
    double orig = net.params()[j];
    net.mutable_params()[j] = orig + h;
    net.bump_version();
    double vp = objective().value;
    net.mutable_params()[j] = orig - h;
    net.bump_version();
    double vm = objective().value;
    net.mutable_params()[j] = orig;
    net.bump_version();
    max_err = std::max(max_err, rel_err(grads[j], (vp - vm) / (2 * h)));
  }
  return {gradcheck_detail::summarize("network parameter grads", max_err, 1e-3)};
}

inline std::vector<CheckResult> run_all_gradchecks() {
  std::vector<CheckResult> all;
  for (auto&& group : {check_penalty(), check_warp(), check_losses(), check_layers(),
                       check_network()})
    all.insert(all.end(), group.begin(), group.end());
  return all;
}

}  // namespace uflow
