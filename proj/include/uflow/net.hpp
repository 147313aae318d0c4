#pragma once

// MiniFlowNet: a compact encoder/decoder flow network. Four stride-2
// convolutions contract the stacked image pair; the decoder alternates
// transposed convolutions with skip concatenations and emits a 2-channel
// flow prediction at 1/8, 1/4 and 1/2 resolution. Each intermediate flow is
// upsampled (values doubled) and fed into the next decoder stage. All
// gradients are computed analytically in reverse mode.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uflow/conv.hpp"
#include "uflow/grid.hpp"
#include "uflow/rng.hpp"
#include "uflow/tensor.hpp"

namespace uflow {

struct MiniFlowNetSpec {
  int input_channels = 6;
  std::vector<int> channels{16, 32, 64, 128};  // contractive stage outputs
  std::vector<int> kernels{5, 5, 3, 3};        // contractive stage kernels
  int decoder_kernel = 3;
  int prediction_levels = 3;  // at 1/8, 1/4, 1/2 of the input resolution
  double lrelu_slope = 0.1;

  int stride_product() const { return 16; }

  void validate() const {
    require(channels.size() == 4 && kernels.size() == 4, ErrorCode::BadConfig,
            "MiniFlowNetSpec: wiring expects exactly 4 contractive stages");
    require(prediction_levels == 3, ErrorCode::BadConfig,
            "MiniFlowNetSpec: wiring expects 3 prediction levels");
    for (int k : kernels)
      require(k == 3 || k == 5 || k == 7, ErrorCode::BadConfig, "bad contractive kernel");
  }
};

class MiniFlowNet {
 public:
  struct LayerDef {
    std::string name;
    ConvLayerSpec spec;
    size_t w_off = 0, w_cnt = 0, b_off = 0, b_cnt = 0;
  };

  explicit MiniFlowNet(const MiniFlowNetSpec& spec = MiniFlowNetSpec{}) : spec_(spec) {
    spec_.validate();
    build_layers();
  }

  const MiniFlowNetSpec& spec() const { return spec_; }
  const std::vector<LayerDef>& layers() const { return layers_; }
  size_t param_count() const { return params_.size(); }
  uint64_t version() const { return version_; }

  const std::vector<double>& params() const { return params_; }
  std::vector<double>& mutable_params() { return params_; }
  // Callers mutating parameters in place must bump so stale forward passes
  // are rejected by backward().
  void bump_version() { ++version_; }

  void set_params(const std::vector<double>& p) {
    require(p.size() == params_.size(), ErrorCode::DimensionMismatch, "set_params: size mismatch");
    params_ = p;
    bump_version();
  }

  // Kaiming-style fan-in init; all biases (flow heads included) start at 0
  // so initial predictions sit near zero flow.
  void init_params(uint64_t seed) {
    Rng rng(seed);
    for (const LayerDef& L : layers_) {
      double fan_in = double(L.spec.in_channels) * L.spec.kernel * L.spec.kernel;
      if (L.spec.transposed) fan_in /= double(L.spec.stride * L.spec.stride);
      double gain2 = L.spec.activation == ConvLayerSpec::Act::leaky_relu
                         ? 2.0 / (1.0 + spec_.lrelu_slope * spec_.lrelu_slope)
                         : 1.0;
      double stddev = std::sqrt(gain2 / fan_in);
      for (size_t i = 0; i < L.w_cnt; ++i) params_[L.w_off + i] = rng.normal(0.0, stddev);
      for (size_t i = 0; i < L.b_cnt; ++i) params_[L.b_off + i] = 0.0;
    }
    bump_version();
  }

  struct ForwardPass {
    uint64_t version = 0;
    bool valid = false;
    Tensor4d x, f1, f2, f3, f4;
    Tensor4d up4a, cat4, up3a, cat3, up2a, cat2;
    std::vector<Tensor4d> flows;  // coarsest first: 1/8, 1/4, 1/2
  };

  // Returns the flow predictions (coarsest first), each in its own level's
  // pixel units, and retains every activation backward() needs.
  std::vector<Tensor4d> forward(const Tensor4d& input, ForwardPass& ws) const {
    require(input.c == spec_.input_channels, ErrorCode::DimensionMismatch,
            "forward: wrong input channel count");
    require(input.h % spec_.stride_product() == 0 && input.w % spec_.stride_product() == 0,
            ErrorCode::DimensionMismatch, "forward: input dims must be divisible by 16");

    ws = ForwardPass{};
    ws.version = version_;
    ws.x = input;

    ws.f1 = layer_fwd(L_conv1, ws.x);
    ws.f2 = layer_fwd(L_conv2, ws.f1);
    ws.f3 = layer_fwd(L_conv3, ws.f2);
    ws.f4 = layer_fwd(L_conv4, ws.f3);

    ws.up4a = layer_fwd(L_up4, ws.f4);
    ws.cat4 = concat_channels<double>({&ws.up4a, &ws.f3});
    Tensor4d flow3 = layer_fwd(L_flow3, ws.cat4);

    ws.up3a = layer_fwd(L_up3, ws.cat4);
    Tensor4d upf3 = upsample2x_fwd(flow3);
    for (auto& v : upf3.data) v *= 2.0;
    ws.cat3 = concat_channels<double>({&ws.up3a, &ws.f2, &upf3});
    Tensor4d flow2 = layer_fwd(L_flow2, ws.cat3);

    ws.up2a = layer_fwd(L_up2, ws.cat3);
    Tensor4d upf2 = upsample2x_fwd(flow2);
    for (auto& v : upf2.data) v *= 2.0;
    ws.cat2 = concat_channels<double>({&ws.up2a, &ws.f1, &upf2});
    Tensor4d flow1 = layer_fwd(L_flow1, ws.cat2);

    ws.flows = {flow3, flow2, flow1};
    ws.valid = true;
    return ws.flows;
  }

  // flow_grads: dL/d prediction for each level, same order as forward's
  // return. Produces the flat parameter gradient (same layout as params()).
  std::vector<double> backward(const ForwardPass& ws,
                               const std::vector<Tensor4d>& flow_grads) const {
    require(ws.valid, ErrorCode::StaleActivations, "backward: forward pass not recorded");
    require(ws.version == version_, ErrorCode::StaleActivations,
            "backward: parameters changed since forward");
    require(flow_grads.size() == 3, ErrorCode::DimensionMismatch,
            "backward: expected 3 level gradients");
    for (int k = 0; k < 3; ++k)
      require(flow_grads[k].same_shape(ws.flows[k]), ErrorCode::DimensionMismatch,
              "backward: level gradient shape mismatch");

    std::vector<double> grads(params_.size(), 0.0);
    const int c1 = spec_.channels[0], c2 = spec_.channels[1], c3 = spec_.channels[2];

    // finest prediction head
    Tensor4d gcat2 = head_bwd(L_flow1, ws.cat2, flow_grads[2], grads);
    auto parts2 = split_channels(gcat2, {c1, c1, 2});
    Tensor4d gflow2 = upsample2x_bwd(parts2[2], ws.flows[1].h, ws.flows[1].w);
    for (size_t i = 0; i < gflow2.data.size(); ++i)
      gflow2.data[i] = 2.0 * gflow2.data[i] + flow_grads[1].data[i];

    Tensor4d gup2 = leaky_relu_bwd(parts2[0], ws.up2a, spec_.lrelu_slope);
    Tensor4d gcat3 = transposed_bwd(L_up2, ws.cat3, gup2, grads);
    accumulate(gcat3, head_bwd(L_flow2, ws.cat3, gflow2, grads));

    auto parts3 = split_channels(gcat3, {c2, c2, 2});
    Tensor4d gflow3 = upsample2x_bwd(parts3[2], ws.flows[0].h, ws.flows[0].w);
    for (size_t i = 0; i < gflow3.data.size(); ++i)
      gflow3.data[i] = 2.0 * gflow3.data[i] + flow_grads[0].data[i];

    Tensor4d gup3 = leaky_relu_bwd(parts3[0], ws.up3a, spec_.lrelu_slope);
    Tensor4d gcat4 = transposed_bwd(L_up3, ws.cat4, gup3, grads);
    accumulate(gcat4, head_bwd(L_flow3, ws.cat4, gflow3, grads));

    auto parts4 = split_channels(gcat4, {c3, c3});
    Tensor4d gup4 = leaky_relu_bwd(parts4[0], ws.up4a, spec_.lrelu_slope);
    Tensor4d gf4 = transposed_bwd(L_up4, ws.f4, gup4, grads);

    // encoder chain; skip contributions join before each activation gate
    Tensor4d gf3 = conv_stage_bwd(L_conv4, ws.f3, ws.f4, gf4, grads);
    accumulate(gf3, parts4[1]);
    Tensor4d gf2 = conv_stage_bwd(L_conv3, ws.f2, ws.f3, gf3, grads);
    accumulate(gf2, parts3[1]);
    Tensor4d gf1 = conv_stage_bwd(L_conv2, ws.f1, ws.f2, gf2, grads);
    accumulate(gf1, parts2[1]);
    conv_stage_bwd(L_conv1, ws.x, ws.f1, gf1, grads);  // input gradient discarded
    return grads;
  }

  std::vector<FlowField> forward_pair(const Image& I1, const Image& I2, ForwardPass& ws) const {
    Tensor4d input = stack_pair(I1, I2);
    std::vector<Tensor4d> flows = forward(input, ws);
    std::vector<FlowField> out;
    out.reserve(flows.size());
    for (const auto& t : flows) out.push_back(tensor_to_flow(t));
    return out;
  }

  // Full-resolution prediction: the 1/2-scale output bilinearly upsampled
  // once more with values doubled.
  FlowField predict_full(const Image& I1, const Image& I2) const {
    ForwardPass ws;
    std::vector<Tensor4d> flows = forward(stack_pair(I1, I2), ws);
    Tensor4d full = upsample2x_fwd(flows.back());
    for (auto& v : full.data) v *= 2.0;
    return tensor_to_flow(full);
  }

 private:
  // layer indices in declaration (= checkpoint) order
  enum : int {
    L_conv1 = 0, L_conv2, L_conv3, L_conv4,
    L_up4, L_flow3, L_up3, L_flow2, L_up2, L_flow1,
    kLayerCount
  };

  void add_layer(const std::string& name, ConvLayerSpec spec) {
    spec.validate();
    LayerDef L;
    L.name = name;
    L.spec = spec;
    L.w_cnt = size_t(spec.in_channels) * spec.out_channels * spec.kernel * spec.kernel;
    L.b_cnt = size_t(spec.out_channels);
    L.w_off = params_.size();
    params_.resize(params_.size() + L.w_cnt);
    L.b_off = params_.size();
    params_.resize(params_.size() + L.b_cnt);
    layers_.push_back(std::move(L));
  }

  void build_layers() {
    using Act = ConvLayerSpec::Act;
    const auto& ch = spec_.channels;
    const auto& kk = spec_.kernels;
    const int dk = spec_.decoder_kernel;
    add_layer("conv1", {spec_.input_channels, ch[0], kk[0], 2, false, Act::leaky_relu});
    add_layer("conv2", {ch[0], ch[1], kk[1], 2, false, Act::leaky_relu});
    add_layer("conv3", {ch[1], ch[2], kk[2], 2, false, Act::leaky_relu});
    add_layer("conv4", {ch[2], ch[3], kk[3], 2, false, Act::leaky_relu});
    add_layer("upconv4", {ch[3], ch[2], dk, 2, true, Act::leaky_relu});
    add_layer("flow3", {2 * ch[2], 2, dk, 1, false, Act::none});
    add_layer("upconv3", {2 * ch[2], ch[1], dk, 2, true, Act::leaky_relu});
    add_layer("flow2", {2 * ch[1] + 2, 2, dk, 1, false, Act::none});
    add_layer("upconv2", {2 * ch[1] + 2, ch[0], dk, 2, true, Act::leaky_relu});
    add_layer("flow1", {2 * ch[0] + 2, 2, dk, 1, false, Act::none});
    require(int(layers_.size()) == kLayerCount, ErrorCode::BadConfig, "layer wiring broken");
  }

  std::span<const double> w(int li) const {
    const LayerDef& L = layers_[li];
    return {params_.data() + L.w_off, L.w_cnt};
  }
  std::span<const double> b(int li) const {
    const LayerDef& L = layers_[li];
    return {params_.data() + L.b_off, L.b_cnt};
  }

  Tensor4d layer_fwd(int li, const Tensor4d& x) const {
    const ConvLayerSpec& s = layers_[li].spec;
    Tensor4d y;
    if (!s.transposed) {
      y = conv_fwd<double>(x, w(li), b(li), s.out_channels, s.kernel, s.stride);
    } else {
      // adjoint of the strided conv; output doubles the spatial dims
      y = conv_bwd_input<double>(w(li), x, s.out_channels, s.kernel, s.stride, x.h * 2, x.w * 2);
      auto bias = b(li);
      for (int item = 0; item < y.n; ++item)
        for (int oc = 0; oc < y.c; ++oc) {
          double* plane = y.plane(item, oc);
          for (int i = 0; i < y.h * y.w; ++i) plane[i] += bias[oc];
        }
    }
    if (s.activation == ConvLayerSpec::Act::leaky_relu) leaky_relu_fwd(y, spec_.lrelu_slope);
    return y;
  }

  // backward for a linear head (no activation): accumulates gw/gb, returns gx
  Tensor4d head_bwd(int li, const Tensor4d& x, const Tensor4d& up,
                    std::vector<double>& grads) const {
    const LayerDef& L = layers_[li];
    const ConvLayerSpec& s = L.spec;
    std::vector<double> gw = conv_bwd_weights(x, up, s.kernel, s.stride);
    std::vector<double> gb = conv_bwd_bias(up);
    for (size_t i = 0; i < gw.size(); ++i) grads[L.w_off + i] += gw[i];
    for (size_t i = 0; i < gb.size(); ++i) grads[L.b_off + i] += gb[i];
    return conv_bwd_input<double>(w(li), up, s.in_channels, s.kernel, s.stride, x.h, x.w);
  }

  // backward for a transposed+lrelu layer given upstream at its (gated)
  // output; x is the layer input
  Tensor4d transposed_bwd(int li, const Tensor4d& x, const Tensor4d& gup,
                          std::vector<double>& grads) const {
    const LayerDef& L = layers_[li];
    const ConvLayerSpec& s = L.spec;
    // weight gradient: roles swap because the layer is the conv's adjoint
    std::vector<double> gw = conv_bwd_weights(gup, x, s.kernel, s.stride);
    std::vector<double> gb = conv_bwd_bias(gup);
    for (size_t i = 0; i < gw.size(); ++i) grads[L.w_off + i] += gw[i];
    for (size_t i = 0; i < gb.size(); ++i) grads[L.b_off + i] += gb[i];
    return conv_fwd<double>(gup, w(li), {}, s.in_channels, s.kernel, s.stride);
  }

  // backward through conv + lrelu given upstream at the post-activation
  // output y; returns gradient at the stage input
  Tensor4d conv_stage_bwd(int li, const Tensor4d& x, const Tensor4d& y, const Tensor4d& gy,
                          std::vector<double>& grads) const {
    const LayerDef& L = layers_[li];
    const ConvLayerSpec& s = L.spec;
    Tensor4d gpre = s.activation == ConvLayerSpec::Act::leaky_relu
                        ? leaky_relu_bwd(gy, y, spec_.lrelu_slope)
                        : gy;
    std::vector<double> gw = conv_bwd_weights(x, gpre, s.kernel, s.stride);
    std::vector<double> gb = conv_bwd_bias(gpre);
    for (size_t i = 0; i < gw.size(); ++i) grads[L.w_off + i] += gw[i];
    for (size_t i = 0; i < gb.size(); ++i) grads[L.b_off + i] += gb[i];
    return conv_bwd_input<double>(w(li), gpre, s.in_channels, s.kernel, s.stride, x.h, x.w);
  }

  static void accumulate(Tensor4d& dst, const Tensor4d& src) {
    require(dst.same_shape(src), ErrorCode::DimensionMismatch, "accumulate: shape mismatch");
    for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
  }

  MiniFlowNetSpec spec_;
  std::vector<LayerDef> layers_;
  std::vector<double> params_;
  uint64_t version_ = 1;
};

}  // namespace uflow
