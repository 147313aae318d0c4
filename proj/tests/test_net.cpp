#include "uflow/net.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "support/oracles.hpp"
#include "uflow/gradcheck.hpp"
#include "uflow/rng.hpp"

using namespace uflow;

TEST(Conv, OneByOneIdentity) {
  Rng rng(1);
  Tensor4d x(1, 1, 4, 4);
  for (auto& v : x.data) v = rng.uniform01();
  std::vector<double> w = {1.0};
  std::vector<double> b = {0.0};
  // kernel 1 is outside the layer contract; drive the primitive via the
  // six-loop-equivalent k=3 delta kernel instead
  std::vector<double> w3(9, 0.0);
  w3[4] = 1.0;
  Tensor4d y = conv_fwd<double>(x, {w3.data(), w3.size()}, {b.data(), b.size()}, 1, 3, 1);
  for (size_t i = 0; i < x.data.size(); ++i) EXPECT_DOUBLE_EQ(y.data[i], x.data[i]);
}

TEST(Conv, BoxSumWithZeroPadding) {
  Tensor4d x(1, 1, 5, 5, 1.0);
  std::vector<double> w(9, 1.0), b = {0.0};
  Tensor4d y = conv_fwd<double>(x, {w.data(), w.size()}, {b.data(), b.size()}, 1, 3, 1);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 2, 2), 9.0);  // interior
  EXPECT_DOUBLE_EQ(y.at(0, 0, 0, 0), 4.0);  // corner
  EXPECT_DOUBLE_EQ(y.at(0, 0, 0, 2), 6.0);  // edge
}

TEST(Conv, MatchesSixLoopOracle) {
  Rng rng(3);
  for (auto [stride, kernel] : {std::pair{1, 3}, {2, 3}, {1, 5}, {2, 5}}) {
    Tensor4d x(2, 3, 7, 6);
    for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
    int out_ch = 4;
    std::vector<double> w(size_t(out_ch) * 3 * kernel * kernel), b(out_ch);
    for (auto& v : w) v = rng.normal(0.0, 0.5);
    for (auto& v : b) v = rng.uniform(-0.3, 0.3);
    Tensor4d got = conv_fwd<double>(x, {w.data(), w.size()}, {b.data(), b.size()}, out_ch, kernel,
                                    stride);
    Tensor4d want = oracle::conv_six_loop(x, w, b, out_ch, kernel, stride);
    ASSERT_TRUE(got.same_shape(want));
    for (size_t i = 0; i < got.data.size(); ++i) ASSERT_NEAR(got.data[i], want.data[i], 1e-12);
  }
}

TEST(Conv, StrideTwoUsesCeilSemantics) {
  Tensor4d x(1, 1, 8, 7, 1.0);
  std::vector<double> w(9, 0.0), b = {0.0};
  Tensor4d y = conv_fwd<double>(x, {w.data(), w.size()}, {b.data(), b.size()}, 1, 3, 2);
  EXPECT_EQ(y.h, 4);
  EXPECT_EQ(y.w, 4);
}

TEST(ConvBackward, ZeroUpstreamGivesZeroGrads) {
  Rng rng(5);
  Tensor4d x(1, 2, 6, 6);
  for (auto& v : x.data) v = rng.uniform01();
  std::vector<double> w(size_t(3) * 2 * 9);
  for (auto& v : w) v = rng.normal(0.0, 0.5);
  Tensor4d up(1, 3, 6, 6, 0.0);
  Tensor4d gx = conv_bwd_input<double>({w.data(), w.size()}, up, 2, 3, 1, 6, 6);
  auto gw = conv_bwd_weights(x, up, 3, 1);
  auto gb = conv_bwd_bias(up);
  for (double v : gx.data) EXPECT_EQ(v, 0.0);
  for (double v : gw) EXPECT_EQ(v, 0.0);
  for (double v : gb) EXPECT_EQ(v, 0.0);
}

TEST(ConvBackward, BiasGradientIsUpstreamSum) {
  Rng rng(7);
  Tensor4d up(2, 3, 4, 4);
  for (auto& v : up.data) v = rng.uniform(-1.0, 1.0);
  auto gb = conv_bwd_bias(up);
  for (int oc = 0; oc < 3; ++oc) {
    double want = 0.0;
    for (int n = 0; n < 2; ++n)
      for (int i = 0; i < 16; ++i) want += up.plane(n, oc)[i];
    EXPECT_NEAR(gb[oc], want, 1e-12);
  }
}

TEST(ConvBackward, FiniteDifference) {
  for (const auto& r : check_layers())
    EXPECT_TRUE(r.pass) << r.name << " max_rel_err=" << r.max_rel_err;
}

TEST(LeakyRelu, ValuesAndTieBreak) {
  Tensor4d x(1, 1, 1, 3);
  x.data = {2.0, -2.0, 0.0};
  Tensor4d y = x;
  leaky_relu_fwd(y, 0.1);
  EXPECT_DOUBLE_EQ(y.data[0], 2.0);
  EXPECT_DOUBLE_EQ(y.data[1], -0.2);
  EXPECT_DOUBLE_EQ(y.data[2], 0.0);

  Tensor4d up(1, 1, 1, 3, 1.0);
  Tensor4d gx = leaky_relu_bwd(up, y, 0.1);
  EXPECT_DOUBLE_EQ(gx.data[0], 1.0);
  EXPECT_DOUBLE_EQ(gx.data[1], 0.1);
  EXPECT_DOUBLE_EQ(gx.data[2], 1.0);  // declared convention at exactly 0
}

TEST(Upsample2x, AdjointDotProduct) {
  Rng rng(9);
  Tensor4d x(1, 2, 4, 4);
  for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
  Tensor4d y = upsample2x_fwd(x);
  Tensor4d u(1, 2, 8, 8);
  for (auto& v : u.data) v = rng.uniform(-1.0, 1.0);
  Tensor4d gx = upsample2x_bwd(u, 4, 4);
  double lhs = 0.0, rhs = 0.0;
  for (size_t i = 0; i < y.data.size(); ++i) lhs += y.data[i] * u.data[i];
  for (size_t i = 0; i < x.data.size(); ++i) rhs += x.data[i] * gx.data[i];
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

namespace {

Image smooth_image(uint64_t seed, int h, int w) {
  return gradcheck_detail::noise_image(seed, h, w, 3);
}

}  // namespace

TEST(MiniFlowNet, ZeroParamsPredictZeroFlow) {
  MiniFlowNet net;
  net.set_params(std::vector<double>(net.param_count(), 0.0));
  MiniFlowNet::ForwardPass ws;
  std::vector<FlowField> flows = net.forward_pair(smooth_image(1, 32, 32), smooth_image(2, 32, 32), ws);
  ASSERT_EQ(flows.size(), 3u);
  for (const auto& f : flows) {
    for (double v : f.u.data) EXPECT_EQ(v, 0.0);
    for (double v : f.v.data) EXPECT_EQ(v, 0.0);
  }
}

TEST(MiniFlowNet, LevelDimsContract) {
  MiniFlowNet net;
  net.init_params(3);
  MiniFlowNet::ForwardPass ws;
  auto flows = net.forward_pair(smooth_image(4, 64, 48), smooth_image(5, 64, 48), ws);
  EXPECT_EQ(flows[0].height, 8);
  EXPECT_EQ(flows[0].width, 6);
  EXPECT_EQ(flows[1].height, 16);
  EXPECT_EQ(flows[1].width, 12);
  EXPECT_EQ(flows[2].height, 32);
  EXPECT_EQ(flows[2].width, 24);
  FlowField full = net.predict_full(smooth_image(4, 64, 48), smooth_image(5, 64, 48));
  EXPECT_EQ(full.height, 64);
  EXPECT_EQ(full.width, 48);
}

TEST(MiniFlowNet, IndivisibleDimsRejected) {
  MiniFlowNet net;
  net.init_params(6);
  MiniFlowNet::ForwardPass ws;
  Image a = smooth_image(7, 40, 40);  // 40 % 16 != 0
  EXPECT_THROW(net.forward_pair(a, a, ws), Error);
}

TEST(MiniFlowNet, DeterministicReplay) {
  MiniFlowNet a, b;
  a.init_params(42);
  b.init_params(42);
  ASSERT_EQ(a.params(), b.params());
  MiniFlowNet::ForwardPass wa, wb;
  Image I1 = smooth_image(8, 32, 32), I2 = smooth_image(9, 32, 32);
  auto fa = a.forward_pair(I1, I2, wa);
  auto fb = b.forward_pair(I1, I2, wb);
  for (size_t k = 0; k < fa.size(); ++k) {
    EXPECT_EQ(fa[k].u.data, fb[k].u.data);
    EXPECT_EQ(fa[k].v.data, fb[k].v.data);
  }
}

TEST(MiniFlowNet, BackwardZeroGradsOnZeroUpstream) {
  MiniFlowNet net;
  net.init_params(10);
  MiniFlowNet::ForwardPass ws;
  std::vector<Tensor4d> flows = net.forward(stack_pair(smooth_image(11, 32, 32), smooth_image(12, 32, 32)), ws);
  std::vector<Tensor4d> zero_grads;
  for (const auto& f : flows) zero_grads.emplace_back(f.n, f.c, f.h, f.w, 0.0);
  std::vector<double> grads = net.backward(ws, zero_grads);
  for (double g : grads) EXPECT_EQ(g, 0.0);
}

TEST(MiniFlowNet, UpstreamLinearity) {
  MiniFlowNet net;
  net.init_params(13);
  MiniFlowNet::ForwardPass ws;
  std::vector<Tensor4d> flows = net.forward(stack_pair(smooth_image(14, 32, 32), smooth_image(15, 32, 32)), ws);
  Rng rng(16);
  std::vector<Tensor4d> g1;
  for (const auto& f : flows) {
    Tensor4d t(f.n, f.c, f.h, f.w);
    for (auto& v : t.data) v = rng.uniform(-1.0, 1.0);
    g1.push_back(std::move(t));
  }
  std::vector<Tensor4d> g2 = g1;
  for (auto& t : g2)
    for (auto& v : t.data) v *= 2.0;
  std::vector<double> p1 = net.backward(ws, g1);
  std::vector<double> p2 = net.backward(ws, g2);
  for (size_t i = 0; i < p1.size(); ++i) EXPECT_NEAR(p2[i], 2.0 * p1[i], 1e-9 + 1e-9 * std::abs(p2[i]));
}

TEST(MiniFlowNet, StaleActivationsRejected) {
  MiniFlowNet net;
  net.init_params(17);
  MiniFlowNet::ForwardPass ws;
  std::vector<Tensor4d> flows = net.forward(stack_pair(smooth_image(18, 32, 32), smooth_image(19, 32, 32)), ws);
  std::vector<Tensor4d> grads;
  for (const auto& f : flows) grads.emplace_back(f.n, f.c, f.h, f.w, 0.0);

  net.mutable_params()[0] += 0.1;
  net.bump_version();
  try {
    net.backward(ws, grads);
    FAIL() << "expected error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::StaleActivations);
  }
}

TEST(MiniFlowNet, WholeNetworkGradientCheck) {
  for (const auto& r : check_network(12))
    EXPECT_TRUE(r.pass) << r.name << " max_rel_err=" << r.max_rel_err;
}
