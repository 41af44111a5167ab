#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nex/nn.hpp"
#include "oracles.hpp"

using namespace nex;

TEST(Encoding, Dimensions) {
  EXPECT_EQ(encode_position(3, 4, 1, {}).size(), 56u);
  EXPECT_EQ(encode_view(0.1, -0.2).size(), 12u);
  EXPECT_EQ(kPositionEncodingDim, 20 + 20 + 16);
}

TEST(Encoding, FrequenciesAreHalfPiOctaves) {
  const auto e = positional_encode(0.3, 4);
  for (int k = 0; k < 4; ++k) {
    const double w = M_PI / 2 * std::pow(2.0, k) * 0.3;
    EXPECT_NEAR(e[2 * k], std::sin(w), 1e-15);
    EXPECT_NEAR(e[2 * k + 1], std::cos(w), 1e-15);
  }
  EXPECT_THROW(positional_encode(0.0, 0), std::invalid_argument);
}

TEST(Encoding, PositionNormalizesEachChannel) {
  PositionNorms n;
  n.x = {0, 31};
  n.y = {0, 23};
  n.d = {0, 7};
  const auto e = encode_position(31, 0, 3.5, n);
  const auto ex = positional_encode(1.0, 10), ey = positional_encode(-1.0, 10), ed = positional_encode(0.0, 8);
  for (int i = 0; i < 20; ++i) {
    EXPECT_NEAR(e[i], ex[i], 1e-15);
    EXPECT_NEAR(e[20 + i], ey[i], 1e-15);
  }
  for (int i = 0; i < 16; ++i) EXPECT_NEAR(e[40 + i], ed[i], 1e-15);
}

TEST(Encoding, ViewIsUnnormalized) {
  const auto e = encode_view(0.25, -0.5);
  const auto ex = positional_encode(0.25, 3), ey = positional_encode(-0.5, 3);
  for (int i = 0; i < 6; ++i) {
    EXPECT_NEAR(e[i], ex[i], 1e-15);
    EXPECT_NEAR(e[6 + i], ey[i], 1e-15);
  }
}

TEST(Mlp, GlorotBoundsAndZeroBias) {
  std::mt19937_64 rng(1);
  const Mlp net({56, 40, 10}, Activation::leaky_relu, Activation::linear, rng);
  const double lim0 = std::sqrt(6.0 / (56 + 40)), lim1 = std::sqrt(6.0 / (40 + 10));
  EXPECT_LE(net.layers()[0].weight.cwiseAbs().maxCoeff(), lim0);
  EXPECT_LE(net.layers()[1].weight.cwiseAbs().maxCoeff(), lim1);
  EXPECT_GT(net.layers()[0].weight.cwiseAbs().maxCoeff(), 0.9 * lim0);
  EXPECT_EQ(net.layers()[0].bias.norm(), 0.0);
  EXPECT_EQ(net.parameter_count(), 56u * 40 + 40 + 40 * 10 + 10);
}

TEST(Mlp, SameSeedSameWeights) {
  std::mt19937_64 a(9), b(9);
  const Mlp n1({5, 7, 3}, Activation::leaky_relu, Activation::tanh, a);
  const Mlp n2({5, 7, 3}, Activation::leaky_relu, Activation::tanh, b);
  EXPECT_EQ(n1.layers()[0].weight, n2.layers()[0].weight);
  EXPECT_EQ(n1.layers()[1].weight, n2.layers()[1].weight);
}

TEST(Mlp, ForwardMatchesHandComputation) {
  std::mt19937_64 rng(2);
  Mlp net({2, 3, 3}, Activation::leaky_relu, Activation::tanh, rng);
  net.set_head_activation(0, Activation::sigmoid);
  net.set_head_activation(2, Activation::linear);
  const Eigen::Vector2d x(0.4, -1.3);
  Eigen::Vector3d h = net.layers()[0].weight * x + net.layers()[0].bias;
  for (int i = 0; i < 3; ++i) h[i] = h[i] > 0 ? h[i] : kLeakySlope * h[i];
  const Eigen::Vector3d z = net.layers()[1].weight * h + net.layers()[1].bias;
  const Eigen::VectorXd y = net.forward(Eigen::VectorXd(x));
  EXPECT_NEAR(y[0], 1 / (1 + std::exp(-z[0])), 1e-15);
  EXPECT_NEAR(y[1], std::tanh(z[1]), 1e-15);
  EXPECT_NEAR(y[2], z[2], 1e-15);
  // Batched and single-sample passes agree.
  Eigen::MatrixXd xs(2, 2);
  xs.col(0) = x;
  xs.col(1) = -x;
  const Eigen::MatrixXd ys = net.forward(xs);
  EXPECT_NEAR((ys.col(0) - y).norm(), 0.0, 1e-15);
}

TEST(Mlp, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  Mlp net({6, 8, 8, 4}, Activation::leaky_relu, Activation::tanh, rng);
  net.set_head_activation(0, Activation::sigmoid);
  net.set_head_activation(3, Activation::linear);
  for (auto& l : net.layers()) l.bias.setRandom();
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::MatrixXd x(6, 5), w(4, 5);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  for (int i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
  // Scalar objective: sum(w .* f(x)).
  auto objective = [&] { return (net.forward(x).array() * w.array()).sum(); };

  MlpCache cache;
  net.forward(x, &cache);
  MlpGradient g = net.zero_gradient();
  const Eigen::MatrixXd gx = net.backward(cache, w, g, true);

  double worst = 0.0;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    auto& layer = net.layers()[l];
    for (int i = 0; i < layer.weight.size(); i += 3) {
      const double fd = oracle::central_difference(objective, layer.weight.data()[i], 1e-6);
      worst = std::max(worst, oracle::rel_err(g.weight[l].data()[i], fd));
    }
    for (int i = 0; i < layer.bias.size(); ++i) {
      const double fd = oracle::central_difference(objective, layer.bias.data()[i], 1e-6);
      worst = std::max(worst, oracle::rel_err(g.bias[l].data()[i], fd));
    }
  }
  for (int i = 0; i < x.size(); ++i) {
    const double fd = oracle::central_difference(objective, x.data()[i], 1e-6);
    worst = std::max(worst, oracle::rel_err(gx.data()[i], fd));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Mlp, BackwardAccumulates) {
  std::mt19937_64 rng(5);
  const Mlp net({3, 4, 2}, Activation::leaky_relu, Activation::linear, rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 4), go = Eigen::MatrixXd::Random(2, 4);
  MlpCache cache;
  net.forward(x, &cache);
  MlpGradient once = net.zero_gradient(), twice = net.zero_gradient();
  net.backward(cache, go, once, false);
  net.backward(cache, go, twice, false);
  net.backward(cache, go, twice, false);
  EXPECT_NEAR((twice.weight[0] - 2 * once.weight[0]).norm(), 0.0, 1e-14);
}

TEST(Adam, SingleStepMatchesClosedForm) {
  std::vector<double> a{1.0, -2.0}, b{0.5};
  std::vector<ParamView> params{{"a", 0, a, {2}}, {"b", 1, b, {1}}};
  AdamState st;
  st.reset(params);
  const std::vector<double> ga{0.3, -0.1}, gb{2.0};
  const std::vector<std::span<const double>> grads{ga, gb};
  const double lrs[2] = {0.01, 0.001};
  adam_step(st, params, grads, lrs);
  // First step: m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
  EXPECT_NEAR(a[0], 1.0 - 0.01 * 0.3 / (0.3 + 1e-8), 1e-15);
  EXPECT_NEAR(a[1], -2.0 + 0.01 * 0.1 / (0.1 + 1e-8), 1e-15);
  EXPECT_NEAR(b[0], 0.5 - 0.001 * 2.0 / (2.0 + 1e-8), 1e-15);
  // Second step against a scalar re-implementation.
  double m = 0.1 * 0.3, v = 0.001 * 0.09, p = a[0];
  m = 0.9 * m + 0.1 * 0.3;
  v = 0.999 * v + 0.001 * 0.09;
  p -= 0.01 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
  adam_step(st, params, grads, lrs);
  EXPECT_NEAR(a[0], p, 1e-15);
  EXPECT_EQ(st.step, 2);
}

TEST(Adam, NanGradientNamesGroup) {
  std::vector<double> a{1.0};
  std::vector<ParamView> params{{"color_net.w0", 1, a, {1}}};
  AdamState st;
  const std::vector<double> g{std::nan("")};
  const std::vector<std::span<const double>> grads{g};
  const double lrs[2] = {0.01, 0.001};
  const std::vector<std::string> names{"base", "nets"};
  try {
    adam_step(st, params, grads, lrs, names);
    FAIL() << "expected a throw";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("nets"), std::string::npos);
  }
  EXPECT_EQ(a[0], 1.0);
}

TEST(Schedule, StepDecay) {
  EXPECT_DOUBLE_EQ(lr_schedule(0.01, 0), 0.01);
  EXPECT_DOUBLE_EQ(lr_schedule(0.01, 1332), 0.01);
  EXPECT_NEAR(lr_schedule(0.01, 1333), 0.001, 1e-18);
  EXPECT_NEAR(lr_schedule(0.01, 2666), 0.0001, 1e-18);
  EXPECT_NEAR(lr_schedule(0.001, 3999), 1e-6, 1e-20);
  EXPECT_THROW(lr_schedule(0.01, -1), std::invalid_argument);
}

TEST(Activation, ParseRoundTrip) {
  for (auto a : {Activation::linear, Activation::leaky_relu, Activation::sigmoid, Activation::tanh})
    EXPECT_EQ(parse_activation(to_string(a)), a);
  EXPECT_THROW(parse_activation("gelu"), std::invalid_argument);
}
