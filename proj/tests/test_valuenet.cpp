#include <gtest/gtest.h>

#include <sstream>

#include "uavnet/rng.hpp"
#include "uavnet/valuenet.hpp"

using namespace uavnet;

namespace {

std::vector<int> random_dims(Rng& rng) {
  std::vector<int> dims{1 + static_cast<int>(rng.below(8))};
  const int hidden = static_cast<int>(rng.below(3));
  for (int i = 0; i < hidden; ++i) dims.push_back(1 + static_cast<int>(rng.below(10)));
  dims.push_back(1 + static_cast<int>(rng.below(6)));
  return dims;
}

Matrix random_matrix(Rng& rng, int rows, int cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

// Plain nested loops, one sample at a time.
std::vector<double> interpret(const DenseNet& net, std::vector<double> x) {
  for (const auto& l : net.layers) {
    std::vector<double> y(l.out());
    for (int r = 0; r < l.out(); ++r) {
      double acc = l.bias(r);
      for (int c = 0; c < l.in(); ++c) acc += l.weight(r, c) * x[c];
      y[r] = l.activation == Activation::relu ? (acc > 0 ? acc : 0.0) : acc;
    }
    x = std::move(y);
  }
  return x;
}

}  // namespace

TEST(Init, ZeroHiddenIsAffine) {
  std::vector<int> dims{3, 2};
  std::vector<Activation> acts{Activation::identity};
  DenseNet net = init(dims, acts, 4);
  Vector x(3);
  x << 1, -2, 0.5;
  Vector y = forward(net, x);
  Vector expected = net.layers[0].weight * x + net.layers[0].bias;
  EXPECT_TRUE(y.isApprox(expected));
}

TEST(Init, SeededAndZeroBias) {
  DenseNet a = make_mlp({5, 7, 3}, 11);
  DenseNet b = make_mlp({5, 7, 3}, 11);
  DenseNet c = make_mlp({5, 7, 3}, 12);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
  for (const auto& l : a.layers) EXPECT_EQ(l.bias.squaredNorm(), 0.0);
  const double bound = std::sqrt(6.0 / 12.0);
  EXPECT_LE(a.layers[0].weight.cwiseAbs().maxCoeff(), bound);
  EXPECT_EQ(a.parameter_count(), 5u * 7 + 7 + 7 * 3 + 3);
  EXPECT_EQ(a.layers[0].activation, Activation::relu);
  EXPECT_EQ(a.layers[1].activation, Activation::identity);
}

TEST(Init, RejectsBadShapes) {
  std::vector<int> one{3};
  std::vector<Activation> none;
  EXPECT_THROW(init(one, none, 1), InputError);
  std::vector<int> dims{3, 0};
  std::vector<Activation> acts{Activation::relu};
  EXPECT_THROW(init(dims, acts, 1), InputError);
}

TEST(Forward, IdentityLayer) {
  DenseNet net;
  net.layers.push_back({Matrix::Identity(4, 4), Vector::Zero(4), Activation::identity});
  Vector x = Vector::LinSpaced(4, -1, 2);
  EXPECT_EQ(forward(net, x), x);
}

TEST(Forward, ReluClampsNegatives) {
  DenseNet net;
  net.layers.push_back({Matrix::Identity(3, 3), Vector::Constant(3, -5), Activation::relu});
  Vector x(3);
  x << 1, 2, 3;
  EXPECT_EQ(forward(net, x), Vector::Zero(3));
}

TEST(Forward, MatchesInterpreter) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    auto dims = random_dims(rng);
    DenseNet net = make_mlp(std::span<const int>(dims), rng.next());
    for (auto& l : net.layers) l.bias = random_matrix(rng, l.out(), 1, 0.3);
    Matrix x = random_matrix(rng, dims.front(), 4);
    Matrix y = forward(net, x);
    for (int b = 0; b < 4; ++b) {
      std::vector<double> xv(x.col(b).data(), x.col(b).data() + x.rows());
      auto ref = interpret(net, xv);
      for (int r = 0; r < y.rows(); ++r) EXPECT_NEAR(y(r, b), ref[r], 1e-12);
    }
  }
  DenseNet net = make_mlp({3, 2}, 1);
  EXPECT_THROW(forward(net, Matrix(Matrix::Zero(4, 1))), InputError);
}

TEST(Backward, LinearWeightGradIsOuterProduct) {
  DenseNet net = make_mlp({3, 2}, 5);
  Matrix x = Matrix::Zero(3, 1);
  x << 1, 2, 3;
  Matrix up(2, 1);
  up << 0.5, -1;
  ForwardCache cache;
  forward(net, x, &cache);
  Gradients g = backward(net, cache, up);
  EXPECT_TRUE(g.weight[0].isApprox(up * x.transpose()));
  EXPECT_TRUE(g.bias[0].isApprox(up.col(0)));
  EXPECT_TRUE(g.input.isApprox(net.layers[0].weight.transpose() * up));
}

TEST(Backward, ZeroUpstream) {
  DenseNet net = make_mlp({4, 6, 2}, 3);
  ForwardCache cache;
  forward(net, Matrix::Ones(4, 3), &cache);
  Gradients g = backward(net, cache, Matrix::Zero(2, 3));
  EXPECT_EQ(g.squared_norm(), 0.0);
  EXPECT_EQ(g.input.squaredNorm(), 0.0);
}

TEST(GradCheck, FreshNetsPass) {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    auto dims = random_dims(rng);
    DenseNet net = make_mlp(std::span<const int>(dims), rng.next());
    Matrix x = random_matrix(rng, dims.front(), 1 + static_cast<int>(rng.below(3)));
    Matrix up = random_matrix(rng, dims.back(), x.cols());
    auto res = grad_check(net, x, 1e-4, &up);
    ASSERT_TRUE(res.passed) << "trial " << trial << " err " << res.max_relative_error;
    ASSERT_GT(res.checked, 0u);
  }
}

TEST(GradCheck, CorruptedGradientFails) {
  DenseNet net = make_mlp({3, 4, 2}, 9);
  Matrix x = Matrix::Ones(3, 2);
  ForwardCache cache;
  forward(net, x, &cache);
  Gradients g = backward(net, cache, Matrix::Ones(2, 2));
  g.weight[1](0, 0) += 0.5;
  auto res = grad_check(net, x, 1e-4, nullptr, &g);
  EXPECT_FALSE(res.passed);
  EXPECT_GT(res.max_relative_error, 1e-2);
}

TEST(GradCheck, IdentityNetNearMachinePrecision) {
  DenseNet net;
  net.layers.push_back({Matrix::Identity(3, 3), Vector::Zero(3), Activation::identity});
  auto res = grad_check(net, Matrix::Constant(3, 1, 0.7), 1e-4);
  EXPECT_TRUE(res.passed);
  EXPECT_LT(res.max_relative_error, 1e-8);
}

TEST(Adam, ZeroGradientFromFreshStateKeepsParameters) {
  DenseNet net = make_mlp({3, 4, 2}, 2);
  DenseNet before = net;
  AdamState s = AdamState::for_net(net, 1e-3);
  opt_step(net, Gradients::zeros_like(net), s);
  EXPECT_TRUE(net == before);
  EXPECT_EQ(s.step, 1);
}

TEST(Adam, SingleScalarClosedForm) {
  DenseNet net;
  net.layers.push_back({Matrix::Constant(1, 1, 0.8), Vector::Zero(1), Activation::identity});
  AdamState s = AdamState::for_net(net, 0.01);
  Gradients g = Gradients::zeros_like(net);
  g.weight[0](0, 0) = 0.3;
  opt_step(net, g, s);
  // m_hat = g, v_hat = g^2 after one bias-corrected step.
  EXPECT_NEAR(net.layers[0].weight(0, 0), 0.8 - 0.01 * 0.3 / (0.3 + 1e-8), 1e-15);

  g.weight[0](0, 0) = -0.1;
  opt_step(net, g, s);
  const double m = 0.9 * (0.1 * 0.3) + 0.1 * -0.1;
  const double v = 0.999 * (0.001 * 0.09) + 0.001 * 0.01;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  const double p1 = 0.8 - 0.01 * 0.3 / (0.3 + 1e-8);
  EXPECT_NEAR(net.layers[0].weight(0, 0), p1 - 0.01 * mh / (std::sqrt(vh) + 1e-8), 1e-14);
}

TEST(Adam, IdenticalStatesAgree) {
  DenseNet a = make_mlp({4, 5, 3}, 8);
  DenseNet b = a;
  AdamState sa = AdamState::for_net(a, 1e-3), sb = AdamState::for_net(b, 1e-3);
  ForwardCache cache;
  forward(a, Matrix::Ones(4, 2), &cache);
  Gradients g = backward(a, cache, Matrix::Ones(3, 2));
  for (int i = 0; i < 3; ++i) {
    opt_step(a, g, sa);
    opt_step(b, g, sb);
  }
  EXPECT_TRUE(a == b);
}

TEST(Checkpoint, RoundTripIsExact) {
  NamedNets nets{{"agent_1", make_mlp({6, 8, 4}, 1)}, {"mixer_v", make_mlp({6, 3, 1}, 2)}};
  nets[0].second.layers[0].bias(2) = -0.1;
  nets[1].second.layers[1].weight(0, 0) = 1e-300;
  std::stringstream buf;
  save_checkpoint(buf, nets);
  NamedNets back = load_checkpoint(buf);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].first, "agent_1");
  EXPECT_TRUE(back[0].second == nets[0].second);
  EXPECT_TRUE(back[1].second == nets[1].second);
}

TEST(Checkpoint, RejectsDamage) {
  NamedNets nets{{"a", make_mlp({2, 2}, 1)}};
  std::stringstream buf;
  save_checkpoint(buf, nets);
  std::string text = buf.str();
  std::istringstream bad_version(std::string("uavnet-checkpoint 9\n") + text.substr(text.find('\n') + 1));
  EXPECT_THROW(load_checkpoint(bad_version), ParseError);
  std::istringstream truncated(text.substr(0, text.size() - 10));
  EXPECT_THROW(load_checkpoint(truncated), ParseError);
}
