#include <gtest/gtest.h>

#include <cmath>

#include "semtest/autodiff.hpp"
#include "semtest/error.hpp"
#include "helpers.hpp"

using namespace semtest;
using semtest::testing::gradient_error;
using semtest::testing::GraphFunction;
using semtest::testing::random_tensor;

namespace {

constexpr int kPoints = 100;
constexpr double kTolerance = 1e-4;

void expect_gradients_match(const GraphFunction& fn, Shape shape, std::uint64_t seed, double lo = -1.0,
                            double hi = 1.0) {
  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < kPoints; ++i) {
    worst = std::max(worst, gradient_error(fn, random_tensor(rng, shape, lo, hi)));
  }
  EXPECT_LT(worst, kTolerance);
}

// Moves every element at least `gap` away from zero, keeping its sign.
Tensor away_from_zero(Tensor t, double gap) {
  for (double& v : t.data()) v = v >= 0 ? v + gap : v - gap;
  return t;
}

}  // namespace

TEST(AutodiffForward, MatmulOfOnes) {
  ad::Graph g;
  const ad::Var a = g.leaf(Tensor(Shape{2, 3}, 1.0));
  const ad::Var b = g.leaf(Tensor(Shape{3, 1}, 1.0));
  const Tensor& out = g.value(g.matmul(a, b));
  EXPECT_EQ(out.shape(), (Shape{2, 1}));
  EXPECT_EQ(out.values(), (std::vector<double>{3.0, 3.0}));
}

TEST(AutodiffForward, Relu) {
  ad::Graph g;
  EXPECT_EQ(g.value(g.relu(g.leaf(Tensor::vector({-1, 0, 2})))).values(), (std::vector<double>{0, 0, 2}));
}

TEST(AutodiffForward, SoftmaxOfZerosIsUniform) {
  ad::Graph g;
  const Tensor& s = g.value(g.softmax(g.leaf(Tensor::vector({0, 0, 0}))));
  for (double v : s.data()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(AutodiffForward, SoftmaxRowsAreDistributions) {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    ad::Graph g;
    const Tensor& s = g.value(g.softmax(g.leaf(random_tensor(rng, {4, 5}, -30, 30))));
    for (std::size_t r = 0; r < 4; ++r) {
      double total = 0;
      for (std::size_t c = 0; c < 5; ++c) {
        const double v = s[r * 5 + c];
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        total += v;
      }
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST(AutodiffForward, SoftmaxSurvivesLargeLogits) {
  ad::Graph g;
  const Tensor& s = g.value(g.softmax(g.leaf(Tensor::vector({1000, 0}))));
  EXPECT_TRUE(all_finite(s));
  EXPECT_DOUBLE_EQ(s[0], 1.0);
}

TEST(AutodiffForward, ShapeMismatchNamesOperationAndShapes) {
  ad::Graph g;
  const ad::Var a = g.leaf(Tensor(Shape{2, 3}));
  const ad::Var b = g.leaf(Tensor(Shape{2, 3}));
  try {
    g.matmul(a, b);
    FAIL() << "expected a shape error";
  } catch (const ShapeError& e) {
    EXPECT_EQ(e.operation(), "matmul");
    EXPECT_EQ(e.lhs_shape(), "[2,3]");
    EXPECT_EQ(e.rhs_shape(), "[2,3]");
  }
  EXPECT_THROW(g.add(a, g.leaf(Tensor(Shape{3, 2}))), ShapeError);
}

TEST(AutodiffForward, ForwardRefreshesAfterSetValue) {
  ad::Graph g;
  const ad::Var x = g.leaf(Tensor::scalar(2.0));
  const ad::Var y = g.mul(x, x);
  EXPECT_EQ(g.value(y).item(), 4.0);
  g.set_value(x, Tensor::scalar(5.0));
  EXPECT_EQ(g.forward(y).item(), 25.0);
  EXPECT_THROW(g.set_value(x, Tensor::vector({1, 2})), ShapeError);
  EXPECT_THROW(g.set_value(y, Tensor::scalar(1.0)), InvalidArgument);
}

TEST(AutodiffBackward, SquareAtThree) {
  ad::Graph g;
  const ad::Var x = g.leaf(Tensor::scalar(3.0));
  EXPECT_DOUBLE_EQ(g.backward(g.mul(x, x), {x})[0].item(), 6.0);
}

TEST(AutodiffBackward, SumOfSoftmaxHasZeroGradient) {
  Rng rng(3);
  ad::Graph g;
  const ad::Var v = g.leaf(random_tensor(rng, {6}, -3, 3));
  const Tensor grad = g.backward(g.sum(g.softmax(v)), {v})[0];
  for (double d : grad.data()) EXPECT_NEAR(d, 0.0, 1e-15);
}

TEST(AutodiffBackward, NonScalarRootIsRejected) {
  ad::Graph g;
  const ad::Var x = g.leaf(Tensor::vector({1, 2}));
  EXPECT_THROW(g.backward(g.tanh(x), {x}), ShapeError);
}

TEST(AutodiffBackward, ForeignLeafIsRejected) {
  ad::Graph g, other;
  const ad::Var x = g.leaf(Tensor::scalar(1.0));
  const ad::Var y = other.leaf(Tensor::scalar(1.0));
  EXPECT_THROW(g.backward(g.mul(x, x), {y}), InvalidArgument);
  EXPECT_THROW(g.backward(g.mul(x, x), {g.tanh(x)}), InvalidArgument);
}

TEST(AutodiffBackward, GradientShapesMatchLeaves) {
  Rng rng(5);
  ad::Graph g;
  const ad::Var w = g.leaf(random_tensor(rng, {4, 3}));
  const ad::Var x = g.leaf(random_tensor(rng, {2, 4}));
  const ad::Var b = g.leaf(random_tensor(rng, {3}));
  const ad::Var loss = g.sum(g.tanh(g.add_bias(g.matmul(x, w), b)));
  const auto grads = g.backward(loss, {w, x, b});
  EXPECT_EQ(grads[0].shape(), (Shape{4, 3}));
  EXPECT_EQ(grads[1].shape(), (Shape{2, 4}));
  EXPECT_EQ(grads[2].shape(), (Shape{3}));
}

TEST(AutodiffBackward, UnusedLeafGetsZeroGradient) {
  ad::Graph g;
  const ad::Var x = g.leaf(Tensor::scalar(2.0));
  const ad::Var unused = g.leaf(Tensor::vector({1, 2, 3}));
  const auto grads = g.backward(g.mul(x, x), {x, unused});
  EXPECT_EQ(grads[1], Tensor(Shape{3}));
}

TEST(AutodiffBackward, ReluGradientAtZeroIsZero) {
  ad::Graph g;
  const ad::Var x = g.leaf(Tensor::vector({0.0, 1.0, -1.0}));
  EXPECT_EQ(g.backward(g.sum(g.relu(x)), {x})[0].values(), (std::vector<double>{0, 1, 0}));
}

TEST(AutodiffBackward, Linearity) {
  Rng rng(17);
  const double a = 1.7, b = -0.4;
  for (int i = 0; i < 50; ++i) {
    const Tensor p = random_tensor(rng, {5});
    auto f = [](ad::Graph& g, ad::Var x) { return g.sum(g.tanh(g.mul(x, x))); };
    auto h = [](ad::Graph& g, ad::Var x) { return g.sum(g.sigmoid(x)); };
    ad::Graph g;
    const ad::Var x = g.leaf(p);
    const Tensor combined = g.backward(g.add(g.scale(f(g, x), a), g.scale(h(g, x), b)), {x})[0];
    const Tensor gf = semtest::testing::analytic_gradient(f, p);
    const Tensor gh = semtest::testing::analytic_gradient(h, p);
    for (std::size_t j = 0; j < p.numel(); ++j) EXPECT_NEAR(combined[j], a * gf[j] + b * gh[j], 1e-9);
  }
}

TEST(AutodiffBackward, Deterministic) {
  Rng rng(23);
  const Tensor w = random_tensor(rng, {6, 4});
  const Tensor x = random_tensor(rng, {3, 6});
  auto run = [&] {
    ad::Graph g;
    const ad::Var wv = g.leaf(w);
    const ad::Var xv = g.leaf(x);
    const ad::Var loss = g.softmax_cross_entropy(g.matmul(xv, wv), {0, 3, 1});
    return std::make_pair(g.value(loss), g.backward(loss, {wv, xv}));
  };
  const auto first = run();
  const auto second = run();
  EXPECT_TRUE(bitwise_equal(first.first, second.first));
  for (std::size_t i = 0; i < 2; ++i) EXPECT_TRUE(bitwise_equal(first.second[i], second.second[i]));
}

TEST(FiniteDifference, QuadraticAtThree) {
  const Tensor g = ad::finite_difference_gradient([](const Tensor& x) { return x[0] * x[0]; }, Tensor::scalar(3.0), 1e-5);
  EXPECT_NEAR(g.item(), 6.0, 1e-7);
}

TEST(FiniteDifference, SumGivesOnes) {
  Rng rng(2);
  const Tensor p = random_tensor(rng, {7}, -100, 100);
  const Tensor g = ad::finite_difference_gradient(
      [](const Tensor& x) {
        double s = 0;
        for (double v : x.data()) s += v;
        return s;
      },
      p, 1e-5);
  for (double v : g.data()) EXPECT_NEAR(v, 1.0, 1e-6);
}

TEST(FiniteDifference, RejectsNonPositiveStep) {
  EXPECT_THROW(ad::finite_difference_gradient([](const Tensor&) { return 0.0; }, Tensor::scalar(1.0), 0.0),
               InvalidArgument);
}

TEST(GradientCheck, MatMul) {
  Rng rng(100);
  const Tensor w = random_tensor(rng, {4, 3});
  expect_gradients_match([&](ad::Graph& g, ad::Var x) { return g.sum(g.tanh(g.matmul(x, g.leaf(w)))); }, {2, 4},
                         101);
  const Tensor x = random_tensor(rng, {2, 4});
  expect_gradients_match([&](ad::Graph& g, ad::Var wv) { return g.sum(g.tanh(g.matmul(g.leaf(x), wv))); }, {4, 3},
                         102);
}

TEST(GradientCheck, AddSubMulScale) {
  Rng rng(110);
  const Tensor other = random_tensor(rng, {5});
  expect_gradients_match([&](ad::Graph& g, ad::Var x) { return g.sum(g.mul(g.add(x, g.leaf(other)), x)); }, {5}, 111);
  expect_gradients_match([&](ad::Graph& g, ad::Var x) { return g.sum(g.mul(g.sub(g.leaf(other), x), x)); }, {5}, 112);
  expect_gradients_match([&](ad::Graph& g, ad::Var x) { return g.sum(g.tanh(g.add_scalar(g.scale(x, 2.5), 0.3))); },
                         {5}, 113);
}

TEST(GradientCheck, AddBias) {
  Rng rng(120);
  const Tensor x = random_tensor(rng, {3, 4});
  expect_gradients_match([&](ad::Graph& g, ad::Var b) { return g.sum(g.tanh(g.add_bias(g.leaf(x), b))); }, {4}, 121);
}

TEST(GradientCheck, ReluAwayFromKink) {
  Rng rng(130);
  double worst = 0;
  for (int i = 0; i < kPoints; ++i) {
    const Tensor p = away_from_zero(random_tensor(rng, {6}), 1e-3);
    worst = std::max(worst, gradient_error([](ad::Graph& g, ad::Var x) { return g.sum(g.mul(g.relu(x), x)); }, p));
  }
  EXPECT_LT(worst, kTolerance);
}

TEST(GradientCheck, TanhSigmoidSoftplus) {
  expect_gradients_match([](ad::Graph& g, ad::Var x) { return g.sum(g.mul(g.tanh(x), x)); }, {6}, 140, -3, 3);
  expect_gradients_match([](ad::Graph& g, ad::Var x) { return g.sum(g.mul(g.sigmoid(x), x)); }, {6}, 141, -5, 5);
  expect_gradients_match([](ad::Graph& g, ad::Var x) { return g.sum(g.mul(g.softplus(x), x)); }, {6}, 142, -5, 5);
}

TEST(GradientCheck, Softmax) {
  Rng rng(150);
  const Tensor weights = random_tensor(rng, {3, 4});
  expect_gradients_match([&](ad::Graph& g, ad::Var x) { return g.sum(g.mul(g.softmax(x), g.leaf(weights))); }, {3, 4},
                         151, -3, 3);
}

TEST(GradientCheck, SoftmaxCrossEntropy) {
  expect_gradients_match([](ad::Graph& g, ad::Var x) { return g.softmax_cross_entropy(x, {2, 0, 1}); }, {3, 4}, 160,
                         -4, 4);
}

TEST(GradientCheck, ReshapeConcatSumMean) {
  Rng rng(170);
  const Tensor other = random_tensor(rng, {2, 2});
  expect_gradients_match(
      [&](ad::Graph& g, ad::Var x) {
        const ad::Var parts[] = {g.reshape(x, {2, 3}), g.leaf(other), x.graph()->reshape(g.tanh(x), {2, 3})};
        return g.mean(g.mul(g.concat(parts), g.concat(parts)));
      },
      {6}, 171);
  expect_gradients_match([](ad::Graph& g, ad::Var x) { return g.sum(g.tanh(x)); }, {3, 3}, 172);
}

TEST(GradientCheck, MaxGatherMaxExcept) {
  Rng rng(180);
  double worst = 0;
  for (int i = 0; i < kPoints; ++i) {
    Tensor p = random_tensor(rng, {2, 4});
    // Spread the entries so that the max is unique under the finite-difference step.
    for (std::size_t j = 0; j < p.numel(); ++j) p[j] += 0.01 * static_cast<double>(j % 4);
    worst = std::max(worst, gradient_error(
                                [](ad::Graph& g, ad::Var x) {
                                  const ad::Var s = g.softmax(x);
                                  return g.add(g.sum(g.sub(g.max_except(s, {1, 2}), g.gather(s, {1, 2}))),
                                               g.sum(g.max_last(s)));
                                },
                                p));
  }
  EXPECT_LT(worst, kTolerance);
}

TEST(GradientCheck, ThreeLayerDenseNetwork) {
  Rng rng(190);
  const Tensor w1 = random_tensor(rng, {8, 6}), b1 = random_tensor(rng, {6});
  const Tensor w2 = random_tensor(rng, {6, 5}), b2 = random_tensor(rng, {5});
  const Tensor w3 = random_tensor(rng, {5, 3}), b3 = random_tensor(rng, {3});
  auto net = [&](ad::Graph& g, ad::Var x) {
    ad::Var h = g.tanh(g.add_bias(g.matmul(x, g.leaf(w1)), g.leaf(b1)));
    h = g.sigmoid(g.add_bias(g.matmul(h, g.leaf(w2)), g.leaf(b2)));
    return g.softmax_cross_entropy(g.add_bias(g.matmul(h, g.leaf(w3)), g.leaf(b3)), {1, 2});
  };
  expect_gradients_match(net, {2, 8}, 191);
}
