#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "gseg/gradcheck.hpp"
#include "gseg/ops.hpp"
#include "gseg/rng.hpp"
#include "gseg/tensor.hpp"
#include "oracles.hpp"

using namespace gseg;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

Tensor random_tensor(Shape shape, std::uint64_t seed, bool grad = false) {
  Rng rng(seed);
  return uniform_tensor(std::move(shape), -1.0, 1.0, rng, grad);
}

}  // namespace

TEST(Tensor, ShapeAndDataLengthAgree) {
  Tensor t = Tensor::zeros({2, 3, 4});
  EXPECT_EQ(t.numel(), 24u);
  EXPECT_EQ(t.data().size(), 24u);
  EXPECT_THROW(Tensor::from_data({2, 2}, {1, 2, 3}), ShapeError);
}

TEST(Tensor, GradLengthMatchesDataAndResetsToZero) {
  Tensor w = random_tensor({3, 5}, 1, true);
  sum(hadamard(w, w)).backward();
  ASSERT_EQ(w.grad().size(), w.numel());
  w.zero_grad();
  for (double g : w.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Matmul, IdentityTimesMatrix) {
  Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor m = Tensor::from_data({2, 2}, {3, 4, 5, 6});
  EXPECT_EQ(values(matmul(eye, m)), (std::vector<double>{3, 4, 5, 6}));
}

TEST(Matmul, ZeroCase) {
  Tensor a = Tensor::from_data({1, 2}, {1, 2});
  Tensor b = Tensor::from_data({2, 1}, {0, 0});
  EXPECT_EQ(values(matmul(a, b)), (std::vector<double>{0}));
}

TEST(Matmul, MismatchNamesBothShapes) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 5}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x5]"), std::string::npos) << msg;
  }
}

TEST(Matmul, MatchesNaiveLoopExactly) {
  Tensor a = random_tensor({5, 7}, 2), b = random_tensor({7, 3}, 3);
  auto expected = oracle::flatten(oracle::matmul(oracle::to_matrix(values(a), 5, 7), oracle::to_matrix(values(b), 7, 3)));
  EXPECT_EQ(values(matmul(a, b)), expected);
}

TEST(Matmul, GradientMatchesFiniteDifferencesTightly) {
  Tensor a = random_tensor({3, 4}, 4, true), b = random_tensor({4, 2}, 5, true);
  Tensor r = random_tensor({3, 2}, 6);
  std::vector<Tensor> inputs{a, b};
  GradCheckOptions opt;
  opt.tolerance = 1e-6;
  auto res = check_gradients("matmul", inputs, [&] { return sum(hadamard(matmul(a, b), r)); }, opt, 7);
  EXPECT_EQ(res.samples, 20u);
  EXPECT_TRUE(res.passed()) << res.max_rel_err;
}

TEST(Conv2d, IdentityKernelK1) {
  Tensor x = random_tensor({3, 4, 5}, 8);
  Tensor w = Tensor::zeros({3, 3, 1, 1});
  for (std::size_t c = 0; c < 3; ++c) w.mutable_data()[c * 3 + c] = 1.0;
  EXPECT_EQ(values(conv2d(x, w)), values(x));
}

TEST(Conv2d, ZeroWeightsGiveZeroOutput) {
  Tensor y = conv2d(random_tensor({2, 6, 6}, 9), Tensor::zeros({4, 2, 7, 7}));
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Conv2d, K7MatchesNestedLoopReference) {
  Tensor x = random_tensor({1, 8, 8}, 10), w = random_tensor({1, 1, 7, 7}, 11);
  EXPECT_EQ(values(conv2d(x, w)), oracle::conv2d(values(x), 1, 8, 8, values(w), 1, 7));
}

TEST(Conv2d, MultiChannelK3MatchesReference) {
  Tensor x = random_tensor({3, 5, 6}, 12), w = random_tensor({2, 3, 3, 3}, 13);
  EXPECT_EQ(values(conv2d(x, w)), oracle::conv2d(values(x), 3, 5, 6, values(w), 2, 3));
}

TEST(Conv2d, K1EqualsPerPixelChannelMatmul) {
  const std::size_t ci = 4, co = 3, h = 3, w = 5;
  Tensor x = random_tensor({ci, h, w}, 14), k = random_tensor({co, ci, 1, 1}, 15);
  // [co x ci] * [ci x (h*w)] accumulates over channels in the same order.
  auto expected = oracle::flatten(
      oracle::matmul(oracle::to_matrix(values(k), co, ci), oracle::to_matrix(values(x), ci, h * w)));
  EXPECT_EQ(values(conv2d(x, k)), expected);
}

TEST(Conv2d, RejectsEvenKernelAndChannelMismatch) {
  EXPECT_THROW(conv2d(Tensor::zeros({2, 4, 4}), Tensor::zeros({2, 2, 2, 2})), ShapeError);
  EXPECT_THROW(conv2d(Tensor::zeros({2, 4, 4}), Tensor::zeros({2, 3, 1, 1})), ShapeError);
}

TEST(SoftmaxRows, SymmetricRow) {
  EXPECT_EQ(values(softmax_rows(Tensor::from_data({1, 2}, {0, 0}))), (std::vector<double>{0.5, 0.5}));
}

TEST(SoftmaxRows, LargeLogitsDoNotOverflow) {
  auto v = values(softmax_rows(Tensor::from_data({1, 2}, {1000, 0})));
  EXPECT_TRUE(std::isfinite(v[0]) && std::isfinite(v[1]));
  EXPECT_NEAR(v[0], 1.0, 1e-15);
  EXPECT_NEAR(v[1], 0.0, 1e-15);
}

TEST(SoftmaxRows, OneTwoThreeMatchesExtendedPrecision) {
  // Reference evaluated in long double: e^(k-3) / (e^-2 + e^-1 + 1).
  const long double z = std::exp(-2.0L) + std::exp(-1.0L) + 1.0L;
  const long double ref[3] = {std::exp(-2.0L) / z, std::exp(-1.0L) / z, 1.0L / z};
  auto v = values(softmax_rows(Tensor::from_data({1, 3}, {1, 2, 3})));
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(v[i], static_cast<double>(ref[i]), 1e-12);
  // Published constants for softmax([1,2,3]).
  EXPECT_NEAR(v[0], 0.09003057317038046, 1e-12);
  EXPECT_NEAR(v[2], 0.6652409557748219, 1e-12);
}

TEST(SoftmaxRows, RowsSumToOneAndStayInUnitInterval) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Tensor s = softmax_rows(scale(random_tensor({6, 9}, seed), 20.0));
    for (std::size_t i = 0; i < 6; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < 9; ++j) {
        const double v = s[i * 9 + j];
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        row += v;
      }
      EXPECT_NEAR(row, 1.0, 1e-9);
    }
  }
}

TEST(Elementwise, SigmoidAndGeluFixedPoints) {
  EXPECT_EQ(sigmoid(Tensor::scalar(0.0)).item(), 0.5);
  EXPECT_EQ(gelu(Tensor::scalar(0.0)).item(), 0.0);
  EXPECT_EQ(gelu(Tensor::scalar(0.0), GeluMode::erf).item(), 0.0);
}

TEST(Elementwise, SigmoidStrictlyInsideUnitInterval) {
  auto v = values(sigmoid(Tensor::from_data({4}, {-1000, -40, 40, 1000})));
  for (double s : v) {
    EXPECT_GT(s, 0.0);
    EXPECT_LT(s, 1.0);
  }
}

TEST(Elementwise, GeluTanhMatchesFormula) {
  Tensor x = random_tensor({50}, 16);
  auto y = values(gelu(scale(x, 3.0)));
  for (std::size_t i = 0; i < 50; ++i) EXPECT_NEAR(y[i], oracle::gelu_tanh(3.0 * x[i]), 1e-15);
}

TEST(Elementwise, GeluErfMatchesFormula) {
  for (double v : {-2.5, -0.3, 0.7, 3.1}) {
    EXPECT_NEAR(gelu_value(v, GeluMode::erf), 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))), 1e-15);
  }
}

TEST(Elementwise, HadamardWithOnesIsIdentity) {
  Tensor a = random_tensor({3, 4}, 17);
  EXPECT_EQ(values(hadamard(a, Tensor::full({3, 4}, 1.0))), values(a));
  EXPECT_THROW(hadamard(a, Tensor::zeros({4, 3})), ShapeError);
}

TEST(Elementwise, ForwardOpsStayFinite) {
  Tensor x = scale(random_tensor({4, 8, 8}, 18), 50.0);
  for (const Tensor& y : {sigmoid(x), gelu(x), gelu(x, GeluMode::erf), softmax_rows(x)}) {
    for (double v : y.data()) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(Backward, SumGivesOnes) {
  Tensor w = random_tensor({3, 3}, 19, true);
  sum(w).backward();
  for (double g : w.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, ZeroScaledLossGivesZeros) {
  Tensor w = random_tensor({3, 3}, 20, true);
  scale(sum(w), 0.0).backward();
  for (double g : w.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, SigmoidSumMatchesFiniteDifferences) {
  Tensor w = random_tensor({4, 5}, 21, true);
  std::vector<Tensor> inputs{w};
  GradCheckOptions opt;
  opt.tolerance = 1e-6;
  auto res = check_gradients("sigmoid", inputs, [&] { return sum(sigmoid(w)); }, opt, 3);
  EXPECT_TRUE(res.passed()) << res.max_rel_err;
}

TEST(Backward, RepeatedCallsAccumulate) {
  Tensor w = random_tensor({2, 2}, 22, true);
  Tensor loss = sum(scale(w, 3.0));
  loss.backward();
  loss.backward();
  for (double g : w.grad()) EXPECT_EQ(g, 6.0);
}

TEST(Backward, RejectsNonScalarLoss) {
  Tensor w = random_tensor({2, 2}, 23, true);
  EXPECT_THROW(scale(w, 2.0).backward(), std::exception);
}

TEST(Backward, SharedSubexpressionGetsBothContributions) {
  Tensor w = Tensor::from_data({2}, {1.5, -2.0}, true);
  Tensor y = hadamard(w, w);  // d/dw sum(w*w + w) = 2w + 1
  sum(add(y, w)).backward();
  EXPECT_EQ(w.grad()[0], 4.0);
  EXPECT_EQ(w.grad()[1], -3.0);
}

TEST(CrossEntropy, MatchesLogSumExp) {
  Tensor logits = random_tensor({3, 2, 2}, 24);
  std::vector<std::int32_t> labels{0, 2, 1, 1};
  double expected = 0.0;
  for (std::size_t p = 0; p < 4; ++p) {
    double z = 0.0;
    for (std::size_t c = 0; c < 3; ++c) z += std::exp(logits[c * 4 + p]);
    expected += std::log(z) - logits[static_cast<std::size_t>(labels[p]) * 4 + p];
  }
  EXPECT_NEAR(cross_entropy(logits, labels).item(), expected / 4.0, 1e-14);
}

TEST(Gather, TransposeSwapsLastTwoAxes) {
  Tensor a = Tensor::from_data({1, 2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(values(transpose(a)), (std::vector<double>{1, 4, 2, 5, 3, 6}));
}
