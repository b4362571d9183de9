// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "cgl/autodiff.hpp"
#include "cgl/error.hpp"
#include "cgl/rng.hpp"

using namespace cgl;
using namespace cgl::ad;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Weighted sum with fixed random weights so every output entry matters.
Var weighted_sum(Tape& tape, const Var& x, unsigned seed) {
  Rng rng(seed);
  Tensor w = random_tensor(rng, x.shape());
  return sum(mul(x, tape.constant(std::move(w))));
}

double check_unary(const std::function<Var(const Var&)>& op, Shape shape, unsigned seed, double lo = -1.0,
                   double hi = 1.0) {
  Rng rng(seed);
  Parameter x("x", random_tensor(rng, shape, lo, hi));
  std::vector<Parameter*> params{&x};
  auto report = check_gradients([&](Tape& t) { return weighted_sum(t, op(t.leaf(x)), seed + 1); }, params);
  return report.max_rel_error;
}

double check_binary(const std::function<Var(const Var&, const Var&)>& op, Shape sa, Shape sb, unsigned seed) {
  Rng rng(seed);
  Parameter a("a", random_tensor(rng, sa));
  Parameter b("b", random_tensor(rng, sb));
  std::vector<Parameter*> params{&a, &b};
  auto report =
      check_gradients([&](Tape& t) { return weighted_sum(t, op(t.leaf(a), t.leaf(b)), seed + 1); }, params);
  return report.max_rel_error;
}

}  // namespace

TEST(Tensor, SizeMatchesShape) {
  Tensor t(Shape{3, 4}, 2.0);
  EXPECT_EQ(t.size(), 12u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  Tape tape;
  Var id = tape.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  Tensor b = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  Var out = matmul(id, tape.constant(b));
  EXPECT_EQ(out.value().data(), b.data());
}

TEST(Matmul, HandComputedProduct) {
  Tape tape;
  Var out = matmul(tape.constant(Tensor::matrix(2, 2, {1, 2, 3, 4})), tape.constant(Tensor::matrix(2, 1, {1, 1})));
  EXPECT_EQ(out.shape(), (Shape{2, 1}));
  EXPECT_DOUBLE_EQ(out.value()[0], 3.0);
  EXPECT_DOUBLE_EQ(out.value()[1], 7.0);
}

TEST(Matmul, MatchesNaiveTripleLoop) {
  Rng rng(4);
  Tensor a = random_tensor(rng, {5, 7}), b = random_tensor(rng, {7, 3});
  Tape tape;
  Var out = matmul(tape.constant(a), tape.constant(b));
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 7; ++k) s += a.at(i, k) * b.at(k, j);
      EXPECT_NEAR(out.value().at(i, j), s, 1e-12);
    }
  }
}

TEST(Matmul, VectorOperandsDropExtent) {
  Tape tape;
  Var v = tape.constant(Tensor::vector({1, 2}));
  Var m = tape.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  EXPECT_EQ(matmul(v, m).shape(), (Shape{2}));
  EXPECT_EQ(matmul(m, v).shape(), (Shape{2}));
  EXPECT_EQ(matmul(v, v).shape(), (Shape{}));
  EXPECT_DOUBLE_EQ(matmul(v, v).value()[0], 5.0);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  Tape tape;
  Var a = tape.constant(Tensor(Shape{2, 3}));
  Var b = tape.constant(Tensor(Shape{2, 3}));
  try {
    matmul(a, b);
    FAIL() << "expected a dimension error";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(2,3)"), std::string::npos) << msg;
  }
}

TEST(Matmul, GradientOfSumMatchesFiniteDifferences) {
  Rng rng(1);
  Parameter a("A", random_tensor(rng, {3, 4}));
  Parameter b("B", random_tensor(rng, {4, 2}));
  std::vector<Parameter*> params{&a, &b};
  auto report = check_gradients([&](Tape& t) { return sum(matmul(t.leaf(a), t.leaf(b))); }, params);
  EXPECT_LT(report.max_rel_error, 1e-6);
}

TEST(Elementwise, SigmoidValuesAndGradient) {
  Parameter x("x", Tensor::vector({0.0, 2.0}));
  Tape tape;
  Var y = sigmoid(tape.leaf(x));
  EXPECT_DOUBLE_EQ(y.value()[0], 0.5);
  EXPECT_NEAR(y.value()[1], 1.0 / (1.0 + std::exp(-2.0)), 1e-15);
  EXPECT_NEAR(y.value()[1], 0.8808, 1e-4);
  x.zero_grad();
  tape.backward(sum(y));
  EXPECT_DOUBLE_EQ(x.grad[0], 0.25);
}

TEST(Elementwise, ReluNegativeHasZeroGradient) {
  Parameter x("x", Tensor::vector({-3.0}));
  Tape tape;
  Var y = relu(tape.leaf(x));
  EXPECT_EQ(y.value()[0], 0.0);
  x.zero_grad();
  tape.backward(sum(y));
  EXPECT_EQ(x.grad[0], 0.0);
}

TEST(Elementwise, LogRejectsNonPositive) {
  Tape tape;
  EXPECT_THROW(log(tape.constant(Tensor::vector({1.0, 0.0}))), NumericDomainError);
  EXPECT_THROW(log(tape.constant(Tensor::vector({-1.0}))), NumericDomainError);
}

TEST(Elementwise, ClampGradientZeroOutsideRange) {
  Parameter x("x", Tensor::vector({-2.0, 0.5, 3.0}));
  Tape tape;
  Var y = clamp(tape.leaf(x), 0.0, 1.0);
  EXPECT_EQ(y.value().data(), (std::vector<double>{0.0, 0.5, 1.0}));
  x.zero_grad();
  tape.backward(sum(y));
  EXPECT_EQ(x.grad.data(), (std::vector<double>{0.0, 1.0, 0.0}));
}

TEST(Elementwise, BroadcastRules) {
  Tape tape;
  Var m = tape.constant(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  Var row = tape.constant(Tensor::vector({10, 20, 30}));
  Var s = tape.constant(Tensor::scalar(1.0));
  EXPECT_EQ(add(m, row).value().data(), (std::vector<double>{11, 22, 33, 14, 25, 36}));
  EXPECT_EQ(sub(s, m).value().data(), (std::vector<double>{0, -1, -2, -3, -4, -5}));
  Var col = tape.constant(Tensor::vector({1, 2}));
  EXPECT_THROW(add(m, col), DimensionError);
}

TEST(Softmax, UniformAndHandComputed) {
  Tape tape;
  Var u = softmax(tape.constant(Tensor::vector({0, 0, 0})), 0);
  for (double v : u.value().values()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  Var w = softmax(tape.constant(Tensor::vector({std::log(1.0), std::log(2.0), std::log(3.0)})), 0);
  EXPECT_NEAR(w.value()[0], 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(w.value()[1], 2.0 / 6.0, 1e-15);
  EXPECT_NEAR(w.value()[2], 3.0 / 6.0, 1e-15);
}

TEST(Softmax, ShiftInvarianceAndNormalization) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_tensor(rng, {4, 5}, -30.0, 30.0);
    const double c = rng.uniform(-100.0, 100.0);
    Tensor shifted = x;
    for (double& v : shifted.values()) v += c;
    for (std::size_t axis : {0u, 1u}) {
      Tape tape;
      Var a = softmax(tape.constant(x), axis);
      Var b = softmax(tape.constant(shifted), axis);
      for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(a.value()[i], b.value()[i], 1e-12);
      Var sums = reduce(Reduce::kSum, a, axis);
      for (double s : sums.value().values()) EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Softmax, EmptyAxisIsDimensionError) {
  Tape tape;
  EXPECT_THROW(softmax(tape.constant(Tensor(Shape{0})), 0), DimensionError);
}

TEST(Reduce, MeanAndSumGradients) {
  Parameter x("x", Tensor::vector({2, 4}));
  Tape tape;
  Var m = mean(tape.leaf(x));
  EXPECT_DOUBLE_EQ(m.value()[0], 3.0);
  x.zero_grad();
  tape.backward(m);
  EXPECT_EQ(x.grad.data(), (std::vector<double>{0.5, 0.5}));

  Tape tape2;
  x.zero_grad();
  tape2.backward(sum(tape2.leaf(x)));
  EXPECT_EQ(x.grad.data(), (std::vector<double>{1.0, 1.0}));
}

TEST(Reduce, MeanOfSingleRowIsRow) {
  Tape tape;
  Var r = reduce(Reduce::kMean, tape.constant(Tensor::matrix(1, 3, {1, 2, 3})), 0);
  EXPECT_EQ(r.value().data(), (std::vector<double>{1, 2, 3}));
  EXPECT_THROW(reduce(Reduce::kMean, tape.constant(Tensor(Shape{0, 3})), 0), DegenerateInputError);
}

TEST(Concat, ShapesAndGradientSplit) {
  Tape tape;
  std::vector<Var> parts;
  for (int i = 0; i < 5; ++i) parts.push_back(tape.constant(Tensor(Shape{5, 32}, 1.0)));
  EXPECT_EQ(concat(parts, 1).shape(), (Shape{5, 160}));
  EXPECT_EQ(concat(tape.constant(Tensor::vector({1})), tape.constant(Tensor::vector({2})), 0).value().data(),
            (std::vector<double>{1, 2}));
  EXPECT_THROW(concat(tape.constant(Tensor(Shape{2, 2})), tape.constant(Tensor(Shape{3, 3})), 1), DimensionError);

  Parameter a("a", Tensor::vector({1, 2})), b("b", Tensor::vector({3}));
  Tape t2;
  a.zero_grad();
  b.zero_grad();
  t2.backward(sum(concat(t2.leaf(a), t2.leaf(b), 0)));
  EXPECT_EQ(a.grad.data(), (std::vector<double>{1, 1}));
  EXPECT_EQ(b.grad.data(), (std::vector<double>{1}));
}

TEST(GatherRows, RepeatedIndicesAccumulate) {
  Parameter table("T", Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6}));
  Tape tape;
  std::vector<std::size_t> idx{0, 0};
  Var g = gather_rows(tape.leaf(table), idx);
  EXPECT_EQ(g.value().data(), (std::vector<double>{1, 2, 1, 2}));
  table.zero_grad();
  tape.backward(sum(mul(g, tape.constant(Tensor::matrix(2, 2, {1, 2, 3, 4})))));
  EXPECT_EQ(table.grad.data(), (std::vector<double>{4, 6, 0, 0, 0, 0}));
}

TEST(GatherRows, EmptyAndOutOfRange) {
  Tape tape;
  Var t = tape.constant(Tensor(Shape{3, 4}, 1.0));
  std::vector<std::size_t> none;
  EXPECT_EQ(gather_rows(t, none).shape(), (Shape{0, 4}));
  std::vector<std::size_t> bad{5};
  try {
    gather_rows(t, bad);
    FAIL();
  } catch (const IndexError& e) {
    EXPECT_NE(std::string(e.what()).find('5'), std::string::npos);
  }
  Rng rng(3);
  Tensor r = random_tensor(rng, {4, 3});
  std::vector<std::size_t> order{2, 1};
  Var g = gather_rows(tape.constant(r), order);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_EQ(g.value().at(0, j), r.at(2, j));
    EXPECT_EQ(g.value().at(1, j), r.at(1, j));
  }
}

TEST(Tape, SecondBackwardIsContractError) {
  Parameter x("x", Tensor::scalar(3.0));
  Tape tape;
  Var y = mul(tape.leaf(x), tape.leaf(x));
  x.zero_grad();
  tape.backward(y);
  EXPECT_THROW(tape.backward(y), ContractError);
}

TEST(Tape, UntrackedValuesNeverReceiveGradient) {
  Parameter x("x", Tensor::scalar(2.0));
  Tape tape;
  Var c = tape.constant(Tensor::scalar(5.0));
  Var y = mul(tape.leaf(x), c);
  EXPECT_FALSE(c.tracked());
  x.zero_grad();
  tape.backward(y);
  EXPECT_DOUBLE_EQ(x.grad[0], 5.0);
  EXPECT_FALSE(tape.tracked(c.id()));
}

TEST(Tape, DeterministicAcrossRuns) {
  auto run = [] {
    Rng rng(8);
    Parameter a("a", random_tensor(rng, {4, 4}));
    Tape tape;
    Var y = sum(tanh(matmul(tape.leaf(a), tape.leaf(a))));
    a.zero_grad();
    tape.backward(y);
    return std::make_pair(y.value()[0], a.grad.data());
  };
  EXPECT_EQ(run(), run());
}

TEST(GradientCheck, EveryPrimitiveMatchesFiniteDifferences) {
  EXPECT_LT(check_unary([](const Var& x) { return sigmoid(x); }, {3, 4}, 1), 1e-6);
  EXPECT_LT(check_unary([](const Var& x) { return tanh(x); }, {3, 4}, 2), 1e-6);
  EXPECT_LT(check_unary([](const Var& x) { return relu(x); }, {3, 4}, 3), 1e-6);
  EXPECT_LT(check_unary([](const Var& x) { return log(x); }, {3, 4}, 4, 0.5, 2.0), 1e-6);
  EXPECT_LT(check_unary([](const Var& x) { return clamp(x, -0.5, 0.5); }, {3, 4}, 5), 1e-6);
  EXPECT_LT(check_unary([](const Var& x) { return softmax(x, 0); }, {3, 4}, 6), 1e-6);
  EXPECT_LT(check_unary([](const Var& x) { return softmax(x, 1); }, {3, 4}, 7), 1e-6);
  EXPECT_LT(check_unary([](const Var& x) { return transpose(x); }, {3, 4}, 8), 1e-6);
  EXPECT_LT(check_unary([](const Var& x) { return reshape(x, {4, 3}); }, {3, 4}, 9), 1e-6);
  EXPECT_LT(check_unary([](const Var& x) { return scale(x, -2.5); }, {3, 4}, 10), 1e-6);
  EXPECT_LT(check_unary([](const Var& x) { return reduce(Reduce::kMean, x, 0); }, {3, 4}, 11), 1e-6);
  EXPECT_LT(check_unary([](const Var& x) { return reduce(Reduce::kSum, x, 1); }, {3, 4}, 12), 1e-6);
  EXPECT_LT(check_unary([](const Var& x) { return mean(x); }, {3, 4}, 13), 1e-6);
  EXPECT_LT(check_unary(
                [](const Var& x) {
                  std::vector<std::size_t> idx{2, 0, 2};
                  return gather_rows(x, idx);
                },
                {3, 4}, 14),
            1e-6);
  EXPECT_LT(check_unary([](const Var& x) { return stack_rows({x, scale(x, 2.0)}); }, {4}, 15), 1e-6);
}

TEST(GradientCheck, BinaryOpsWithBroadcasting) {
  EXPECT_LT(check_binary([](const Var& a, const Var& b) { return add(a, b); }, {3, 4}, {4}, 1), 1e-6);
  EXPECT_LT(check_binary([](const Var& a, const Var& b) { return sub(a, b); }, {3, 4}, {3, 4}, 2), 1e-6);
  EXPECT_LT(check_binary([](const Var& a, const Var& b) { return mul(a, b); }, {3, 4}, {4}, 3), 1e-6);
  EXPECT_LT(check_binary([](const Var& a, const Var& b) { return mul(a, b); }, {3, 4}, {}, 4), 1e-6);
  EXPECT_LT(check_binary([](const Var& a, const Var& b) { return sub(b, a); }, {3, 4}, {}, 5), 1e-6);
  EXPECT_LT(check_binary([](const Var& a, const Var& b) { return matmul(a, b); }, {4}, {4, 3}, 6), 1e-6);
  EXPECT_LT(check_binary([](const Var& a, const Var& b) { return matmul(a, b); }, {3, 4}, {4}, 7), 1e-6);
  EXPECT_LT(check_binary([](const Var& a, const Var& b) { return concat(a, b, 1); }, {3, 2}, {3, 4}, 8), 1e-6);
}

TEST(GradientCheck, QuadraticAndConstant) {
  Parameter x("x", Tensor::scalar(3.0));
  std::vector<Parameter*> params{&x};
  auto report = check_gradients([&](Tape& t) { return mul(t.leaf(x), t.leaf(x)); }, params);
  EXPECT_LT(report.max_rel_error, 1e-9);
  EXPECT_NEAR(report.arrays[0].worst_ad, 6.0, 1e-12);

  auto zero = check_gradients([&](Tape& t) { return t.constant(Tensor::scalar(0.0)); }, params);
  EXPECT_EQ(zero.max_rel_error, 0.0);
  EXPECT_EQ(x.grad[0], 0.0);
}

TEST(GradientCheck, NonScalarProgramIsContractError) {
  Parameter x("x", Tensor::vector({1, 2}));
  std::vector<Parameter*> params{&x};
  EXPECT_THROW(check_gradients([&](Tape& t) { return t.leaf(x); }, params), ContractError);
}

TEST(GradientCheck, DetectsWrongBackwardRule) {
  Parameter x("x", Tensor::vector({1.0, 2.0}));
  std::vector<Parameter*> params{&x};
  auto broken = [&](Tape& t) {
    Var in = t.leaf(x);
    Tensor v = in.value();
    for (double& e : v.values()) e = e * e;
    // Reports d(x^2)/dx as x instead of 2x.
    Var sq = t.record(std::move(v), {in.id()}, [in](Tape& tp, std::size_t self) {
      Tensor& g = tp.grad_buffer(in.id());
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += tp.grad(self)[i] * tp.value(in.id())[i];
    });
    return sum(sq);
  };
  EXPECT_GT(check_gradients(broken, params).max_rel_error, 0.4);
}

TEST(GradientCheck, SamplesLargeArrays) {
  Rng rng(2);
  Parameter a("a", random_tensor(rng, {30, 30}));
  std::vector<Parameter*> params{&a};
  auto report = check_gradients([&](Tape& t) { return sum(tanh(t.leaf(a))); }, params, 1e-6, 100, 5);
  EXPECT_EQ(report.arrays[0].checked, 100u);
  EXPECT_LT(report.max_rel_error, 1e-6);
}

TEST(BatchNorm, ConstantColumnGivesShift) {
  BatchNormState state(1);
  Tape tape;
  Var out = batchnorm(tape.constant(Tensor::matrix(3, 1, {2, 2, 2})), tape.constant(Tensor::vector({1.7})),
                      tape.constant(Tensor::vector({0.3})), state, Mode::kTrain);
  for (double v : out.value().values()) EXPECT_DOUBLE_EQ(v, 0.3);
}

TEST(BatchNorm, TwoPointColumnHandComputed) {
  BatchNormState state(1);
  Tape tape;
  Var out = batchnorm(tape.constant(Tensor::matrix(2, 1, {-1, 1})), tape.constant(Tensor::vector({1.0})),
                      tape.constant(Tensor::vector({0.0})), state, Mode::kTrain);
  const double expected = 1.0 / std::sqrt(1.0 + BatchNormState::kEpsilon);
  EXPECT_NEAR(out.value()[0], -expected, 1e-15);
  EXPECT_NEAR(out.value()[1], expected, 1e-15);
}

TEST(BatchNorm, RunningStatisticsAndInference) {
  BatchNormState state(2);
  Tape t0;
  Var gamma = t0.constant(Tensor::vector({1.5, 0.5}));
  Var beta = t0.constant(Tensor::vector({0.1, -0.2}));
  EXPECT_THROW(batchnorm(t0.constant(Tensor(Shape{2, 2}, 1.0)), gamma, beta, state, Mode::kInfer), StateError);
  EXPECT_THROW(batchnorm(t0.constant(Tensor(Shape{1, 2}, 1.0)), gamma, beta, state, Mode::kTrain),
               DegenerateInputError);

  Tensor x1 = Tensor::matrix(3, 2, {1, 10, 2, 20, 3, 60});
  Tensor x2 = Tensor::matrix(2, 2, {0, 5, 4, 7});
  batchnorm(t0.constant(x1), gamma, beta, state, Mode::kTrain);
  // First update copies the batch statistics (biased variance).
  EXPECT_NEAR(state.running_mean[0], 2.0, 1e-15);
  EXPECT_NEAR(state.running_var[0], 2.0 / 3.0, 1e-15);
  batchnorm(t0.constant(x2), gamma, beta, state, Mode::kTrain);
  const double m0 = 0.9 * 2.0 + 0.1 * 2.0, v0 = 0.9 * (2.0 / 3.0) + 0.1 * 4.0;
  EXPECT_NEAR(state.running_mean[0], m0, 1e-15);
  EXPECT_NEAR(state.running_var[0], v0, 1e-15);

  Var y = batchnorm(t0.constant(Tensor::matrix(1, 2, {3, 3})), gamma, beta, state, Mode::kInfer);
  EXPECT_NEAR(y.value()[0], 1.5 * (3.0 - m0) / std::sqrt(v0 + 1e-5) + 0.1, 1e-9);

  BatchNormState frozen = state;
  batchnorm(t0.constant(x1), gamma, beta, state, Mode::kTrain, false);
  EXPECT_EQ(state.running_mean.data(), frozen.running_mean.data());
}

TEST(BatchNorm, GradientsMatchFiniteDifferences) {
  Rng rng(21);
  Parameter x("x", random_tensor(rng, {5, 3}));
  Parameter g("gamma", random_tensor(rng, {3}, 0.5, 1.5));
  Parameter b("beta", random_tensor(rng, {3}));
  std::vector<Parameter*> params{&x, &g, &b};
  BatchNormState state(3);
  auto report = check_gradients(
      [&](Tape& t) {
        return weighted_sum(t, batchnorm(t.leaf(x), t.leaf(g), t.leaf(b), state, Mode::kTrain, false), 22);
      },
      params);
  EXPECT_LT(report.max_rel_error, 1e-6);
}
