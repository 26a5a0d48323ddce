#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "jtm/numerics/adam.hpp"
#include "jtm/numerics/ops.hpp"

namespace jtm::numerics {
namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = u(rng);
  return t;
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  Tape tape;
  auto eye = tape.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  auto m = tape.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  EXPECT_EQ(matmul(eye, m).value(), Tensor::matrix(2, 2, {1, 2, 3, 4}));
}

TEST(Matmul, OrthogonalRowsGiveZero) {
  Tape tape;
  auto a = tape.constant(Tensor::matrix(1, 2, {1, 0}));
  auto b = tape.constant(Tensor::matrix(2, 1, {0, 1}));
  EXPECT_EQ(matmul(a, b).value(), Tensor::matrix(1, 1, {0}));
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  Tape tape;
  auto a = tape.constant(Tensor({2, 3}));
  auto b = tape.constant(Tensor({2, 3}));
  try {
    matmul(a, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("[2x3] x [2x3]"), std::string::npos);
  }
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(1);
  Parameter a("a", random_tensor({3, 4}, rng));
  Parameter b("b", random_tensor({4, 2}, rng));
  Tensor w = random_tensor({3, 2}, rng);
  auto loss = [&](Tape& t) { return sum(mul(matmul(t.param(a), t.param(b)), t.constant(w))); };
  EXPECT_LE(testing::max_gradient_error({&a, &b}, loss), 1e-4);
}

TEST(Elementwise, TanhAtOriginHasUnitSlope) {
  Parameter x("x", Tensor::vector({0.0}));
  Tape tape;
  auto y = tanh(tape.param(x));
  EXPECT_EQ(y.value()[0], 0.0);
  tape.backward(sum(y));
  EXPECT_EQ(x.grad[0], 1.0);
}

TEST(Elementwise, ReluDeadRegion) {
  Parameter x("x", Tensor::vector({-3.0}));
  Tape tape;
  auto y = relu(tape.param(x));
  EXPECT_EQ(y.value()[0], 0.0);
  tape.backward(sum(y));
  EXPECT_EQ(x.grad[0], 0.0);
}

TEST(Elementwise, MulGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  Parameter a("a", random_tensor({5}, rng));
  Parameter b("b", random_tensor({5}, rng));
  Tensor w = random_tensor({5}, rng);
  auto loss = [&](Tape& t) {
    return sum(mul(elementwise_mul(t.param(a), t.param(b)), t.constant(w)));
  };
  EXPECT_LE(testing::max_gradient_error({&a, &b}, loss), 1e-4);
}

TEST(Elementwise, ShapeMismatchThrows) {
  Tape tape;
  auto a = tape.constant(Tensor({3}));
  auto b = tape.constant(Tensor({4}));
  EXPECT_THROW(add(a, b), DimensionError);
  EXPECT_THROW(mul(a, b), DimensionError);
}

TEST(Concat, OffAxisMismatchThrows) {
  Tape tape;
  auto a = tape.constant(Tensor({2, 3}));
  auto b = tape.constant(Tensor({3, 3}));
  EXPECT_THROW(concat({a, b}, 1), DimensionError);
  EXPECT_EQ(concat({a, b}, 0).shape(), (Shape{5, 3}));
}

TEST(Softmax, SymmetricInputIsUniform) {
  Tape tape;
  auto y = softmax(tape.constant(Tensor::vector({0, 0})));
  EXPECT_EQ(y.value()[0], 0.5);
  EXPECT_EQ(y.value()[1], 0.5);
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
  Tape tape;
  auto y = softmax(tape.constant(Tensor::vector({1000, 0})));
  EXPECT_TRUE(y.value().all_finite());
  EXPECT_NEAR(y.value()[0], 1.0, 1e-300);
  EXPECT_LT(y.value()[1], 1e-300);
}

TEST(Softmax, MatchesHighPrecisionReference) {
  // 40-digit mpmath evaluation of exp(i) / (e + e^2 + e^3).
  const double expected[] = {0.0900305731703804579980221, 0.2447284710547976524729596,
                             0.6652409557748218895290183};
  Tape tape;
  auto y = softmax(tape.constant(Tensor::vector({1, 2, 3})));
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(y.value()[i], expected[i], 1e-12);
}

TEST(Softmax, SumsToOneAndIsPermutationEquivariant) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x = random_tensor({7}, rng);
    for (double& v : x.values()) v *= 20.0;
    Tensor xp = x;
    std::vector<std::size_t> perm{3, 0, 6, 1, 5, 2, 4};
    for (std::size_t i = 0; i < 7; ++i) xp[i] = x[perm[i]];
    Tape tape;
    auto y = softmax(tape.constant(x)).value();
    auto yp = softmax(tape.constant(xp)).value();
    double s = 0.0;
    for (double v : y.values()) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
    for (std::size_t i = 0; i < 7; ++i) EXPECT_NEAR(yp[i], y[perm[i]], 1e-15);
  }
}

TEST(Softmax, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  Parameter x("x", random_tensor({3, 5}, rng));
  Tensor w = random_tensor({3, 5}, rng);
  auto loss = [&](Tape& t) { return sum(mul(softmax(t.param(x)), t.constant(w))); };
  EXPECT_LE(testing::max_gradient_error({&x}, loss), 1e-4);
}

TEST(CosineSim, Cases) {
  EXPECT_DOUBLE_EQ(cosine_sim(Tensor::vector({0.3, -2.0, 5.0}), Tensor::vector({0.3, -2.0, 5.0})), 1.0);
  EXPECT_EQ(cosine_sim(Tensor::vector({1, 0}), Tensor::vector({0, 1})), 0.0);
  EXPECT_NEAR(cosine_sim(Tensor::vector({1, 2}), Tensor::vector({2, 1})), 0.8, 1e-15);
  EXPECT_THROW(cosine_sim(Tensor::vector({0, 0}), Tensor::vector({0, 1})), DegenerateInputError);
}

TEST(CosineRows, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  Parameter a("a", random_tensor({4, 6}, rng));
  Parameter b("b", random_tensor({4, 6}, rng));
  Parameter anchor("anchor", random_tensor({1, 6}, rng));
  Tensor w = random_tensor({4, 1}, rng);
  auto loss = [&](Tape& t) {
    auto pa = t.param(a);
    return add(sum(mul(cosine_rows(pa, t.param(b)), t.constant(w))),
               sum(cosine_rows(pa, t.param(anchor))));
  };
  EXPECT_LE(testing::max_gradient_error({&a, &b, &anchor}, loss), 1e-4);
}

TEST(StructuralOps, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(6);
  Parameter x("x", random_tensor({3, 4}, rng));
  Parameter y("y", random_tensor({2, 4}, rng));
  Parameter s("s", random_tensor({3, 1}, rng));
  Parameter w("w", random_tensor({5, 4}, rng));
  Parameter b("b", random_tensor({5}, rng));
  Parameter row("row", random_tensor({1, 4}, rng));
  Tensor mix = random_tensor({6, 5}, rng);
  auto loss = [&](Tape& t) {
    auto px = t.param(x);
    auto stacked = concat({scale_rows(px, t.param(s)), t.param(y), t.param(row)}, 0);
    auto h = tanh(linear(stacked, t.param(w), t.param(b)));
    auto picked = gather_rows(h, {0, 5, 2, 2, 1, 3});
    auto cols = concat({slice_cols(picked, 0, 2), slice_cols(picked, 2, 3)}, 1);
    auto r = row_sum(mul(slice_rows(px, 1, 2), broadcast_rows(t.param(row), 2)));
    return add(sum(mul(cols, t.constant(mix))), affine(sum(r), 0.5, 1.0));
  };
  EXPECT_LE(testing::max_gradient_error({&x, &y, &s, &w, &b, &row}, loss), 1e-4);
}

TEST(StructuralOps, PairwiseTanhMatchesExplicitConcatenation) {
  std::mt19937_64 rng(7);
  Tensor a = random_tensor({2, 3}, rng);
  Tensor c = random_tensor({4, 3}, rng);
  Tensor bias = random_tensor({3}, rng);
  Tape tape;
  auto out = pairwise_tanh(tape.constant(a), tape.constant(c), tape.constant(bias)).value();
  ASSERT_EQ(out.shape(), (Shape{8, 3}));
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        EXPECT_EQ(out.at(k * 2 + i, j), std::tanh(a.at(i, j) + c.at(k, j) + bias[j]));
}

TEST(StructuralOps, PairwiseTanhGradient) {
  std::mt19937_64 rng(8);
  Parameter a("a", random_tensor({2, 3}, rng));
  Parameter c("c", random_tensor({4, 3}, rng));
  Parameter bias("bias", random_tensor({3}, rng));
  Tensor w = random_tensor({8, 3}, rng);
  auto loss = [&](Tape& t) {
    return sum(mul(pairwise_tanh(t.param(a), t.param(c), t.param(bias)), t.constant(w)));
  };
  EXPECT_LE(testing::max_gradient_error({&a, &c, &bias}, loss), 1e-4);
}

TEST(Losses, CrossEntropyAndBceGradients) {
  std::mt19937_64 rng(9);
  Parameter z("z", random_tensor({3, 4}, rng));
  Parameter q("q", random_tensor({5}, rng));
  auto loss = [&](Tape& t) {
    return add(softmax_cross_entropy(t.param(z), {0, 3, 1}),
               bce_with_logits(t.param(q), {1, 0, 0, 1, 1}));
  };
  EXPECT_LE(testing::max_gradient_error({&z, &q}, loss), 1e-4);
}

TEST(Losses, UniformPredictionCrossEntropyIsLogClasses) {
  Tape tape;
  auto l = softmax_cross_entropy(tape.constant(Tensor::matrix(1, 4, {0, 0, 0, 0})), {2});
  EXPECT_NEAR(l.value().item(), std::log(4.0), 1e-15);
  EXPECT_THROW(softmax_cross_entropy(tape.constant(Tensor::matrix(1, 4, {0, 0, 0, 0})), {4}),
               DataError);
}

TEST(Backward, SumGivesAllOnes) {
  Parameter x("x", Tensor::vector({1, -2, 3}));
  Tape tape;
  tape.backward(sum(tape.param(x)));
  for (double g : x.grad.values()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, ConstantLossGivesZeroGradient) {
  Parameter x("x", Tensor::vector({1, -2, 3}));
  Tape tape;
  tape.param(x);
  tape.backward(tape.constant(Tensor::scalar(4.0)));
  for (double g : x.grad.values()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, NonScalarLossIsContractError) {
  Tape tape;
  auto v = tape.constant(Tensor::vector({1, 2}));
  EXPECT_THROW(tape.backward(v), ContractError);
}

TEST(Backward, ReusedNodeAccumulates) {
  Parameter x("x", Tensor::vector({2.0}));
  Tape tape;
  auto px = tape.param(x);
  tape.backward(sum(mul(px, px)));
  EXPECT_EQ(x.grad[0], 4.0);
}

TEST(Backward, DeterministicAcrossRuns) {
  std::mt19937_64 rng(10);
  Parameter a("a", random_tensor({6, 6}, rng));
  auto run = [&] {
    a.zero_grad();
    Tape t;
    t.backward(sum(tanh(matmul(t.param(a), t.param(a)))));
    return a.grad;
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  Parameter p("p", Tensor::vector({0.5, -1.5}));
  AdamState state;
  std::vector<Parameter*> ps{&p};
  for (int i = 0; i < 3; ++i) adam_step(state, ps);
  EXPECT_EQ(p.value, Tensor::vector({0.5, -1.5}));
  EXPECT_EQ(state.step, 3u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Parameter p("p", Tensor::vector({1.0, 1.0}));
  p.grad = Tensor::vector({0.3, -7.0});
  AdamState state;
  std::vector<Parameter*> ps{&p};
  adam_step(state, ps);
  // Step 1: m̂ = g, v̂ = g², so the update is lr·g/(|g| + ε).
  EXPECT_NEAR(p.value[0], 1.0 - 1e-3 * 0.3 / (0.3 + 1e-8), 1e-15);
  EXPECT_NEAR(p.value[1], 1.0 + 1e-3 * 7.0 / (7.0 + 1e-8), 1e-15);
}

// Independent scalar Adam used as the reference trace.
double scalar_adam(double x, const std::vector<double>& grads) {
  double m = 0, v = 0;
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    const double g = grads[t - 1];
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, static_cast<double>(t)));
    const double vh = v / (1 - std::pow(0.999, static_cast<double>(t)));
    x -= 1e-3 * mh / (std::sqrt(vh) + 1e-8);
  }
  return x;
}

TEST(Adam, TwoStepsMatchScalarReference) {
  Parameter p("p", Tensor::vector({0.25}));
  AdamState state;
  std::vector<Parameter*> ps{&p};
  p.grad = Tensor::vector({0.8});
  adam_step(state, ps);
  p.grad = Tensor::vector({-0.2});
  adam_step(state, ps);
  EXPECT_NEAR(p.value[0], scalar_adam(0.25, {0.8, -0.2}), 1e-15);
}

}  // namespace
}  // namespace jtm::numerics
