#include <gtest/gtest.h>

#include <random>

#include "gradcheck.hpp"
#include "jtm/coattention.hpp"

namespace jtm::coattention {
namespace {

using numerics::Tensor;

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t({r, c});
  for (double& v : t.values()) v = n(rng);
  return t;
}

struct Fixture {
  Dims d{4, 5, 3};
  std::mt19937_64 rng{41};
  CoAttentionParams p = CoAttentionParams::init(d, rng);
  Tensor xh = random_matrix(2, 4, rng, 0.5);
  Tensor xb = random_matrix(2, 5, rng, 0.5);
  Tensor xs = random_matrix(2, 3, rng, 0.5);
};

TEST(Affinity, MatchesDoubleLoopOracle) {
  Fixture f;
  Tape tape;
  const auto a = affinities(tape, f.p, tape.constant(f.xh), tape.constant(f.xb), tape.constant(f.xs));
  for (std::size_t row = 0; row < 2; ++row) {
    double s = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 5; ++j) s += f.xh.at(row, i) * f.p.aff_hb.value.at(i, j) * f.xb.at(row, j);
    EXPECT_NEAR(a.hb.value()[row], std::tanh(s), 1e-14);
    double t = 0.0;
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 3; ++j) t += f.xb.at(row, i) * f.p.aff_bs.value.at(i, j) * f.xs.at(row, j);
    EXPECT_NEAR(a.bs.value()[row], std::tanh(t), 1e-14);
  }
}

TEST(Affinity, ZeroInputsOrWeights) {
  Fixture f;
  Tape tape;
  const auto a = affinities(tape, f.p, tape.constant(f.xh), tape.constant(Tensor({2, 5}, 0.0)),
                            tape.constant(f.xs));
  EXPECT_EQ(a.hb.value()[0], 0.0);
  f.p.aff_hs.value = Tensor({4, 3}, 0.0);
  const auto b = affinities(tape, f.p, tape.constant(f.xh), tape.constant(f.xb), tape.constant(f.xs));
  EXPECT_EQ(b.hs.value()[1], 0.0);
}

TEST(Keys, ZeroAffinitiesLeaveSelfTerm) {
  Fixture f;
  Tape tape;
  Var xh = tape.constant(f.xh), xb = tape.constant(f.xb), xs = tape.constant(f.xs);
  Var zero = tape.constant(Tensor({2, 1}, 0.0));
  const auto k = attention_keys(tape, f.p, xh, xb, xs, {zero, zero, zero});
  const Tensor expected = numerics::tanh(numerics::linear(xh, tape.constant(f.p.W_h.value))).value();
  EXPECT_EQ(k.h.value(), expected);
  for (double v : k.s.value().values()) EXPECT_LT(std::abs(v), 1.0);
}

TEST(Keys, AllZeroInputsGiveZeroKeys) {
  Fixture f;
  Tape tape;
  Var xh = tape.constant(Tensor({1, 4}, 0.0)), xb = tape.constant(Tensor({1, 5}, 0.0)),
      xs = tape.constant(Tensor({1, 3}, 0.0));
  const auto k = attention_keys(tape, f.p, xh, xb, xs, affinities(tape, f.p, xh, xb, xs));
  for (Var v : {k.h, k.b, k.s})
    for (double x : v.value().values()) EXPECT_EQ(x, 0.0);
}

TEST(Keys, ShapeMismatchIsDimensionError) {
  Fixture f;
  Tape tape;
  EXPECT_THROW(affinities(tape, f.p, tape.constant(f.xb), tape.constant(f.xb), tape.constant(f.xs)),
               DimensionError);
}

TEST(Apply, ConstantKeyAndSingleton) {
  Tape tape;
  Var x = tape.constant(Tensor::matrix(1, 4, {4.0, -8.0, 2.0, 1.0}));
  const Tensor out = apply(x, tape.constant(Tensor({1, 4}, 0.3))).value();
  EXPECT_EQ(out, Tensor::matrix(1, 4, {1.0, -2.0, 0.5, 0.25}));
  const Tensor one = apply(tape.constant(Tensor::matrix(1, 1, {7.0})), tape.constant(Tensor::matrix(1, 1, {0.9}))).value();
  EXPECT_EQ(one[0], 7.0);
  EXPECT_THROW(apply(x, tape.constant(Tensor({1, 3}, 0.0))), DimensionError);
}

TEST(Apply, WeightsSumToOneAndShrink) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  Tape tape;
  Tensor x({1, 6}), k({1, 6});
  for (double& v : x.values()) v = u(rng);
  for (double& v : k.values()) v = u(rng) - 1.0;
  const Tensor out = apply(tape.constant(x), tape.constant(k)).value();
  double ratio = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    ratio += out[i] / x[i];
    EXPECT_LE(std::abs(out[i]), std::abs(x[i]));
  }
  EXPECT_NEAR(ratio, 1.0, 1e-14);
}

TEST(CoAttention, ZeroCrossWeightsAttendWithinView) {
  Fixture f;
  for (Parameter* w : {&f.p.W_bh, &f.p.W_sh, &f.p.W_hb, &f.p.W_sb, &f.p.W_hs, &f.p.W_bs}) {
    w->value = Tensor(w->value.shape(), 0.0);
  }
  Tape tape;
  Var xh = tape.constant(f.xh), xb = tape.constant(f.xb), xs = tape.constant(f.xs);
  const auto out = co_attend(tape, f.p, xh, xb, xs);
  using namespace numerics;
  EXPECT_EQ(out.b.value(), mul(softmax(tanh(linear(xb, tape.constant(f.p.W_b.value)))), xb).value());
  EXPECT_EQ(out.s.value(), mul(softmax(tanh(linear(xs, tape.constant(f.p.W_s.value)))), xs).value());
}

TEST(CoAttention, GradientsMatchFiniteDifferences) {
  Fixture f;
  const Tensor w = random_matrix(2, 12, f.rng);
  auto loss = [&](Tape& tape) {
    const auto out = co_attend(tape, f.p, tape.constant(f.xh), tape.constant(f.xb), tape.constant(f.xs));
    Var joined = numerics::concat({out.h, out.b, out.s}, 1);
    return numerics::sum(numerics::mul(joined, tape.constant(w)));
  };
  EXPECT_LE(testing::max_gradient_error(f.p.parameters(), loss), 1e-4);
}

TEST(CoAttention, KeyGradientsMatchFiniteDifferences) {
  Fixture f;
  auto loss = [&](Tape& tape) {
    Var xh = tape.constant(f.xh), xb = tape.constant(f.xb), xs = tape.constant(f.xs);
    const auto k = attention_keys(tape, f.p, xh, xb, xs, affinities(tape, f.p, xh, xb, xs));
    return numerics::sum(numerics::mul(k.h, k.h));
  };
  EXPECT_LE(testing::max_gradient_error(f.p.parameters(), loss), 1e-4);
}

}  // namespace
}  // namespace jtm::coattention
