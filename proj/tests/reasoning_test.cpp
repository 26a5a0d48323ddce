#include <gtest/gtest.h>

#include <random>

#include "gradcheck.hpp"
#include "jtm/reasoning.hpp"

namespace jtm::reasoning {
namespace {

using numerics::cosine_sim;

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.7);
  Tensor t({r, c});
  for (double& v : t.values()) v = n(rng);
  return t;
}

Tensor row_of(const Tensor& t, std::size_t r) {
  Tensor out({1, t.cols()});
  for (std::size_t j = 0; j < t.cols(); ++j) out[j] = t.at(r, j);
  return out;
}

TEST(Events, ShapeDeterminismAndLayout) {
  std::mt19937_64 rng(51);
  auto p = ReasoningParams::init("b", 5, 4, 6, rng);
  const Tensor xj = random_matrix(3, 5, rng), v = random_matrix(2, 4, rng);
  Tape tape;
  const Tensor e = encode_events(tape, p, tape.constant(xj), tape.constant(v)).value();
  EXPECT_EQ(e.shape(), (numerics::Shape{6, 6}));
  EXPECT_EQ(e, encode_events(tape, p, tape.constant(xj), tape.constant(v)).value());
  // Row k·N + i is the event of title i against candidate k.
  const Tensor single = encode_events(tape, p, tape.constant(row_of(xj, 2)), tape.constant(row_of(v, 1))).value();
  for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(single[j], e.at(1 * 3 + 2, j), 1e-14);
  EXPECT_THROW(encode_events(tape, p, tape.constant(v), tape.constant(v)), DimensionError);
}

TEST(Events, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(52);
  auto p = ReasoningParams::init("b", 4, 3, 5, rng);
  const Tensor xj = random_matrix(2, 4, rng), v = random_matrix(3, 3, rng), w = random_matrix(6, 5, rng);
  auto loss = [&](Tape& tape) {
    Var e = encode_events(tape, p, tape.constant(xj), tape.constant(v));
    return numerics::sum(numerics::mul(e, tape.constant(w)));
  };
  EXPECT_LE(testing::max_gradient_error({&p.enc_W1, &p.enc_b1, &p.enc_W2, &p.enc_b2}, loss), 1e-4);
}

TEST(Logic, ShapesPreserved) {
  std::mt19937_64 rng(53);
  auto p = ReasoningParams::init("s", 2, 2, 7, rng);
  Tape tape;
  const Logic l = bind_logic(tape, p);
  Var x = tape.constant(random_matrix(3, 7, rng));
  EXPECT_EQ(not_op(l, x).value().shape(), (numerics::Shape{3, 7}));
  EXPECT_EQ(or_op(l, x, x).value().shape(), (numerics::Shape{3, 7}));
  EXPECT_THROW(or_op(l, x, tape.constant(random_matrix(3, 6, rng))), DimensionError);
}

TEST(Clause, SingleCandidateIsNegatedEvent) {
  std::mt19937_64 rng(54);
  auto p = ReasoningParams::init("b", 3, 3, 4, rng);
  Tape tape;
  const Logic l = bind_logic(tape, p);
  Var xj = tape.constant(random_matrix(2, 3, rng));
  Var v = tape.constant(random_matrix(1, 3, rng));
  const Tensor x = clause_representation(tape, p, l, xj, v, nullptr).value();
  EXPECT_EQ(x, not_op(l, encode_events(tape, p, xj, v)).value());
}

TEST(Clause, FoldMatchesHandUnrolledOracle) {
  std::mt19937_64 rng(55);
  auto p = ReasoningParams::init("b", 3, 3, 4, rng);
  Tape tape;
  const Logic l = bind_logic(tape, p);
  Var xj = tape.constant(random_matrix(2, 3, rng));
  Var v = tape.constant(random_matrix(3, 3, rng));
  std::mt19937_64 shuffle(7), replay(7);
  const Tensor x = clause_representation(tape, p, l, xj, v, &shuffle).value();

  const auto order = fold_order(3, &replay);
  Var neg = not_op(l, encode_events(tape, p, xj, v));
  auto ev = [&](std::size_t k) { return numerics::slice_rows(neg, k * 2, 2); };
  const Tensor oracle = or_op(l, or_op(l, ev(order[0]), ev(order[1])), ev(order[2])).value();
  EXPECT_EQ(x, oracle);

  std::mt19937_64 again(7);
  EXPECT_EQ(clause_representation(tape, p, l, xj, v, &again).value(), x);
  EXPECT_THROW(fold_negated(l, neg, 2, {}), DegenerateInputError);
}

TEST(ClauseTruth, ZeroWhenOrHitsTruthAndBounded) {
  std::mt19937_64 rng(56);
  auto p = ReasoningParams::init("b", 3, 3, 4, rng);
  // OR ignores its inputs and emits tanh(bias), parallel to a one-hot TRUE.
  p.or_W.value = Tensor(p.or_W.value.shape(), 0.0);
  p.truth.value = Tensor::matrix(1, 4, {0.0, 1.0, 0.0, 0.0});
  p.or_b.value = Tensor({4}, 0.0);
  p.or_b.value[1] = 0.5;
  Tape tape;
  const Logic l = bind_logic(tape, p);
  Var a = tape.constant(random_matrix(3, 4, rng));
  EXPECT_NEAR(clause_truth_loss(l, a, a).value().item(), 0.0, 1e-12);

  auto q = ReasoningParams::init("b", 3, 3, 4, rng);
  const Logic lq = bind_logic(tape, q);
  const double loss = clause_truth_loss(lq, a, tape.constant(random_matrix(3, 4, rng))).value().item();
  EXPECT_GE(loss, 0.0);
  EXPECT_LE(loss, 2.0);
}

TEST(ClauseTruth, DecreasesOnToyInstance) {
  std::mt19937_64 rng(57);
  auto p = ReasoningParams::init("b", 3, 3, 4, rng);
  const Tensor a = random_matrix(8, 4, rng), e = random_matrix(8, 4, rng);
  numerics::AdamState adam(numerics::AdamConfig{1e-2});
  std::vector<Parameter*> params = {&p.or_W, &p.or_b, &p.truth};
  std::vector<double> curve;
  for (int step = 0; step < 50; ++step) {
    Tape tape;
    const Logic l = bind_logic(tape, p);
    Var loss = clause_truth_loss(l, tape.constant(a), tape.constant(e));
    curve.push_back(loss.value().item());
    numerics::zero_grads(params);
    tape.backward(loss);
    numerics::adam_step(adam, params);
    p.renormalize_truth();
  }
  EXPECT_LT(curve.back(), 0.5 * curve.front());
}

TEST(Regularizers, RangesAndEmptyBatch) {
  std::mt19937_64 rng(58);
  auto p = ReasoningParams::init("b", 3, 3, 6, rng);
  Tape tape;
  const Logic l = bind_logic(tape, p);
  const std::size_t n = 10;
  const auto r = logical_regularizers(l, tape.constant(random_unit_rows(n, 6, rng)));
  double total = 0.0;
  for (const auto& q : r.r) {
    EXPECT_GE(q.value().item(), 0.0);
    EXPECT_LE(q.value().item(), static_cast<double>(n));
    total += q.value().item();
  }
  EXPECT_NEAR(r.total.value().item(), total / n, 1e-12);
  const auto z = zero_regularizers(tape);
  for (const auto& q : z.r) EXPECT_EQ(q.value().item(), 0.0);
  EXPECT_EQ(z.total.value().item(), 0.0);
}

TEST(Regularizers, MatchDirectComputation) {
  std::mt19937_64 rng(59);
  auto p = ReasoningParams::init("b", 3, 3, 5, rng);
  Tape tape;
  const Logic l = bind_logic(tape, p);
  const Tensor x = random_unit_rows(4, 5, rng);
  const auto r = logical_regularizers(l, tape.constant(x));
  auto sim = [](const Tensor& a, const Tensor& b) { return (cosine_sim(a, b) + 1.0) / 2.0; };
  auto NOT = [&](const Tensor& a) { return not_op(l, tape.constant(a)).value(); };
  auto OR = [&](const Tensor& a, const Tensor& b) { return or_op(l, tape.constant(a), tape.constant(b)).value(); };
  const Tensor T = p.truth.value, F = NOT(T);
  std::array<double, 6> expected{};
  for (std::size_t i = 0; i < 4; ++i) {
    const Tensor xi = row_of(x, i);
    expected[0] += sim(xi, NOT(xi));
    expected[1] += 1.0 - sim(xi, NOT(NOT(xi)));
    expected[2] += 1.0 - sim(OR(xi, F), xi);
    expected[3] += 1.0 - sim(OR(xi, T), T);
    expected[4] += 1.0 - sim(OR(xi, xi), xi);
    expected[5] += 1.0 - sim(OR(xi, NOT(xi)), T);
  }
  for (std::size_t q = 0; q < 6; ++q) EXPECT_NEAR(r.r[q].value().item(), expected[q], 1e-12) << q;
}

TEST(Regularizers, GradientThroughEventsFoldAndRegularizers) {
  std::mt19937_64 rng(60);
  auto p = ReasoningParams::init("b", 3, 2, 4, rng);
  const Tensor xj = random_matrix(2, 3, rng), v = random_matrix(3, 2, rng);
  auto loss = [&](Tape& tape) {
    const Logic l = bind_logic(tape, p);
    Var events = encode_events(tape, p, tape.constant(xj), tape.constant(v));
    Var x = fold_negated(l, events, 2, {2, 0, 1});
    Var truth = clause_truth_loss(l, x, numerics::slice_rows(events, 2, 2));
    return numerics::add(logical_regularizers(l, events).total, truth);
  };
  EXPECT_LE(testing::max_gradient_error(p.parameters(), loss), 1e-4);
}

TEST(Regularizers, TrainingAloneHalvesTotal) {
  std::mt19937_64 rng(61);
  auto p = ReasoningParams::init("b", 1, 1, 16, rng);
  const auto fit = fit_logic_on_regularizers(p, 500, 128, 1e-2, 62);
  EXPECT_LE(fit.final, 0.5 * fit.initial) << fit.initial << " -> " << fit.final;
}

TEST(Regularizers, TrainingImprovesDoubleNegationAndIdentity) {
  std::mt19937_64 rng(63);
  auto p = ReasoningParams::init("b", 1, 1, 16, rng);
  const Tensor probe = random_unit_rows(64, 16, rng);
  auto measure = [&] {
    Tape tape;
    const Logic l = bind_logic(tape, p);
    Var x = tape.constant(probe);
    Var falsity = numerics::broadcast_rows(not_op(l, l.truth), 64);
    const double dn = numerics::mean(numerics::cosine_rows(x, not_op(l, not_op(l, x)))).value().item();
    const double id = numerics::mean(numerics::cosine_rows(or_op(l, x, falsity), x)).value().item();
    return std::pair{dn, id};
  };
  const auto before = measure();
  fit_logic_on_regularizers(p, 500, 128, 1e-2, 64);
  const auto after = measure();
  EXPECT_GT(after.first, before.first + 0.05);
  EXPECT_GT(after.second, before.second + 0.05);
}

}  // namespace
}  // namespace jtm::reasoning
