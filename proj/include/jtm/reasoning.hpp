#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "jtm/numerics/adam.hpp"
#include "jtm/numerics/init.hpp"
#include "jtm/numerics/ops.hpp"

namespace jtm::reasoning {

using numerics::Parameter;
using numerics::Tape;
using numerics::Tensor;
using numerics::Var;

// Parameters of one view's logical network. The event encoder's first layer
// is stored as one (hidden × (d_j + d_v)) block acting on [j; v].
struct ReasoningParams {
  std::size_t d_j = 0, d_v = 0, d_r = 0;
  Parameter enc_W1, enc_b1, enc_W2, enc_b2;
  Parameter not_W, not_b;
  Parameter or_W, or_b;
  Parameter truth;

  static ReasoningParams init(const std::string& prefix, std::size_t d_j, std::size_t d_v,
                              std::size_t d_r, std::mt19937_64& rng) {
    using numerics::uniform_parameter;
    using numerics::zero_parameter;
    if (d_r == 0) throw ConfigError("reasoning dimension must be positive");
    ReasoningParams p;
    p.d_j = d_j;
    p.d_v = d_v;
    p.d_r = d_r;
    const std::size_t hidden = 2 * d_r;
    p.enc_W1 = uniform_parameter(prefix + ".enc_W1", {hidden, d_j + d_v}, rng);
    p.enc_b1 = zero_parameter(prefix + ".enc_b1", {hidden});
    p.enc_W2 = uniform_parameter(prefix + ".enc_W2", {d_r, hidden}, rng);
    p.enc_b2 = zero_parameter(prefix + ".enc_b2", {d_r});
    p.not_W = uniform_parameter(prefix + ".not_W", {d_r, d_r}, rng);
    p.not_b = zero_parameter(prefix + ".not_b", {d_r});
    p.or_W = uniform_parameter(prefix + ".or_W", {d_r, 2 * d_r}, rng);
    p.or_b = zero_parameter(prefix + ".or_b", {d_r});
    std::normal_distribution<double> n01;
    Tensor t({1, d_r});
    for (double& v : t.values()) v = n01(rng);
    p.truth = Parameter(prefix + ".true", std::move(t));
    p.renormalize_truth();
    return p;
  }

  std::vector<Parameter*> parameters() {
    return {&enc_W1, &enc_b1, &enc_W2, &enc_b2, &not_W, &not_b, &or_W, &or_b, &truth};
  }

  void renormalize_truth() {
    double n = 0.0;
    for (double v : truth.value.values()) n += v * v;
    n = std::sqrt(n);
    if (!(n > 0.0) || !std::isfinite(n)) throw NumericError("TRUE anchor collapsed");
    for (double& v : truth.value.values()) v /= n;
  }
};

// Events e_k for every (title i, candidate k): x_j is N×d_j, v is K×d_v and
// the result is (K·N)×d_r with row k·N + i.
inline Var encode_events(Tape& tape, ReasoningParams& p, Var x_j, Var v) {
  using namespace numerics;
  if (x_j.value().cols() != p.d_j || v.value().cols() != p.d_v) {
    throw DimensionError("event encoder expects views of width " + std::to_string(p.d_j) +
                         " and " + std::to_string(p.d_v) + ", got " +
                         shape_string(x_j.value().shape()) + " and " +
                         shape_string(v.value().shape()));
  }
  Var w1 = tape.param(p.enc_W1);
  Var a = linear(x_j, slice_cols(w1, 0, p.d_j));
  Var c = linear(v, slice_cols(w1, p.d_j, p.d_v));
  Var hidden = pairwise_tanh(a, c, tape.param(p.enc_b1));
  return linear(hidden, tape.param(p.enc_W2), tape.param(p.enc_b2));
}

// NOT/OR weights and the TRUE anchor bound to one tape.
struct Logic {
  Var not_W, not_b, or_W, or_b, truth;
};

inline Logic bind_logic(Tape& tape, ReasoningParams& p) {
  return {tape.param(p.not_W), tape.param(p.not_b), tape.param(p.or_W), tape.param(p.or_b),
          tape.param(p.truth)};
}

inline Var not_op(const Logic& l, Var x) {
  return numerics::tanh(numerics::linear(x, l.not_W, l.not_b));
}

inline Var or_op(const Logic& l, Var x, Var y) {
  using namespace numerics;
  return tanh(linear(concat({x, y}, 1), l.or_W, l.or_b));
}

// Left fold of OR over NOT(e_k) for k in `order`. events is (K·N)×d_r.
inline Var fold_negated(const Logic& l, Var events, std::size_t n,
                        const std::vector<std::size_t>& order) {
  if (order.empty()) throw DegenerateInputError("clause over an empty candidate set");
  Var negated = not_op(l, events);
  Var acc = numerics::slice_rows(negated, order[0] * n, n);
  for (std::size_t i = 1; i < order.size(); ++i) {
    acc = or_op(l, acc, numerics::slice_rows(negated, order[i] * n, n));
  }
  return acc;
}

// Candidate order: seeded shuffle while training, taxonomy order otherwise.
inline std::vector<std::size_t> fold_order(std::size_t k, std::mt19937_64* shuffle_rng) {
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle_rng) std::shuffle(order.begin(), order.end(), *shuffle_rng);
  return order;
}

// Label-free clause representation x′ for N titles against K candidates.
inline Var clause_representation(Tape& tape, ReasoningParams& p, const Logic& l, Var x_j,
                                 Var candidates, std::mt19937_64* shuffle_rng) {
  const std::size_t k = candidates.value().rows();
  Var events = encode_events(tape, p, x_j, candidates);
  return fold_negated(l, events, x_j.value().rows(), fold_order(k, shuffle_rng));
}

// Mean over rows of 1 − cos(OR(x′, e_correct), TRUE).
inline Var clause_truth_loss(const Logic& l, Var x_prime, Var e_correct) {
  using namespace numerics;
  Var cos = cosine_rows(or_op(l, x_prime, e_correct), l.truth);
  return affine(mean(cos), -1.0, 1.0);
}

struct Regularizers {
  std::array<Var, 6> r;  // sums over the sampled vectors
  Var total;             // Σ r_q divided by the number of vectors
};

// Logical regularizers on the rows of x, with sim = (cos + 1) / 2 and
// FALSE = NOT(TRUE).
inline Regularizers logical_regularizers(const Logic& l, Var x) {
  using namespace numerics;
  const std::size_t n = x.value().rows();
  auto sim = [](Var a, Var b) { return affine(cosine_rows(a, b), 0.5, 0.5); };
  auto sum_one_minus = [](Var s) { return affine(sum(s), -1.0, static_cast<double>(s.value().rows())); };

  Var truth = l.truth;
  Var falsity = not_op(l, truth);
  Var truth_n = broadcast_rows(truth, n);
  Var falsity_n = broadcast_rows(falsity, n);
  Var not_x = not_op(l, x);

  Regularizers out;
  out.r[0] = sum(sim(x, not_x));
  out.r[1] = sum_one_minus(sim(x, not_op(l, not_x)));
  out.r[2] = sum_one_minus(sim(or_op(l, x, falsity_n), x));
  out.r[3] = sum_one_minus(sim(or_op(l, x, truth_n), truth));
  out.r[4] = sum_one_minus(sim(or_op(l, x, x), x));
  out.r[5] = sum_one_minus(sim(or_op(l, x, not_x), truth));
  Var total = out.r[0];
  for (std::size_t q = 1; q < 6; ++q) total = add(total, out.r[q]);
  out.total = scale(total, 1.0 / static_cast<double>(n));
  return out;
}

// All-zero regularizers for an empty batch.
inline Regularizers zero_regularizers(Tape& tape) {
  Regularizers out;
  for (auto& r : out.r) r = tape.constant(Tensor::scalar(0.0));
  out.total = tape.constant(Tensor::scalar(0.0));
  return out;
}

inline Tensor random_unit_rows(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  Tensor out({n, d});
  for (std::size_t r = 0; r < n; ++r) {
    double norm = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      out.at(r, j) = n01(rng);
      norm += out.at(r, j) * out.at(r, j);
    }
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < d; ++j) out.at(r, j) /= norm;
  }
  return out;
}

struct LogicFit {
  double initial = 0.0;
  double final = 0.0;
  std::vector<double> curve;  // total before each step
};

// Trains only NOT, OR and TRUE on the regularizer total over a fixed set of
// random unit vectors.
inline LogicFit fit_logic_on_regularizers(ReasoningParams& p, std::size_t steps,
                                          std::size_t vectors, double lr, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Tensor x = random_unit_rows(vectors, p.d_r, rng);
  std::vector<Parameter*> params = {&p.not_W, &p.not_b, &p.or_W, &p.or_b, &p.truth};
  numerics::AdamState adam(numerics::AdamConfig{lr});
  auto evaluate = [&](bool step) {
    Tape tape;
    const Logic l = bind_logic(tape, p);
    Var total = logical_regularizers(l, tape.constant(x)).total;
    const double value = total.value().item();
    if (step) {
      numerics::zero_grads(params);
      tape.backward(total);
      numerics::adam_step(adam, params);
      p.renormalize_truth();
    }
    return value;
  };
  LogicFit fit;
  for (std::size_t i = 0; i < steps; ++i) fit.curve.push_back(evaluate(true));
  fit.initial = fit.curve.empty() ? evaluate(false) : fit.curve.front();
  fit.final = evaluate(false);
  return fit;
}

}  // namespace jtm::reasoning
