#pragma once

#include <random>
#include <vector>

#include "jtm/numerics/init.hpp"
#include "jtm/numerics/ops.hpp"

namespace jtm::coattention {

using numerics::Parameter;
using numerics::Tape;
using numerics::Var;

struct Dims {
  std::size_t h = 0;
  std::size_t b = 0;
  std::size_t s = 0;
};

// Bilinear affinity weights aff_* and key weights W_*. W_xy maps view x into
// the key of view y.
struct CoAttentionParams {
  Parameter aff_hb, aff_hs, aff_bs;
  Parameter W_h, W_b, W_s;
  Parameter W_bh, W_sh, W_hb, W_sb, W_hs, W_bs;

  static CoAttentionParams init(const Dims& d, std::mt19937_64& rng) {
    using numerics::uniform_parameter;
    CoAttentionParams p;
    p.aff_hb = uniform_parameter("coatt.aff_hb", {d.h, d.b}, rng);
    p.aff_hs = uniform_parameter("coatt.aff_hs", {d.h, d.s}, rng);
    p.aff_bs = uniform_parameter("coatt.aff_bs", {d.b, d.s}, rng);
    p.W_h = uniform_parameter("coatt.W_h", {d.h, d.h}, rng);
    p.W_b = uniform_parameter("coatt.W_b", {d.b, d.b}, rng);
    p.W_s = uniform_parameter("coatt.W_s", {d.s, d.s}, rng);
    p.W_bh = uniform_parameter("coatt.W_bh", {d.h, d.b}, rng);
    p.W_sh = uniform_parameter("coatt.W_sh", {d.h, d.s}, rng);
    p.W_hb = uniform_parameter("coatt.W_hb", {d.b, d.h}, rng);
    p.W_sb = uniform_parameter("coatt.W_sb", {d.b, d.s}, rng);
    p.W_hs = uniform_parameter("coatt.W_hs", {d.s, d.h}, rng);
    p.W_bs = uniform_parameter("coatt.W_bs", {d.s, d.b}, rng);
    return p;
  }

  Dims dims() const { return {W_h.value.rows(), W_b.value.rows(), W_s.value.rows()}; }

  std::vector<Parameter*> parameters() {
    return {&aff_hb, &aff_hs, &aff_bs, &W_h, &W_b, &W_s,
            &W_bh,   &W_sh,   &W_hb,   &W_sb, &W_hs, &W_bs};
  }
};

// Per-title scalar affinities, each N×1.
struct Affinities {
  Var hb, hs, bs;
};

struct Keys {
  Var h, b, s;
};

struct CoAttended {
  Var h, b, s;
};

inline void check_views(const CoAttentionParams& p, Var xh, Var xb, Var xs) {
  const Dims d = p.dims();
  const auto& H = xh.value();
  const auto& B = xb.value();
  const auto& S = xs.value();
  if (H.cols() != d.h || B.cols() != d.b || S.cols() != d.s || H.rows() != B.rows() ||
      H.rows() != S.rows()) {
    throw DimensionError("co-attention inputs " + numerics::shape_string(H.shape()) + ", " +
                         numerics::shape_string(B.shape()) + ", " +
                         numerics::shape_string(S.shape()) + " do not match dimensions (" +
                         std::to_string(d.h) + ", " + std::to_string(d.b) + ", " +
                         std::to_string(d.s) + ")");
  }
}

// a_xy = tanh(x W^(xy) yᵀ) per row.
inline Var bilinear_affinity(Var x, Var w, Var y) {
  return numerics::tanh(numerics::row_sum(numerics::mul(numerics::matmul(x, w), y)));
}

inline Affinities affinities(Tape& tape, CoAttentionParams& p, Var xh, Var xb, Var xs) {
  check_views(p, xh, xb, xs);
  return {bilinear_affinity(xh, tape.param(p.aff_hb), xb),
          bilinear_affinity(xh, tape.param(p.aff_hs), xs),
          bilinear_affinity(xb, tape.param(p.aff_bs), xs)};
}

inline Keys attention_keys(Tape& tape, CoAttentionParams& p, Var xh, Var xb, Var xs,
                           const Affinities& a) {
  using namespace numerics;
  check_views(p, xh, xb, xs);
  auto support = [&](Var x, Var affinity, Parameter& w) {
    return linear(scale_rows(x, affinity), tape.param(w));
  };
  Var kh = tanh(add(add(linear(xh, tape.param(p.W_h)), support(xb, a.hb, p.W_bh)),
                    support(xs, a.hs, p.W_sh)));
  Var kb = tanh(add(add(linear(xb, tape.param(p.W_b)), support(xh, a.hb, p.W_hb)),
                    support(xs, a.bs, p.W_sb)));
  Var ks = tanh(add(add(linear(xs, tape.param(p.W_s)), support(xh, a.hs, p.W_hs)),
                    support(xb, a.bs, p.W_bs)));
  return {kh, kb, ks};
}

// x̂ = softmax(K) ⊙ x, softmax over each row's components.
inline Var apply(Var x, Var key) {
  if (x.value().shape() != key.value().shape()) {
    throw DimensionError("co-attention apply: " + numerics::shape_string(x.value().shape()) +
                         " vs key " + numerics::shape_string(key.value().shape()));
  }
  return numerics::mul(numerics::softmax(key), x);
}

inline CoAttended co_attend(Tape& tape, CoAttentionParams& p, Var xh, Var xb, Var xs) {
  const Affinities a = affinities(tape, p, xh, xb, xs);
  const Keys k = attention_keys(tape, p, xh, xb, xs, a);
  return {apply(xh, k.h), apply(xb, k.b), apply(xs, k.s)};
}

}  // namespace jtm::coattention
