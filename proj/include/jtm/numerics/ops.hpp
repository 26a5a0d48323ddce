#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "jtm/numerics/tensor.hpp"

// Differentiable operations over tape variables. Every op computes its value
// eagerly and registers a backward rule that accumulates into input grads.
namespace jtm::numerics {

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;

inline MapConstMat as_mat(const Tensor& t) {
  return MapConstMat(t.data(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}

inline MapConstMat as_mat(const Buffer& g, std::size_t rows,
                          std::size_t cols) {
  return MapConstMat(g.data(), static_cast<Eigen::Index>(rows),
                     static_cast<Eigen::Index>(cols));
}

inline MapMat as_mut(Tensor& t) {
  return MapMat(t.data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

inline MapMat as_mut(Buffer& g, std::size_t rows, std::size_t cols) {
  return MapMat(g.data(), static_cast<Eigen::Index>(rows),
                static_cast<Eigen::Index>(cols));
}

inline void same_tape(const Var& a, const Var& b) {
  if (a.tape != b.tape) throw ContractError("operands recorded on different tapes");
}

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

inline void require_rank2(const char* op, const Tensor& a) {
  if (a.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " +
                         shape_string(a.shape()));
  }
}

inline bool wants(Tape& t, const Var& v) { return t.requires_grad(v.id); }

}  // namespace detail

inline Var matmul(Var a, Var b) {
  detail::same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  detail::require_rank2("matmul", A);
  detail::require_rank2("matmul", B);
  if (A.cols() != B.rows()) {
    throw DimensionError("matmul: inner dimensions disagree " +
                         shape_string(A.shape()) + " x " + shape_string(B.shape()));
  }
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor out({m, n});
  detail::as_mut(out).noalias() =
      detail::as_mat(A) * detail::as_mat(B);
  return a.tape->record(std::move(out), {a, b}, [a, b, m, k, n](Tape& t, std::size_t self) {
    auto G = detail::as_mat(t.grad_buffer(self), m, n);
    if (detail::wants(t, a)) {
      detail::as_mut(t.grad_buffer(a.id), m, k).noalias() +=
          G * detail::as_mat(t.value(b.id)).transpose();
    }
    if (detail::wants(t, b)) {
      detail::as_mut(t.grad_buffer(b.id), k, n).noalias() +=
          detail::as_mat(t.value(a.id)).transpose() * G;
    }
  });
}

// y = x W^T (+ bias), x: m×k, W: n×k, bias: n.
inline Var linear(Var x, Var w) {
  detail::same_tape(x, w);
  const Tensor& X = x.value();
  const Tensor& W = w.value();
  detail::require_rank2("linear", W);
  if (X.cols() != W.cols()) {
    throw DimensionError("linear: input " + shape_string(X.shape()) +
                         " incompatible with weight " + shape_string(W.shape()));
  }
  const std::size_t m = X.rows(), k = X.cols(), n = W.rows();
  Tensor out({m, n});
  detail::as_mut(out).noalias() =
      detail::as_mat(X) * detail::as_mat(W).transpose();
  return x.tape->record(std::move(out), {x, w}, [x, w, m, k, n](Tape& t, std::size_t self) {
    auto G = detail::as_mat(t.grad_buffer(self), m, n);
    if (detail::wants(t, x)) {
      detail::as_mut(t.grad_buffer(x.id), m, k).noalias() +=
          G * detail::as_mat(t.value(w.id));
    }
    if (detail::wants(t, w)) {
      detail::as_mut(t.grad_buffer(w.id), n, k).noalias() +=
          G.transpose() * detail::as_mat(t.value(x.id));
    }
  });
}

// Adds a length-n bias to every row of an m×n input.
inline Var add_bias(Var x, Var bias) {
  detail::same_tape(x, bias);
  const Tensor& X = x.value();
  const Tensor& b = bias.value();
  if (b.numel() != X.cols()) {
    throw DimensionError("add_bias: bias " + shape_string(b.shape()) +
                         " incompatible with " + shape_string(X.shape()));
  }
  const std::size_t m = X.rows(), n = X.cols();
  Tensor out = X;
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t j = 0; j < n; ++j) out.at(r, j) += b[j];
  return x.tape->record(std::move(out), {x, bias}, [x, bias, m, n](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    if (detail::wants(t, x)) {
      auto& gx = t.grad_buffer(x.id);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
    }
    if (detail::wants(t, bias)) {
      auto& gb = t.grad_buffer(bias.id);
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[r * n + j];
    }
  });
}

inline Var linear(Var x, Var w, Var bias) { return add_bias(linear(x, w), bias); }

inline Var add(Var a, Var b) {
  detail::same_tape(a, b);
  detail::require_same_shape("add", a.value(), b.value());
  Tensor out = a.value();
  const Tensor& B = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += B[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    for (const Var& v : {a, b}) {
      if (!detail::wants(t, v)) continue;
      auto& gv = t.grad_buffer(v.id);
      for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += g[i];
    }
  });
}

inline Var sub(Var a, Var b) {
  detail::same_tape(a, b);
  detail::require_same_shape("sub", a.value(), b.value());
  Tensor out = a.value();
  const Tensor& B = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= B[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    if (detail::wants(t, a)) {
      auto& ga = t.grad_buffer(a.id);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    }
    if (detail::wants(t, b)) {
      auto& gb = t.grad_buffer(b.id);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
    }
  });
}

inline Var mul(Var a, Var b) {
  detail::same_tape(a, b);
  detail::require_same_shape("elementwise_mul", a.value(), b.value());
  Tensor out = a.value();
  const Tensor& B = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= B[i];
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    if (detail::wants(t, a)) {
      auto& ga = t.grad_buffer(a.id);
      const Tensor& B = t.value(b.id);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * B[i];
    }
    if (detail::wants(t, b)) {
      auto& gb = t.grad_buffer(b.id);
      const Tensor& A = t.value(a.id);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * A[i];
    }
  });
}

inline Var elementwise_mul(Var a, Var b) { return mul(a, b); }

// scale * a + shift, elementwise.
inline Var affine(Var a, double scale, double shift = 0.0) {
  Tensor out = a.value();
  for (double& v : out.values()) v = scale * v + shift;
  return a.tape->record(std::move(out), {a}, [a, scale](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    auto& ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += scale * g[i];
  });
}

inline Var scale(Var a, double c) { return affine(a, c, 0.0); }

inline Var tanh(Var a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = std::tanh(v);
  return a.tape->record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    const Tensor& y = t.value(self);
    auto& ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

inline Var relu(Var a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return a.tape->record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    const Tensor& x = t.value(a.id);
    auto& ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += x[i] > 0.0 ? g[i] : 0.0;
  });
}

// Softmax over the last axis (each row of a matrix, or the whole vector).
inline Var softmax(Var a) {
  if (a.value().numel() == 0) throw DimensionError("softmax of an empty tensor");
  Tensor out = softmax_values(a.value());
  const std::size_t m = out.rows(), n = out.cols();
  return a.tape->record(std::move(out), {a}, [a, m, n](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    const Tensor& y = t.value(self);
    auto& ga = t.grad_buffer(a.id);
    for (std::size_t r = 0; r < m; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
      for (std::size_t j = 0; j < n; ++j) {
        ga[r * n + j] += y[r * n + j] * (g[r * n + j] - dot);
      }
    }
  });
}

inline Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape->record(Tensor::scalar(s), {a}, [a](Tape& t, std::size_t self) {
    const double g = t.grad_buffer(self)[0];
    auto& ga = t.grad_buffer(a.id);
    for (double& v : ga) v += g;
  });
}

inline Var mean(Var a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.value().numel()));
}

// Rank-1 inputs concatenate elementwise; rank-2 inputs stack rows (axis 0)
// or columns (axis 1).
inline Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat of an empty list");
  Tape* tape = parts.front().tape;
  const std::size_t rank = parts.front().value().rank();
  for (const Var& p : parts) {
    detail::same_tape(parts.front(), p);
    if (p.value().rank() != rank) throw DimensionError("concat: mixed ranks");
  }
  if (rank == 1) {
    if (axis != 0) throw DimensionError("concat: axis out of range for vectors");
    Buffer data;
    std::vector<std::size_t> offsets;
    for (const Var& p : parts) {
      offsets.push_back(data.size());
      data.insert(data.end(), p.value().values().begin(), p.value().values().end());
    }
    const std::size_t total = data.size();
    Tensor out({total}, std::move(data));
    return tape->record(std::move(out), parts, [parts, offsets](Tape& t, std::size_t self) {
      const auto& g = t.grad_buffer(self);
      for (std::size_t p = 0; p < parts.size(); ++p) {
        if (!detail::wants(t, parts[p])) continue;
        auto& gp = t.grad_buffer(parts[p].id);
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offsets[p] + i];
      }
    });
  }
  if (rank != 2 || axis > 1) throw DimensionError("concat: unsupported rank/axis");
  const std::size_t fixed = axis == 0 ? parts.front().value().cols()
                                      : parts.front().value().rows();
  std::size_t total = 0;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    const std::size_t other = axis == 0 ? v.cols() : v.rows();
    if (other != fixed) {
      throw DimensionError("concat: shapes " + shape_string(parts.front().shape()) +
                           " and " + shape_string(v.shape()) + " differ off axis " +
                           std::to_string(axis));
    }
    offsets.push_back(total);
    total += axis == 0 ? v.rows() : v.cols();
  }
  if (axis == 0) {
    Buffer data;
    data.reserve(total * fixed);
    for (const Var& p : parts)
      data.insert(data.end(), p.value().values().begin(), p.value().values().end());
    Tensor out = Tensor::matrix(total, fixed, std::move(data));
    return tape->record(std::move(out), parts, [parts, offsets, fixed](Tape& t, std::size_t self) {
      const auto& g = t.grad_buffer(self);
      for (std::size_t p = 0; p < parts.size(); ++p) {
        if (!detail::wants(t, parts[p])) continue;
        auto& gp = t.grad_buffer(parts[p].id);
        const std::size_t base = offsets[p] * fixed;
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[base + i];
      }
    });
  }
  const std::size_t rows = fixed;
  Tensor out({rows, total});
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& v = parts[p].value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(v.data() + r * v.cols(), v.cols(), out.data() + r * total + offsets[p]);
  }
  return tape->record(std::move(out), parts, [parts, offsets, rows, total](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    for (std::size_t p = 0; p < parts.size(); ++p) {
      if (!detail::wants(t, parts[p])) continue;
      auto& gp = t.grad_buffer(parts[p].id);
      const std::size_t c = t.value(parts[p].id).cols();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < c; ++j) gp[r * c + j] += g[r * total + offsets[p] + j];
    }
  });
}

inline Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  const Tensor& A = a.value();
  detail::require_rank2("slice_rows", A);
  if (count == 0 || begin + count > A.rows()) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of " +
                         shape_string(A.shape()));
  }
  const std::size_t n = A.cols();
  Buffer data(A.data() + begin * n, A.data() + (begin + count) * n);
  Tensor out = Tensor::matrix(count, n, std::move(data));
  return a.tape->record(std::move(out), {a}, [a, begin, n](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    auto& ga = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[begin * n + i] += g[i];
  });
}

inline Var gather_rows(Var a, std::vector<std::size_t> index) {
  const Tensor& A = a.value();
  detail::require_rank2("gather_rows", A);
  if (index.empty()) throw DimensionError("gather_rows: empty index");
  const std::size_t n = A.cols();
  Tensor out({index.size(), n});
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= A.rows()) {
      throw DimensionError("gather_rows: row " + std::to_string(index[r]) +
                           " out of " + shape_string(A.shape()));
    }
    std::copy_n(A.data() + index[r] * n, n, out.data() + r * n);
  }
  return a.tape->record(std::move(out), {a}, [a, index = std::move(index), n](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    auto& ga = t.grad_buffer(a.id);
    for (std::size_t r = 0; r < index.size(); ++r)
      for (std::size_t j = 0; j < n; ++j) ga[index[r] * n + j] += g[r * n + j];
  });
}

inline Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Tensor& A = a.value();
  detail::require_rank2("slice_cols", A);
  if (count == 0 || begin + count > A.cols()) {
    throw DimensionError("slice_cols: range out of " + shape_string(A.shape()));
  }
  const std::size_t m = A.rows(), n = A.cols();
  Tensor out({m, count});
  for (std::size_t r = 0; r < m; ++r)
    std::copy_n(A.data() + r * n + begin, count, out.data() + r * count);
  return a.tape->record(std::move(out), {a}, [a, begin, count, m, n](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    auto& ga = t.grad_buffer(a.id);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t j = 0; j < count; ++j) ga[r * n + begin + j] += g[r * count + j];
  });
}

// Repeats a single row m times.
inline Var broadcast_rows(Var a, std::size_t m) {
  const Tensor& A = a.value();
  if (A.rows() != 1) throw DimensionError("broadcast_rows: expected one row");
  const std::size_t n = A.cols();
  Tensor out({m, n});
  for (std::size_t r = 0; r < m; ++r) std::copy_n(A.data(), n, out.data() + r * n);
  return a.tape->record(std::move(out), {a}, [a, m, n](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    auto& ga = t.grad_buffer(a.id);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t j = 0; j < n; ++j) ga[j] += g[r * n + j];
  });
}

// out[i, :] = a[i, :] * s[i], s: m×1 (or length m).
inline Var scale_rows(Var a, Var s) {
  detail::same_tape(a, s);
  const Tensor& A = a.value();
  const Tensor& S = s.value();
  if (S.numel() != A.rows()) {
    throw DimensionError("scale_rows: scales " + shape_string(S.shape()) +
                         " incompatible with " + shape_string(A.shape()));
  }
  const std::size_t m = A.rows(), n = A.cols();
  Tensor out = A;
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t j = 0; j < n; ++j) out.at(r, j) *= S[r];
  return a.tape->record(std::move(out), {a, s}, [a, s, m, n](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    if (detail::wants(t, a)) {
      const Tensor& S = t.value(s.id);
      auto& ga = t.grad_buffer(a.id);
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t j = 0; j < n; ++j) ga[r * n + j] += g[r * n + j] * S[r];
    }
    if (detail::wants(t, s)) {
      const Tensor& A = t.value(a.id);
      auto& gs = t.grad_buffer(s.id);
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t j = 0; j < n; ++j) gs[r] += g[r * n + j] * A[r * n + j];
    }
  });
}

// Sum of each row, giving an m×1 column.
inline Var row_sum(Var a) {
  const Tensor& A = a.value();
  const std::size_t m = A.rows(), n = A.cols();
  Tensor out({m, 1});
  for (std::size_t r = 0; r < m; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += A[r * n + j];
    out[r] = s;
  }
  return a.tape->record(std::move(out), {a}, [a, m, n](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    auto& ga = t.grad_buffer(a.id);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t j = 0; j < n; ++j) ga[r * n + j] += g[r];
  });
}

// Row-wise cosine similarity. b is either the same shape as a or a single row
// compared against every row of a. Result is m×1.
inline Var cosine_rows(Var a, Var b) {
  detail::same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const std::size_t m = A.rows(), n = A.cols();
  const bool shared = B.rows() == 1 && m != 1;
  if (B.cols() != n || (!shared && B.rows() != m)) {
    throw DimensionError("cosine_rows: shapes " + shape_string(A.shape()) + " and " +
                         shape_string(B.shape()));
  }
  std::vector<double> na(m), nb(m), cs(m);
  Tensor out({m, 1});
  for (std::size_t r = 0; r < m; ++r) {
    const double* x = A.data() + r * n;
    const double* y = B.data() + (shared ? 0 : r * n);
    double dot = 0.0, xx = 0.0, yy = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      dot += x[j] * y[j];
      xx += x[j] * x[j];
      yy += y[j] * y[j];
    }
    if (xx == 0.0 || yy == 0.0) throw DegenerateInputError("cosine of a zero vector");
    na[r] = std::sqrt(xx);
    nb[r] = std::sqrt(yy);
    cs[r] = dot / (na[r] * nb[r]);
    out[r] = std::clamp(cs[r], -1.0, 1.0);
  }
  return a.tape->record(std::move(out), {a, b},
                        [a, b, m, n, shared, na, nb, cs](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    const Tensor& A = t.value(a.id);
    const Tensor& B = t.value(b.id);
    const bool ga_on = detail::wants(t, a), gb_on = detail::wants(t, b);
    for (std::size_t r = 0; r < m; ++r) {
      const double* x = A.data() + r * n;
      const std::size_t yoff = shared ? 0 : r * n;
      const double* y = B.data() + yoff;
      const double inv = 1.0 / (na[r] * nb[r]);
      if (ga_on) {
        auto& ga = t.grad_buffer(a.id);
        const double cx = cs[r] / (na[r] * na[r]);
        for (std::size_t j = 0; j < n; ++j) ga[r * n + j] += g[r] * (y[j] * inv - cx * x[j]);
      }
      if (gb_on) {
        auto& gb = t.grad_buffer(b.id);
        const double cy = cs[r] / (nb[r] * nb[r]);
        for (std::size_t j = 0; j < n; ++j) gb[yoff + j] += g[r] * (x[j] * inv - cy * y[j]);
      }
    }
  });
}

// out[k*B + i, :] = tanh(a[i, :] + c[k, :] + bias) for a: B×h, c: K×h.
// Evaluates a first dense layer over every (row of a, row of c) pair without
// materialising the concatenated inputs.
inline Var pairwise_tanh(Var a, Var c, Var bias) {
  detail::same_tape(a, c);
  detail::same_tape(a, bias);
  const Tensor& A = a.value();
  const Tensor& C = c.value();
  const Tensor& b = bias.value();
  const std::size_t B = A.rows(), K = C.rows(), h = A.cols();
  if (C.cols() != h || b.numel() != h) {
    throw DimensionError("pairwise_tanh: shapes " + shape_string(A.shape()) + ", " +
                         shape_string(C.shape()) + ", " + shape_string(b.shape()));
  }
  Tensor out({K * B, h});
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t i = 0; i < B; ++i) {
      double* y = out.data() + (k * B + i) * h;
      const double* x = A.data() + i * h;
      const double* z = C.data() + k * h;
      for (std::size_t j = 0; j < h; ++j) y[j] = std::tanh(x[j] + z[j] + b[j]);
    }
  return a.tape->record(std::move(out), {a, c, bias}, [a, c, bias, B, K, h](Tape& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    const Tensor& y = t.value(self);
    Buffer d(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) d[i] = g[i] * (1.0 - y[i] * y[i]);
    if (detail::wants(t, a)) {
      auto& ga = t.grad_buffer(a.id);
      for (std::size_t k = 0; k < K; ++k)
        for (std::size_t i = 0; i < B; ++i)
          for (std::size_t j = 0; j < h; ++j) ga[i * h + j] += d[(k * B + i) * h + j];
    }
    if (detail::wants(t, c)) {
      auto& gc = t.grad_buffer(c.id);
      for (std::size_t k = 0; k < K; ++k)
        for (std::size_t i = 0; i < B; ++i)
          for (std::size_t j = 0; j < h; ++j) gc[k * h + j] += d[(k * B + i) * h + j];
    }
    if (detail::wants(t, bias)) {
      auto& gb = t.grad_buffer(bias.id);
      for (std::size_t r = 0; r < K * B; ++r)
        for (std::size_t j = 0; j < h; ++j) gb[j] += d[r * h + j];
    }
  });
}

// Mean over rows of -log softmax(logits)[label]; fused for stability.
inline Var softmax_cross_entropy(Var logits, const std::vector<std::size_t>& labels) {
  const Tensor& Z = logits.value();
  const std::size_t m = Z.rows(), n = Z.cols();
  if (labels.size() != m) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(m) + " rows");
  }
  Tensor p = softmax_values(Z);
  double loss = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    if (labels[r] >= n) {
      throw DataError("label index " + std::to_string(labels[r]) + " out of range " +
                      std::to_string(n));
    }
    const double* z = Z.data() + r * n;
    const double mx = *std::max_element(z, z + n);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::exp(z[j] - mx);
    loss += mx + std::log(s) - z[labels[r]];
  }
  loss /= static_cast<double>(m);
  return logits.tape->record(Tensor::scalar(loss), {logits},
                             [logits, labels, p = std::move(p), m, n](Tape& t, std::size_t self) {
    const double g = t.grad_buffer(self)[0] / static_cast<double>(m);
    auto& gz = t.grad_buffer(logits.id);
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t j = 0; j < n; ++j)
        gz[r * n + j] += g * (p[r * n + j] - (j == labels[r] ? 1.0 : 0.0));
  });
}

// Mean binary cross-entropy of sigmoid(logits) against 0/1 targets.
inline Var bce_with_logits(Var logits, const std::vector<double>& targets) {
  const Tensor& Z = logits.value();
  if (targets.size() != Z.numel()) throw DimensionError("bce_with_logits: target count");
  double loss = 0.0;
  for (std::size_t i = 0; i < Z.numel(); ++i) {
    const double z = Z[i];
    loss += std::max(z, 0.0) - z * targets[i] + std::log1p(std::exp(-std::abs(z)));
  }
  const double n = static_cast<double>(Z.numel());
  return logits.tape->record(Tensor::scalar(loss / n), {logits}, [logits, targets, n](Tape& t, std::size_t self) {
    const double g = t.grad_buffer(self)[0] / n;
    const Tensor& Z = t.value(logits.id);
    auto& gz = t.grad_buffer(logits.id);
    for (std::size_t i = 0; i < gz.size(); ++i) {
      const double s = 1.0 / (1.0 + std::exp(-Z[i]));
      gz[i] += g * (s - targets[i]);
    }
  });
}

}  // namespace jtm::numerics
