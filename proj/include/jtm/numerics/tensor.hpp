#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "jtm/error.hpp"

namespace jtm::numerics {

using Shape = std::vector<std::size_t>;

// Allocator with a fixed 64-byte alignment. Vectorised kernels peel loops
// according to the address of their operands, so a fixed alignment keeps the
// floating-point summation order (and therefore every result bit)
// independent of where the heap places a buffer.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlign));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

// Dense row-major array of doubles. Rank 1 tensors behave as a single row
// wherever a matrix is expected.
class Tensor {
 public:
  Tensor() : shape_{0} {}

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {
    check_shape();
  }

  Tensor(Shape shape, const std::vector<double>& data)
      : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    check_data();
  }

  Tensor(Shape shape, Buffer data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_data();
  }

  static Tensor scalar(double v) { return Tensor({1}, Buffer{v}); }

  static Tensor vector(const std::vector<double>& v) { return Tensor({v.size()}, v); }
  static Tensor vector(std::initializer_list<double> v) {
    return Tensor({v.size()}, Buffer(v));
  }

  static Tensor matrix(std::size_t rows, std::size_t cols,
                       const std::vector<double>& v) {
    return Tensor({rows, cols}, v);
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, Buffer v) {
    return Tensor({rows, cols}, std::move(v));
  }

  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<double> v) {
    return Tensor({rows, cols}, Buffer(v));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t numel() const noexcept { return data_.size(); }

  std::size_t rows() const noexcept {
    return shape_.size() == 2 ? shape_[0] : 1;
  }
  std::size_t cols() const noexcept {
    return shape_.size() == 2 ? shape_[1] : data_.size();
  }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const Buffer& storage() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const {
    return data_[r * cols() + c];
  }

  double item() const {
    if (data_.size() != 1) {
      throw DimensionError("item() on tensor of shape " + shape_string(shape_));
    }
    return data_[0];
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  bool requires_grad = false;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void check_data() const {
    check_shape();
    if (data_.size() != shape_numel(shape_)) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_string(shape_));
    }
  }

  void check_shape() const {
    if (shape_.empty()) throw DimensionError("tensor shape must be non-empty");
    for (std::size_t d : shape_) {
      if (d == 0) {
        throw DimensionError("tensor shape " + shape_string(shape_) +
                             " has a zero extent");
      }
    }
  }

  Shape shape_;
  Buffer data_;
};

// A learnable tensor plus its accumulated gradient.
struct Parameter {
  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape(), 0.0) {
    value.requires_grad = true;
  }

  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad() { std::fill(grad.values().begin(), grad.values().end(), 0.0); }
};

class Tape;

// Handle to a node recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

// Records operations in execution order, which is a valid topological order
// since every node's inputs exist before it is created.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value) {
    value.requires_grad = false;
    return push(std::move(value), false, nullptr);
  }

  // Leaf whose gradient is tracked iff value.requires_grad.
  Var leaf(Tensor value) {
    const bool rg = value.requires_grad;
    return push(std::move(value), rg, nullptr);
  }

  // Leaf bound to a parameter; backward() accumulates into param.grad.
  Var param(Parameter& p) {
    Var v = push(p.value, true, nullptr);
    nodes_[v.id].param = &p;
    return v;
  }

  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
    bool rg = false;
    for (const Var& in : inputs) rg = rg || nodes_[in.id].requires_grad;
    value.requires_grad = rg;
    return push(std::move(value), rg, rg ? std::move(fn) : BackwardFn{});
  }

  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
    bool rg = false;
    for (const Var& in : inputs) rg = rg || nodes_[in.id].requires_grad;
    value.requires_grad = rg;
    return push(std::move(value), rg, rg ? std::move(fn) : BackwardFn{});
  }

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Gradient buffer of a node, zero-initialised on first access.
  Buffer& grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.value.numel(), 0.0);
    return n.grad;
  }

  // Gradient of a node after backward(); zeros if it was never reached.
  Tensor grad(Var v) const {
    const Node& n = nodes_[v.id];
    if (n.grad.empty()) return Tensor(n.value.shape(), 0.0);
    return Tensor(n.value.shape(), n.grad);
  }

  void backward(Var loss) {
    if (loss.tape != this) throw ContractError("backward on a foreign tape");
    if (nodes_[loss.id].value.numel() != 1) {
      throw ContractError("backward requires a scalar loss, got shape " +
                          shape_string(nodes_[loss.id].value.shape()));
    }
    for (Node& n : nodes_) n.grad.clear();
    grad_buffer(loss.id)[0] = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.empty() || !n.requires_grad) continue;
      if (n.backward) n.backward(*this, i);
      if (n.param != nullptr) {
        auto g = n.param->grad.values();
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
      }
    }
  }

  void clear() { nodes_.clear(); }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Buffer grad;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  Var push(Tensor value, bool rg, BackwardFn fn) {
    nodes_.push_back(Node{std::move(value), {}, rg, std::move(fn), nullptr});
    return Var{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape->value(id); }

inline double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("cosine_sim operands of length " +
                         std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw DegenerateInputError("cosine_sim of a zero vector");
  }
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

inline double cosine_sim(const Tensor& a, const Tensor& b) {
  return cosine_sim(a.values(), b.values());
}

// Row-wise max-shifted softmax of a plain tensor.
inline Tensor softmax_values(const Tensor& a) {
  Tensor out(a.shape());
  const std::size_t m = a.rows(), n = a.cols();
  for (std::size_t r = 0; r < m; ++r) {
    const double* x = a.data() + r * n;
    double* y = out.data() + r * n;
    const double mx = *std::max_element(x, x + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    for (std::size_t j = 0; j < n; ++j) y[j] /= z;
  }
  return out;
}

}  // namespace jtm::numerics
