#pragma once

// Reverse-mode differentiation over a recording tape.
//
// Every differentiable operation evaluates eagerly, appends one record holding
// its output value and a backward closure, and returns a Var handle. Records
// are appended after their inputs, so the tape is already in topological
// order; backward() walks it once, newest to oldest.
//
// A Tape is single-threaded. Parameters referenced by a tape must stay alive
// and unmodified until the tape is destroyed or backward() has run.

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vdcnn/errors.hpp"
#include "vdcnn/tensor.hpp"

namespace vdcnn {

/// Trainable tensor with its gradient accumulator.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(Tensor<T>::zeros(value.shape())) {}

  void zero_grad() { grad.fill(T{0}); }
};

template <typename T>
void zero_grads(std::span<Parameter<T>* const> params) {
  for (Parameter<T>* p : params) p->zero_grad();
}

/// Handle to a record on a Tape.
struct Var {
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::size_t id = npos;

  bool valid() const noexcept { return id != npos; }
};

template <typename T>
class Tape {
 public:
  /// Receives the gradient of the record's output and pushes contributions
  /// into its inputs through grad_sink().
  using Backward = std::function<void(Tape&, const Tensor<T>&)>;

  /// With grad_enabled = false nothing is retained for backward (inference).
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) noexcept = default;
  Tape& operator=(Tape&&) noexcept = default;

  bool grad_enabled() const noexcept { return grad_enabled_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool consumed() const noexcept { return consumed_; }

  /// Leaf that never receives a gradient.
  Var constant(Tensor<T> value) { return push(Node{std::move(value), nullptr, false, {}, {}}); }

  /// Leaf whose gradient is kept on the tape (read it back with grad()).
  Var input(Tensor<T> value) {
    return push(Node{std::move(value), nullptr, grad_enabled_, {}, {}});
  }

  /// Leaf bound to a Parameter; backward() adds into parameter.grad.
  Var parameter(Parameter<T>& p) { return push(Node{Tensor<T>{}, &p, grad_enabled_, {}, {}}); }

  /// Appends an operation result. The closure is dropped when no input needs a gradient.
  Var record(Tensor<T> value, std::initializer_list<Var> inputs, Backward backward) {
    bool needs = false;
    for (Var v : inputs) needs = needs || node(v).requires_grad;
    needs = needs && grad_enabled_;
    return push(Node{std::move(value), nullptr, needs, {}, needs ? std::move(backward) : Backward{}});
  }

  const Tensor<T>& value(Var v) const {
    const Node& n = node(v);
    return n.param ? n.param->value : n.owned;
  }
  const Shape& shape(Var v) const { return value(v).shape(); }
  bool requires_grad(Var v) const { return node(v).requires_grad; }

  /// Gradient buffer for v, zero-initialised on first use; nullptr when v needs none.
  Tensor<T>* grad_sink(Var v) {
    Node& n = node(v);
    if (!n.requires_grad) return nullptr;
    if (!n.grad) n.grad.emplace(Tensor<T>::zeros(value(v).shape()));
    return &*n.grad;
  }

  /// Accumulated gradient of v after backward(), or nullptr if nothing reached it.
  const Tensor<T>* grad(Var v) const {
    const Node& n = node(v);
    return n.grad ? &*n.grad : nullptr;
  }

  /// Propagates d(loss)/d(.) to every record and parameter reachable from loss.
  void backward(Var loss) {
    if (consumed_) throw TapeError("backward called twice on the same tape");
    if (value(loss).size() != 1) {
      throw TapeError("backward needs a scalar loss, got shape " + to_string(shape(loss)));
    }
    consumed_ = true;
    if (!node(loss).requires_grad) return;
    grad_sink(loss)->fill(T{1});
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.grad) continue;
      if (n.backward) {
        n.backward(*this, *n.grad);
        n.backward = nullptr;
      }
      if (n.param) n.param->grad += *n.grad;
    }
  }

 private:
  struct Node {
    Tensor<T> owned;
    Parameter<T>* param = nullptr;
    bool requires_grad = false;
    std::optional<Tensor<T>> grad;
    Backward backward;
  };

  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }
  Node& node(Var v) {
    if (v.id >= nodes_.size()) throw TapeError("Var does not belong to this tape");
    return nodes_[v.id];
  }
  const Node& node(Var v) const {
    if (v.id >= nodes_.size()) throw TapeError("Var does not belong to this tape");
    return nodes_[v.id];
  }

  std::deque<Node> nodes_;  // deque: references from value() survive later records
  bool grad_enabled_ = true;
  bool consumed_ = false;
};

// Elementary differentiable operations.

/// [m x k] x [k x n] -> [m x n]
template <typename T>
Var matmul(Tape<T>& tape, Var a, Var b);

template <typename T>
Var add(Tape<T>& tape, Var a, Var b);

template <typename T>
Var sub(Tape<T>& tape, Var a, Var b);

/// Hadamard product.
template <typename T>
Var mul(Tape<T>& tape, Var a, Var b);

/// max(x, 0); the derivative at exactly 0 is taken as 0.
template <typename T>
Var relu(Tape<T>& tape, Var x);

template <typename T>
Var scale(Tape<T>& tape, Var x, T factor);

/// Adds bias[c] along the channel axis of a [C x s] or [m x C x s] tensor.
template <typename T>
Var add_channel_bias(Tape<T>& tape, Var x, Var bias);

/// Sum of all entries, as a rank-0 scalar.
template <typename T>
Var sum(Tape<T>& tape, Var x);

/// Sum of weights * x with constant weights of the same shape.
template <typename T>
Var weighted_sum(Tape<T>& tape, Var x, const Tensor<T>& weights);

/// Copying reshape.
template <typename T>
Var reshape(Tape<T>& tape, Var x, Shape shape);

}  // namespace vdcnn
