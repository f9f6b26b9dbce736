#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dgstgcn/tensor.hpp"

namespace dgstgcn {

// Reverse-mode differentiation over a dynamically recorded graph. Every
// operator in ops.hpp returns a Var whose node remembers its parents and a
// pullback; backward() walks the nodes in reverse topological order.

template <typename Scalar>
struct Node {
  using Pullback = std::function<void(Node &)>;

  Tensor<Scalar> value;
  Tensor<Scalar> grad; // shape {} and size 0 until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  Pullback pullback;

  /// Gradient buffer, zero-initialized on first use.
  Tensor<Scalar> &grad_buffer() {
    if (grad.size() != value.size() || grad.shape() != value.shape()) grad = Tensor<Scalar>(value.shape());
    return grad;
  }
  bool has_grad() const { return grad.size() == value.size() && grad.shape() == value.shape(); }
};

template <typename Scalar>
class Var {
public:
  Var() = default;
  explicit Var(Tensor<Scalar> value, bool requires_grad = false) : node_(std::make_shared<Node<Scalar>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }
  explicit Var(std::shared_ptr<Node<Scalar>> node) : node_(std::move(node)) {}

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Tensor<Scalar> &value() const { return node_->value; }
  Tensor<Scalar> &mutable_value() { return node_->value; }
  const Shape &shape() const { return node_->value.shape(); }
  Index dim(Index axis) const { return node_->value.dim(axis); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  /// Accumulated gradient (zeros if backward never reached this node).
  Tensor<Scalar> &grad() { return node_->grad_buffer(); }
  void zero_grad() {
    if (node_->has_grad()) node_->grad.set_zero();
  }

  const std::shared_ptr<Node<Scalar>> &node() const { return node_; }

private:
  std::shared_ptr<Node<Scalar>> node_;
};

/// Thread-local switch; when disabled, operators record no graph.
class GradMode {
public:
  static bool enabled();
  static void set_enabled(bool on);
};

class NoGradGuard {
public:
  NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(prev_); }
  NoGradGuard(const NoGradGuard &) = delete;
  NoGradGuard &operator=(const NoGradGuard &) = delete;

private:
  bool prev_;
};

/// Wrap an operator result. The pullback is stored only when grad mode is on
/// and at least one parent requires a gradient.
template <typename Scalar>
Var<Scalar> make_result(Tensor<Scalar> value, std::vector<Var<Scalar>> parents,
                        typename Node<Scalar>::Pullback pullback);

/// Seed d(root)/d(root) = 1 (root must hold a single element) and propagate.
/// Intermediate nodes release their pullbacks afterwards; leaves keep grads.
template <typename Scalar>
void backward(const Var<Scalar> &root);

/// Propagate an explicit upstream gradient of root's shape.
template <typename Scalar>
void backward(const Var<Scalar> &root, const Tensor<Scalar> &seed);

/// Learnable tensor: a gradient-tracking leaf plus its optimizer state.
/// Copies are deep, so copying a module copies its weights.
template <typename Scalar>
class Parameter {
public:
  Parameter() = default;
  explicit Parameter(Tensor<Scalar> value) : var_(std::move(value), true), momentum_(var_.shape()) {}

  Parameter(const Parameter &other)
      : var_(other.var_.defined() ? Var<Scalar>(other.value(), true) : Var<Scalar>()), momentum_(other.momentum_),
        trainable_(other.trainable_) {}
  Parameter &operator=(const Parameter &other) {
    if (this != &other) {
      var_ = other.var_.defined() ? Var<Scalar>(other.value(), true) : Var<Scalar>();
      momentum_ = other.momentum_;
      trainable_ = other.trainable_;
    }
    return *this;
  }
  Parameter(Parameter &&) noexcept = default;
  Parameter &operator=(Parameter &&) noexcept = default;

  bool defined() const { return var_.defined(); }
  const Var<Scalar> &var() const { return var_; }
  const Tensor<Scalar> &value() const { return var_.value(); }
  Tensor<Scalar> &value() { return var_.mutable_value(); }
  Tensor<Scalar> &grad() { return var_.grad(); }
  Tensor<Scalar> &momentum() { return momentum_; }
  const Tensor<Scalar> &momentum() const { return momentum_; }
  Index size() const { return var_.value().size(); }

  bool trainable() const { return trainable_; }
  void set_trainable(bool on) { trainable_ = on; }
  void zero_grad() { var_.zero_grad(); }

private:
  Var<Scalar> var_;
  Tensor<Scalar> momentum_;
  bool trainable_ = true;
};

template <typename Scalar>
struct NamedParameter {
  std::string name;
  Parameter<Scalar> *param;
};

template <typename Scalar>
struct NamedBuffer {
  std::string name;
  Tensor<Scalar> *buffer;
};

} // namespace dgstgcn
