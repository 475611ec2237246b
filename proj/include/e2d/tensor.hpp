#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

// Minimal float64 tensor with reverse-mode automatic differentiation.
//
// A Tensor is a shared handle to a graph node. Operations on tensors that
// require gradients record a backward closure; `backward()` on a scalar
// result walks the recorded graph in reverse topological order. Leaf
// gradients accumulate across calls until `zero_grad()`.

namespace e2d::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {
struct Node;
}

/// Receives the output gradient and one span per input. A span is empty when
/// that input does not need a gradient; otherwise the closure must add into it.
using BackwardFn =
    std::function<void(std::span<const double> grad_out, std::span<const std::span<double>> grad_in)>;

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  /// Leaf with requires_grad set.
  static Tensor parameter(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Writable storage; only legal on leaves (parameters, buffers, inputs).
  std::span<double> mutable_data();
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  bool has_grad() const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool is_leaf() const;
  void zero_grad();

  double item() const;

  /// Reverse-mode sweep from this scalar. Throws ShapeError otherwise.
  void backward() const;

  /// New leaf holding a copy of the values, cut from the graph.
  Tensor detach() const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  friend Tensor make_op(Shape, std::vector<double>, std::vector<Tensor>, BackwardFn);
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  detail::Node& node() const;

  std::shared_ptr<detail::Node> node_;
};

/// Creates the result of a differentiable operation. The closure is kept only
/// when gradient recording is on and at least one input requires a gradient.
Tensor make_op(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
               BackwardFn backward);

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

}  // namespace e2d::nn
