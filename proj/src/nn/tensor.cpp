#include "e2d/tensor.hpp"

#include <algorithm>
#include <unordered_set>
#include <utility>

#include "e2d/error.hpp"

namespace e2d::nn {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;

  std::vector<double>& grad_buffer() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : node_(std::make_shared<detail::Node>()) {
  node_->value.assign(shape_numel(shape), fill);
  node_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : node_(std::make_shared<detail::Node>()) {
  if (values.size() != shape_numel(shape)) {
    throw ShapeError("tensor of shape " + shape_string(shape) + " given " +
                     std::to_string(values.size()) + " values");
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

detail::Node& Tensor::node() const {
  if (!node_) throw Error("use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_string(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return node().value.size(); }

std::span<const double> Tensor::data() const { return node().value; }

std::span<double> Tensor::mutable_data() {
  if (!node().leaf) throw Error("cannot write into a non-leaf tensor");
  return node_->value;
}

std::span<const double> Tensor::grad() const { return node().grad; }

std::span<double> Tensor::mutable_grad() { return node().grad_buffer(); }

bool Tensor::has_grad() const { return node().grad.size() == node().value.size(); }

bool Tensor::requires_grad() const { return node().requires_grad; }

void Tensor::set_requires_grad(bool value) {
  if (!node().leaf) throw Error("requires_grad can only be changed on leaves");
  node_->requires_grad = value;
}

bool Tensor::is_leaf() const { return node().leaf; }

void Tensor::zero_grad() {
  auto& g = node().grad;
  std::fill(g.begin(), g.end(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape()));
  return node().value[0];
}

Tensor Tensor::detach() const { return Tensor(shape(), node().value); }

Tensor make_op(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
               BackwardFn backward) {
  auto node = std::make_shared<detail::Node>();
  if (values.size() != shape_numel(shape)) {
    throw ShapeError("operation produced " + std::to_string(values.size()) +
                     " values for shape " + shape_string(shape));
  }
  node->shape = std::move(shape);
  node->value = std::move(values);
  const bool track =
      g_grad_enabled && std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) {
        return t.defined() && t.requires_grad();
      });
  if (track) {
    node->requires_grad = true;
    node->leaf = false;
    node->inputs.reserve(inputs.size());
    for (const Tensor& t : inputs) node->inputs.push_back(t.node_);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

void Tensor::backward() const {
  detail::Node& root = node();
  if (root.value.size() != 1) {
    throw ShapeError("backward() needs a scalar, got shape " + shape_string(root.shape));
  }
  if (!root.requires_grad) return;
  if (root.leaf) {
    root.grad_buffer()[0] += 1.0;
    return;
  }

  // Iterative post-order DFS; inputs are visited in recorded order so the
  // resulting schedule is deterministic.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(&root, 0);
  visited.insert(&root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child != nullptr && child->requires_grad && !child->leaf &&
          visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (detail::Node* n : order) n->grad.assign(n->value.size(), 0.0);
  root.grad[0] = 1.0;

  std::vector<std::span<double>> sinks;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    sinks.clear();
    for (const auto& in : n->inputs) {
      if (in && in->requires_grad) {
        sinks.emplace_back(in->grad_buffer());
      } else {
        sinks.emplace_back();
      }
    }
    if (n->backward) n->backward(n->grad, sinks);
    std::vector<double>().swap(n->grad);
  }
}

}  // namespace e2d::nn
