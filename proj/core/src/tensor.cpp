#include "gseg/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace gseg {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  Tensor::BackwardFn backward;
};

}  // namespace detail

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

std::shared_ptr<detail::Node> make_node(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor of shape " + shape_to_string(shape) + " cannot hold " +
                     std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  return node;
}

detail::Node& deref(const std::shared_ptr<detail::Node>& node) {
  if (!node) throw std::logic_error("use of an undefined tensor");
  return *node;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(make_node(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(make_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(make_node({}, {value}, requires_grad));
}

Tensor Tensor::make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                           BackwardFn backward) {
  const bool needs_grad =
      std::any_of(parents.begin(), parents.end(), [](const Tensor& p) { return p.requires_grad(); });
  auto node = make_node(std::move(shape), std::move(values), needs_grad);
  if (needs_grad) {
    node->parents.reserve(parents.size());
    for (auto& p : parents) {
      if (p.requires_grad()) node->parents.push_back(p.node_);
    }
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

const Shape& Tensor::shape() const { return deref(node_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_to_string(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return deref(node_).values.size(); }

std::span<const double> Tensor::data() const { return deref(node_).values; }

std::span<double> Tensor::mutable_data() { return deref(node_).values; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_to_string(shape()));
  return data()[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::is_leaf() const { return !deref(node_).backward; }

bool Tensor::has_grad() const { return !deref(node_).grad.empty(); }

std::span<const double> Tensor::grad() const { return deref(node_).grad; }

std::span<double> Tensor::mutable_grad() {
  auto& n = deref(node_);
  if (n.grad.empty()) n.grad.assign(n.values.size(), 0.0);
  return n.grad;
}

void Tensor::zero_grad() {
  auto& n = deref(node_);
  std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

void Tensor::backward() const {
  auto& root = deref(node_);
  if (root.values.size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " + shape_to_string(root.shape));
  }
  if (!root.requires_grad) {
    throw std::logic_error("backward() on a loss that depends on no tensor requiring grad");
  }

  // Iterative post-order DFS; `order` ends up parents-before-children.
  std::vector<detail::Node*> order;
  std::unordered_set<const detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (detail::Node* n : order) {
    if (n->backward) n->grad.assign(n->values.size(), 0.0);
  }
  if (root.grad.empty()) root.grad.assign(1, 0.0);
  root.grad[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward) {
      n->backward(n->grad);
    }
  }
  for (detail::Node* n : order) {
    if (n->backward) {
      n->grad.clear();
      n->grad.shrink_to_fit();
    }
  }
}

Tensor Tensor::detach() const {
  const auto& n = deref(node_);
  return Tensor(make_node(n.shape, n.values, false));
}

std::size_t count_parameters(std::span<const Parameter> params) {
  std::size_t total = 0;
  for (const auto& p : params) total += p.tensor.numel();
  return total;
}

void zero_grads(std::span<Parameter> params) {
  for (auto& p : params) p.tensor.zero_grad();
}

}  // namespace gseg
