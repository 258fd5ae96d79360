#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gseg {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Raised whenever operand extents are incompatible with an operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {
struct Node;
}

/// Dense row-major float64 tensor with an optional gradient slot.
///
/// A Tensor is a shared handle: copies alias the same storage and the same
/// node in the recorded computation. Results of operations on tensors that
/// require gradients remember their parents and a backward closure; calling
/// backward() on a scalar result walks that record in reverse topological
/// order. Leaf tensors (parameters) accumulate gradients across calls until
/// zero_grad() is called; intermediate gradients are transient.
class Tensor {
 public:
  /// Receives the gradient of the result; accumulates into the parents.
  using BackwardFn = std::function<void(std::span<const double> out_grad)>;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  /// Builds the result of a differentiable operation. The closure is kept only
  /// if at least one parent requires a gradient.
  static Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                            BackwardFn backward);

  bool defined() const { return node_ != nullptr; }

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Mutable view of the values. Intended for leaves (optimizer steps,
  /// checkpoint loading, finite-difference perturbation).
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  /// Grad buffer, zero-allocated on first use.
  std::span<double> mutable_grad();
  void zero_grad();

  /// Reverse-mode sweep from this scalar.
  void backward() const;

  /// Same values, no history, no gradient.
  Tensor detach() const;

  /// True if both handles refer to the same node.
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::Node> node_;
};

/// A learnable tensor with a model-unique name.
struct Parameter {
  std::string name;
  Tensor tensor;
};

std::size_t count_parameters(std::span<const Parameter> params);
void zero_grads(std::span<Parameter> params);

}  // namespace gseg
