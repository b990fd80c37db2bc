#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace modlab {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

// One vertex of the dynamic autodiff graph. `backward` reads `grad` of this
// node and accumulates into the parents' grad slots.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  std::string_view op = "leaf";
  bool requires_grad = false;
  std::size_t empty_rows = 0;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

// Handle to a dense row-major float64 tensor participating in a dynamic
// reverse-mode graph. Copies share the underlying node.
//
// Matrix-style ops view a tensor as rows() x cols(), where cols() is the last
// dimension and rows() is the product of the leading ones.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape);
  static Tensor scalar(double v);
  // Leaf that accumulates gradients; used for parameters and grad-check inputs.
  static Tensor variable(Shape shape, std::vector<double> values);

  // Builds an interior node. When no parent requires a gradient the lineage is
  // dropped and the result is a constant.
  static Tensor from_op(Shape shape, std::vector<double> values, const std::vector<Tensor>& parents,
                        std::string_view op, std::function<void(detail::Node&)> backward);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t size() const;
  std::size_t rows() const;
  std::size_t cols() const;
  std::span<const double> values() const;
  // Writable access to leaf values (parameters, grad-check perturbations).
  std::span<double> mutable_values() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad() const;
  double item() const;
  double at(std::size_t r, std::size_t c) const;
  bool requires_grad() const;
  bool is_leaf() const;
  std::string_view op() const;
  // Number of rows whose every entry was masked in a softmax-style op.
  std::size_t empty_rows() const;

  // Reverse pass from a scalar. Leaf gradients accumulate across calls;
  // interior gradients are reset at the start of every call.
  void backward() const;
  void zero_grad() const;
  Tensor detach() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

}  // namespace modlab
