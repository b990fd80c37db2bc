#include "modlab/tensor/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "modlab/errors.hpp"

namespace modlab {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace {

void check_shape(const Shape& shape, std::size_t n) {
  if (shape.empty()) throw ContractError("tensor shape must have at least one dimension");
  for (auto d : shape) {
    if (d == 0) throw ContractError("tensor dimensions must be positive: " + shape_to_string(shape));
  }
  if (numel(shape) != n) {
    throw ContractError("value count " + std::to_string(n) + " does not match shape " +
                        shape_to_string(shape));
  }
}

}  // namespace

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  check_shape(shape, values.size());
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->op = "constant";
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape) {
  const auto n = numel(shape);
  return constant(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::scalar(double v) { return constant({1}, {v}); }

Tensor Tensor::variable(Shape shape, std::vector<double> values) {
  check_shape(shape, values.size());
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = true;
  node->op = "leaf";
  return Tensor(std::move(node));
}

Tensor Tensor::from_op(Shape shape, std::vector<double> values, const std::vector<Tensor>& parents,
                       std::string_view op, std::function<void(detail::Node&)> backward) {
  check_shape(shape, values.size());
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->op = op;
  const bool any = std::any_of(parents.begin(), parents.end(),
                               [](const Tensor& p) { return p.defined() && p.requires_grad(); });
  if (any) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.node_);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->value.size(); }
std::size_t Tensor::cols() const { return node_->shape.back(); }
std::size_t Tensor::rows() const { return node_->value.size() / node_->shape.back(); }
std::span<const double> Tensor::values() const { return node_->value; }

std::span<double> Tensor::mutable_values() const {
  if (!is_leaf()) throw ContractError("only leaf tensors may be mutated in place");
  return node_->value;
}

std::span<const double> Tensor::grad() const { return node_->grad; }

std::span<double> Tensor::mutable_grad() const {
  node_->ensure_grad();
  return node_->grad;
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() requires a single-element tensor, got " +
                                       shape_to_string(shape()));
  return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::is_leaf() const { return node_->parents.empty() && !node_->backward; }
std::string_view Tensor::op() const { return node_->op; }
std::size_t Tensor::empty_rows() const { return node_->empty_rows; }

void Tensor::backward() const {
  if (size() != 1) {
    throw ContractError("backward() requires a scalar output, got " + shape_to_string(shape()));
  }
  if (!requires_grad()) return;

  // Iterative post-order DFS; each node appears once in `order`.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (auto* n : order) {
    if (n->backward) n->grad.assign(n->value.size(), 0.0);
  }
  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (!n->backward) continue;
    for (auto& p : n->parents) {
      if (p->requires_grad) p->ensure_grad();
    }
    n->backward(*n);
  }
}

void Tensor::zero_grad() const {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return constant(shape(), node_->value); }

}  // namespace modlab
