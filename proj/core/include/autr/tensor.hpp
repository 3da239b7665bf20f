#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "autr/common.hpp"

namespace autr {

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until backward touches this node
  bool requires_grad = false;

  // Edges to the nodes this one was computed from, plus the closure that
  // scatters this node's grad into theirs. Empty for leaves and for
  // forward-only results.
  std::vector<std::shared_ptr<TensorNode>> inputs;
  std::function<void()> backprop;

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

/// Value-semantic handle to a node in the autodiff graph. All data is
/// 64-bit float, row-major.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value);
  static Tensor from_data(Shape shape, std::vector<double> values,
                          bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t dim() const { return static_cast<int64_t>(node_->shape.size()); }
  int64_t size(int64_t axis) const;
  int64_t numel() const { return node_->numel(); }

  std::vector<double>& data() { return node_->data; }
  const std::vector<double>& data() const { return node_->data; }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool rg) { node_->requires_grad = rg; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::vector<double>& grad() { return node_->grad; }
  const std::vector<double>& grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  /// Scalar value; throws ContractError if not a one-element tensor.
  double value() const;

  double at(std::initializer_list<int64_t> idx) const;

  /// Copy of the values without graph history.
  Tensor detach() const;

  std::shared_ptr<TensorNode>& node() { return node_; }
  const std::shared_ptr<TensorNode>& node() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

/// Reverse-mode sweep from a scalar loss. Populates grad on every reachable
/// requires_grad node; unreachable grads are untouched.
void backward(const Tensor& loss);

}  // namespace autr
