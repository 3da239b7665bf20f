#include "autr/tensor.hpp"

#include <unordered_set>

namespace autr {

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->data.assign(static_cast<size_t>(shape_numel(node->shape)), 0.0);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t = zeros(std::move(shape));
  for (double& v : t.data()) v = value;
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values,
                         bool requires_grad) {
  if (static_cast<int64_t>(values.size()) != shape_numel(shape)) {
    throw ShapeError("from_data: " + std::to_string(values.size()) +
                     " values for shape " + shape_str(shape));
  }
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

int64_t Tensor::size(int64_t axis) const {
  if (axis < 0) axis += dim();
  if (axis < 0 || axis >= dim()) {
    throw ShapeError("size: axis " + std::to_string(axis) +
                     " out of range for " + shape_str(shape()));
  }
  return node_->shape[static_cast<size_t>(axis)];
}

double Tensor::value() const {
  if (numel() != 1) {
    throw ContractError("value(): tensor of shape " + shape_str(shape()) +
                        " is not scalar");
  }
  return node_->data[0];
}

double Tensor::at(std::initializer_list<int64_t> idx) const {
  const Shape& s = shape();
  if (idx.size() != s.size()) {
    throw ShapeError("at: " + std::to_string(idx.size()) +
                     " indices for shape " + shape_str(s));
  }
  int64_t flat = 0;
  size_t k = 0;
  for (int64_t i : idx) {
    flat = flat * s[k] + i;
    ++k;
  }
  return node_->data[static_cast<size_t>(flat)];
}

Tensor Tensor::detach() const {
  return Tensor::from_data(shape(), data(), false);
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward: loss must be a scalar tensor");
  }

  // Iterative post-order DFS for topological order.
  std::vector<TensorNode*> topo;
  std::unordered_set<TensorNode*> seen;
  struct Frame {
    TensorNode* node;
    size_t next_input;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.node().get(), 0});
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_input < f.node->inputs.size()) {
      TensorNode* in = f.node->inputs[f.next_input++].get();
      if (seen.insert(in).second) stack.push_back({in, 0});
    } else {
      topo.push_back(f.node);
      stack.pop_back();
    }
  }

  loss.node()->ensure_grad();
  loss.node()->grad[0] += 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    TensorNode* n = *it;
    if (n->backprop) {
      n->ensure_grad();
      for (auto& in : n->inputs) in->ensure_grad();
      n->backprop();
    }
  }
}

}  // namespace autr
