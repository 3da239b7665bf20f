#include "autr/params.hpp"

#include <cmath>

namespace autr {

Tensor& ParamStore::insert(const std::string& name, Tensor t) {
  if (name.empty()) throw ContractError("parameter name is empty");
  auto [it, ok] = params_.emplace(name, std::move(t));
  if (!ok) throw ContractError("duplicate parameter name: " + name);
  it->second.set_requires_grad(true);
  return it->second;
}

Tensor ParamStore::create_xavier(const std::string& name, Shape shape,
                                 int64_t fan_in, int64_t fan_out, Rng& rng) {
  Tensor t = Tensor::zeros(shape);
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.data()) v = rng.normal(0.0, stddev);
  return insert(name, std::move(t));
}

Tensor ParamStore::create_const(const std::string& name, Shape shape,
                                double value) {
  return insert(name, Tensor::full(std::move(shape), value));
}

Tensor ParamStore::create_normal(const std::string& name, Shape shape,
                                 double stddev, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data()) v = rng.normal(0.0, stddev);
  return insert(name, std::move(t));
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end())
    throw ContractError("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end())
    throw ContractError("unknown parameter: " + name);
  return it->second;
}

void ParamStore::zero_grads() {
  for (auto& [name, t] : params_) t.zero_grad();
}

}  // namespace autr
