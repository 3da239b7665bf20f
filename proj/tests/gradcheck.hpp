#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "autr/ops.hpp"
#include "autr/params.hpp"

namespace autr::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "<tensor index>[<flat index>]"
};

/// Central-finite-difference check of d(loss)/d(inputs). `f` must rebuild the
/// graph from the current input values and return a scalar loss tensor.
/// Relative error uses max(|analytic|, |numeric|, 1e-8) as the denominator.
inline GradCheckResult grad_check(
    const std::function<Tensor(const std::vector<Tensor>&)>& f,
    std::vector<Tensor> inputs, double eps = 1e-5) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Tensor loss = f(inputs);
  backward(loss);

  GradCheckResult res;
  for (size_t ti = 0; ti < inputs.size(); ++ti) {
    Tensor& t = inputs[ti];
    for (int64_t i = 0; i < t.numel(); ++i) {
      const double orig = t.data()[i];
      t.data()[i] = orig + eps;
      const double up = f(inputs).value();
      t.data()[i] = orig - eps;
      const double dn = f(inputs).value();
      t.data()[i] = orig;
      const double numeric = (up - dn) / (2.0 * eps);
      const double analytic = t.has_grad() ? t.grad()[i] : 0.0;
      const double denom =
          std::max({std::fabs(numeric), std::fabs(analytic), 1e-8});
      const double rel = std::fabs(numeric - analytic) / denom;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst = std::to_string(ti) + "[" + std::to_string(i) + "]";
      }
    }
  }
  return res;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace autr::testing
