#include "autr/optim.hpp"

#include <cmath>

namespace autr {

void AdamW::step(ParamStore& params) {
  for (auto& [name, p] : params.all()) {
    if (!p.has_grad()) {
      throw ContractError("optimizer step: parameter '" + name +
                          "' has no gradient");
    }
    State& s = state_[name];
    const size_t n = p.data().size();
    if (s.m.size() != n) {
      s.m.assign(n, 0.0);
      s.v.assign(n, 0.0);
      s.t = 0;
    }
    ++s.t;
    const double bc1 = 1.0 - std::pow(opts_.beta1, s.t);
    const double bc2 = 1.0 - std::pow(opts_.beta2, s.t);
    auto& w = p.data();
    auto& g = p.grad();
    for (size_t i = 0; i < n; ++i) {
      s.m[i] = opts_.beta1 * s.m[i] + (1.0 - opts_.beta1) * g[i];
      s.v[i] = opts_.beta2 * s.v[i] + (1.0 - opts_.beta2) * g[i] * g[i];
      const double mhat = s.m[i] / bc1;
      const double vhat = s.v[i] / bc2;
      // Decoupled decay applies to the weight, not the gradient.
      w[i] -= opts_.lr * (mhat / (std::sqrt(vhat) + opts_.eps) +
                          opts_.weight_decay * w[i]);
    }
    p.zero_grad();
  }
}

}  // namespace autr
