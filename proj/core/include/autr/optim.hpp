#pragma once

#include <map>
#include <string>
#include <vector>

#include "autr/params.hpp"

namespace autr {

/// AdamW with decoupled weight decay. Grads are consumed (zeroed) by step().
class AdamW {
 public:
  struct Options {
    double lr = 1e-4;
    double weight_decay = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  explicit AdamW(Options opts) : opts_(opts) {}

  /// One update over every parameter in the store. Every parameter must have
  /// a populated grad; a missing grad names the offending parameter.
  void step(ParamStore& params);

  Options& options() { return opts_; }
  const Options& options() const { return opts_; }

 private:
  struct State {
    std::vector<double> m, v;
    int64_t t = 0;
  };
  Options opts_;
  std::map<std::string, State> state_;
};

}  // namespace autr
