#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>

#include "autr/tensor.hpp"

namespace autr {

/// Deterministic normal/uniform draws on top of mt19937_64. One instance is
/// threaded through model construction so parameter layout order fixes the
/// stream.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  double uniform(double lo, double hi) {
    // 53-bit mantissa draw; avoids distribution implementation differences.
    const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
  }

  double normal(double mean, double stddev) {
    if (have_spare_) {
      have_spare_ = false;
      return mean + stddev * spare_;
    }
    double u1, u2;
    do {
      u1 = uniform(0.0, 1.0);
    } while (u1 <= 1e-300);
    u2 = uniform(0.0, 1.0);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586477 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return mean + stddev * r * std::cos(a);
  }

  uint64_t next_u64() { return gen_(); }
  int64_t uniform_int(int64_t lo, int64_t hi_inclusive) {
    const uint64_t span = static_cast<uint64_t>(hi_inclusive - lo + 1);
    return lo + static_cast<int64_t>(gen_() % span);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// Named trainable tensors, ordered by name. Names are dotted paths, unique
/// within a model.
class ParamStore {
 public:
  /// Registers a parameter filled by Xavier-style normal init
  /// (stddev sqrt(2 / (fan_in + fan_out))).
  Tensor create_xavier(const std::string& name, Shape shape, int64_t fan_in,
                       int64_t fan_out, Rng& rng);
  /// Registers a parameter filled with a constant.
  Tensor create_const(const std::string& name, Shape shape, double value);
  /// Registers a parameter with small-scale normal init (stddev given).
  Tensor create_normal(const std::string& name, Shape shape, double stddev,
                       Rng& rng);

  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const {
    return params_.count(name) != 0;
  }
  size_t size() const { return params_.size(); }

  std::map<std::string, Tensor>& all() { return params_; }
  const std::map<std::string, Tensor>& all() const { return params_; }

  void zero_grads();

 private:
  Tensor& insert(const std::string& name, Tensor t);
  std::map<std::string, Tensor> params_;
};

}  // namespace autr
