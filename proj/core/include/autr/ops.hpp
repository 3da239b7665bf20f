#pragma once

#include "autr/tensor.hpp"

namespace autr {

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double s);
Tensor add_scalar(const Tensor& x, double s);
Tensor exp(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// log(sigmoid(x)), computed as -softplus(-x); stable for saturating logits.
Tensor logsigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor gelu(const Tensor& x);  // exact erf form

/// a + b where b's shape is a suffix of a's shape; b is broadcast over the
/// leading dimensions. Covers bias add ([.., C] + [C]), positional add
/// ([T, L, C] + [L, C]) and the like.
Tensor add_broadcast(const Tensor& a, const Tensor& b);

// ---- shape ----
Tensor reshape(const Tensor& x, Shape new_shape);
Tensor permute(const Tensor& x, const std::vector<int64_t>& perm);
Tensor concat(const std::vector<Tensor>& parts, int64_t axis);
Tensor slice(const Tensor& x, int64_t axis, int64_t start, int64_t length);
/// [A, C] -> [A, N, C], repeating each row N times along a new middle axis.
Tensor repeat_middle(const Tensor& x, int64_t n);

// ---- reductions ----
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mean_last(const Tensor& x);  // mean over the last axis

// ---- linear algebra ----
/// Batched matrix product [.., M, K] x [.., K, N] -> [.., M, N]. Leading
/// batch dims must match, or either side may be 2-D (broadcast).
Tensor matmul(const Tensor& a, const Tensor& b);
/// x [.., D_in] * w [D_in, D_out] + b [D_out].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor softmax(const Tensor& x, int64_t axis);
/// Normalizes over the last axis; gamma/beta shaped [C].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

// ---- spatial ----
/// x [B, C_in, H, W], weight [C_out, C_in], bias [C_out].
Tensor conv2d_1x1(const Tensor& x, const Tensor& weight, const Tensor& bias);
/// x [B, C_in, H, W], weight [C_out, C_in, 3, 3], bias [C_out], padding 1.
Tensor conv2d_3x3(const Tensor& x, const Tensor& weight, const Tensor& bias,
                  int64_t stride = 1);
/// [.., H, W] -> [.., out_h, out_w], align-corners-false.
Tensor bilinear_resize(const Tensor& x, int64_t out_h, int64_t out_w);
/// 2x2 max pool, stride 2; H and W must be even.
Tensor maxpool2d(const Tensor& x);

/// Non-differentiable nearest-neighbor resample of the last two axes.
Tensor nearest_resize(const Tensor& x, int64_t out_h, int64_t out_w);

/// Caps the GEMM thread pool; call once per process. No-op without OpenMP.
void set_compute_threads(int n);

/// Disables graph recording inside its scope (inference-only forward passes).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grads_enabled();

}  // namespace autr
