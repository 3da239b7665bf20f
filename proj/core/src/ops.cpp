#include "autr/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <thread>
#include <utility>

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace autr {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<RowMat>;
using MapC = Eigen::Map<const RowMat>;

// Attach graph edges and the backward closure to an op result.
void wire(Tensor& out, const std::vector<Tensor>& ins,
          std::function<void()> bp) {
  out.set_requires_grad(true);
  auto& node = out.node();
  node->inputs.reserve(ins.size());
  for (const auto& t : ins) node->inputs.push_back(t.node());
  node->backprop = std::move(bp);
}

thread_local bool g_grads_enabled = true;

bool any_grad(const Tensor& a) { return g_grads_enabled && a.requires_grad(); }
bool any_grad(const Tensor& a, const Tensor& b) {
  return g_grads_enabled && (a.requires_grad() || b.requires_grad());
}
bool any_grad(const Tensor& a, const Tensor& b, const Tensor& c) {
  return g_grads_enabled &&
         (a.requires_grad() || b.requires_grad() || c.requires_grad());
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()) + " differ");
  }
}

Tensor binary_ew(const char* name, const Tensor& a, const Tensor& b,
                 double (*f)(double, double), double (*dfa)(double, double),
                 double (*dfb)(double, double)) {
  check_same_shape(name, a, b);
  const int64_t n = a.numel();
  std::vector<double> out(static_cast<size_t>(n));
  const auto& ad = a.data();
  const auto& bd = b.data();
  for (int64_t i = 0; i < n; ++i) out[i] = f(ad[i], bd[i]);
  Tensor y = Tensor::from_data(a.shape(), std::move(out));
  if (any_grad(a, b)) {
    auto* an = a.node().get();
    auto* bn = b.node().get();
    auto* yn = y.node().get();
    wire(y, {a, b}, [an, bn, yn, dfa, dfb, n]() {
      if (an->requires_grad)
        for (int64_t i = 0; i < n; ++i)
          an->grad[i] += yn->grad[i] * dfa(an->data[i], bn->data[i]);
      if (bn->requires_grad)
        for (int64_t i = 0; i < n; ++i)
          bn->grad[i] += yn->grad[i] * dfb(an->data[i], bn->data[i]);
    });
  }
  return y;
}

// df receives (x, y) so ops can reuse the forward value.
Tensor unary_ew(const Tensor& x, double (*f)(double),
                double (*df)(double, double)) {
  const int64_t n = x.numel();
  std::vector<double> out(static_cast<size_t>(n));
  const auto& xd = x.data();
  for (int64_t i = 0; i < n; ++i) out[i] = f(xd[i]);
  Tensor y = Tensor::from_data(x.shape(), std::move(out));
  if (any_grad(x)) {
    auto* xn = x.node().get();
    auto* yn = y.node().get();
    wire(y, {x}, [xn, yn, df, n]() {
      for (int64_t i = 0; i < n; ++i)
        xn->grad[i] += yn->grad[i] * df(xn->data[i], yn->data[i]);
    });
  }
  return y;
}

double sigmoid_scalar(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

double logsigmoid_scalar(double x) {
  // -softplus(-x)
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

}  // namespace

void set_compute_threads(int n) {
  // Oversubscribing physical cores makes Eigen's parallel GEMM spin-wait;
  // clamp to what the machine actually has.
  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw > 0 && n > hw) n = hw;
  Eigen::setNbThreads(n);
#ifdef __GLIBC__
  // Large activation/grad buffers churn through mmap otherwise, and the
  // page-fault cost dominates training steps.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

NoGradGuard::NoGradGuard() : prev_(g_grads_enabled) {
  g_grads_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grads_enabled = prev_; }

bool grads_enabled() { return g_grads_enabled; }

// ------------------------- elementwise -------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_ew(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_ew(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_ew(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_ew(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor scale(const Tensor& x, double s) {
  const int64_t n = x.numel();
  std::vector<double> out(static_cast<size_t>(n));
  const auto& xd = x.data();
  for (int64_t i = 0; i < n; ++i) out[i] = xd[i] * s;
  Tensor y = Tensor::from_data(x.shape(), std::move(out));
  if (any_grad(x)) {
    auto* xn = x.node().get();
    auto* yn = y.node().get();
    wire(y, {x}, [xn, yn, s, n]() {
      for (int64_t i = 0; i < n; ++i) xn->grad[i] += yn->grad[i] * s;
    });
  }
  return y;
}

Tensor add_scalar(const Tensor& x, double s) {
  const int64_t n = x.numel();
  std::vector<double> out(static_cast<size_t>(n));
  const auto& xd = x.data();
  for (int64_t i = 0; i < n; ++i) out[i] = xd[i] + s;
  Tensor y = Tensor::from_data(x.shape(), std::move(out));
  if (any_grad(x)) {
    auto* xn = x.node().get();
    auto* yn = y.node().get();
    wire(y, {x}, [xn, yn, n]() {
      for (int64_t i = 0; i < n; ++i) xn->grad[i] += yn->grad[i];
    });
  }
  return y;
}

Tensor exp(const Tensor& x) {
  return unary_ew(
      x, [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_ew(x, sigmoid_scalar,
                  [](double, double y) { return y * (1.0 - y); });
}

Tensor logsigmoid(const Tensor& x) {
  return unary_ew(x, logsigmoid_scalar,
                  [](double v, double) { return sigmoid_scalar(-v); });
}

Tensor relu(const Tensor& x) {
  return unary_ew(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& x) {
  return unary_ew(
      x,
      [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
      [](double v, double) {
        return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) +
               v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
      });
}

Tensor add_broadcast(const Tensor& a, const Tensor& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (bs.size() > as.size() ||
      !std::equal(bs.rbegin(), bs.rend(), as.rbegin())) {
    throw ShapeError("add_broadcast: " + shape_str(bs) +
                     " is not a suffix of " + shape_str(as));
  }
  const int64_t n = a.numel();
  const int64_t m = b.numel();
  std::vector<double> out(static_cast<size_t>(n));
  const auto& ad = a.data();
  const auto& bd = b.data();
  for (int64_t i = 0; i < n; ++i) out[i] = ad[i] + bd[i % m];
  Tensor y = Tensor::from_data(as, std::move(out));
  if (any_grad(a, b)) {
    auto* an = a.node().get();
    auto* bn = b.node().get();
    auto* yn = y.node().get();
    wire(y, {a, b}, [an, bn, yn, n, m]() {
      if (an->requires_grad)
        for (int64_t i = 0; i < n; ++i) an->grad[i] += yn->grad[i];
      if (bn->requires_grad)
        for (int64_t i = 0; i < n; ++i) bn->grad[i % m] += yn->grad[i];
    });
  }
  return y;
}

// ------------------------- shape -------------------------

Tensor reshape(const Tensor& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_str(x.shape()) + " to " +
                     shape_str(new_shape) + " changes element count");
  }
  Tensor y = Tensor::from_data(std::move(new_shape), x.data());
  if (any_grad(x)) {
    auto* xn = x.node().get();
    auto* yn = y.node().get();
    const int64_t n = x.numel();
    wire(y, {x}, [xn, yn, n]() {
      for (int64_t i = 0; i < n; ++i) xn->grad[i] += yn->grad[i];
    });
  }
  return y;
}

namespace {

std::vector<int64_t> row_major_strides(const Shape& s) {
  std::vector<int64_t> st(s.size());
  int64_t acc = 1;
  for (size_t i = s.size(); i-- > 0;) {
    st[i] = acc;
    acc *= s[i];
  }
  return st;
}

// Flat index map out -> in for a permutation.
std::vector<int64_t> permute_map(const Shape& in_shape,
                                 const std::vector<int64_t>& perm) {
  const size_t nd = in_shape.size();
  Shape out_shape(nd);
  for (size_t i = 0; i < nd; ++i) out_shape[i] = in_shape[perm[i]];
  auto in_strides = row_major_strides(in_shape);
  const int64_t n = shape_numel(in_shape);
  std::vector<int64_t> map(static_cast<size_t>(n));
  std::vector<int64_t> idx(nd, 0);
  for (int64_t o = 0; o < n; ++o) {
    int64_t src = 0;
    for (size_t i = 0; i < nd; ++i) src += idx[i] * in_strides[perm[i]];
    map[o] = src;
    for (size_t i = nd; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  return map;
}

}  // namespace

Tensor permute(const Tensor& x, const std::vector<int64_t>& perm) {
  const Shape& s = x.shape();
  if (perm.size() != s.size()) {
    throw ShapeError("permute: " + std::to_string(perm.size()) +
                     " axes for shape " + shape_str(s));
  }
  Shape out_shape(s.size());
  for (size_t i = 0; i < s.size(); ++i) out_shape[i] = s[perm[i]];
  auto map = permute_map(s, perm);
  const int64_t n = x.numel();
  std::vector<double> out(static_cast<size_t>(n));
  const auto& xd = x.data();
  for (int64_t o = 0; o < n; ++o) out[o] = xd[map[o]];
  Tensor y = Tensor::from_data(std::move(out_shape), std::move(out));
  if (any_grad(x)) {
    auto* xn = x.node().get();
    auto* yn = y.node().get();
    wire(y, {x}, [xn, yn, map = std::move(map), n]() {
      for (int64_t o = 0; o < n; ++o) xn->grad[map[o]] += yn->grad[o];
    });
  }
  return y;
}

Tensor concat(const std::vector<Tensor>& parts, int64_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const Shape& s0 = parts[0].shape();
  const int64_t nd = static_cast<int64_t>(s0.size());
  if (axis < 0) axis += nd;
  if (axis < 0 || axis >= nd)
    throw ShapeError("concat: bad axis for " + shape_str(s0));
  int64_t axis_total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (static_cast<int64_t>(s.size()) != nd)
      throw ShapeError("concat: rank mismatch " + shape_str(s0) + " vs " +
                       shape_str(s));
    for (int64_t i = 0; i < nd; ++i) {
      if (i != axis && s[i] != s0[i])
        throw ShapeError("concat: shapes " + shape_str(s0) + " and " +
                         shape_str(s) + " differ off-axis");
    }
    axis_total += s[axis];
  }
  Shape out_shape = s0;
  out_shape[axis] = axis_total;
  int64_t outer = 1, inner = 1;
  for (int64_t i = 0; i < axis; ++i) outer *= s0[i];
  for (int64_t i = axis + 1; i < nd; ++i) inner *= s0[i];

  std::vector<double> out(static_cast<size_t>(outer * axis_total * inner));
  std::vector<int64_t> offsets;  // start of each part along the axis
  {
    int64_t off = 0;
    for (const auto& p : parts) {
      offsets.push_back(off);
      const int64_t len = p.shape()[axis];
      const auto& pd = p.data();
      for (int64_t o = 0; o < outer; ++o) {
        std::copy(pd.begin() + o * len * inner,
                  pd.begin() + (o + 1) * len * inner,
                  out.begin() + (o * axis_total + off) * inner);
      }
      off += len;
    }
  }
  Tensor y = Tensor::from_data(std::move(out_shape), std::move(out));
  bool grad = false;
  for (const auto& p : parts) grad = grad || p.requires_grad();
  if (grad && grads_enabled()) {
    std::vector<TensorNode*> pn;
    for (const auto& p : parts) pn.push_back(p.node().get());
    auto* yn = y.node().get();
    wire(y, parts, [pn, yn, offsets, outer, inner, axis_total]() {
      for (size_t k = 0; k < pn.size(); ++k) {
        if (!pn[k]->requires_grad) continue;
        const int64_t len = pn[k]->numel() / (outer * inner);
        for (int64_t o = 0; o < outer; ++o)
          for (int64_t j = 0; j < len * inner; ++j)
            pn[k]->grad[o * len * inner + j] +=
                yn->grad[(o * axis_total + offsets[k]) * inner + j];
      }
    });
  }
  return y;
}

Tensor slice(const Tensor& x, int64_t axis, int64_t start, int64_t length) {
  const Shape& s = x.shape();
  const int64_t nd = static_cast<int64_t>(s.size());
  if (axis < 0) axis += nd;
  if (axis < 0 || axis >= nd || start < 0 || length <= 0 ||
      start + length > s[axis]) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") on axis " +
                     std::to_string(axis) + " of " + shape_str(s));
  }
  int64_t outer = 1, inner = 1;
  for (int64_t i = 0; i < axis; ++i) outer *= s[i];
  for (int64_t i = axis + 1; i < nd; ++i) inner *= s[i];
  const int64_t full = s[axis];
  Shape out_shape = s;
  out_shape[axis] = length;
  std::vector<double> out(static_cast<size_t>(outer * length * inner));
  const auto& xd = x.data();
  for (int64_t o = 0; o < outer; ++o)
    std::copy(xd.begin() + (o * full + start) * inner,
              xd.begin() + (o * full + start + length) * inner,
              out.begin() + o * length * inner);
  Tensor y = Tensor::from_data(std::move(out_shape), std::move(out));
  if (any_grad(x)) {
    auto* xn = x.node().get();
    auto* yn = y.node().get();
    wire(y, {x}, [xn, yn, outer, inner, full, start, length]() {
      for (int64_t o = 0; o < outer; ++o)
        for (int64_t j = 0; j < length * inner; ++j)
          xn->grad[(o * full + start) * inner + j] +=
              yn->grad[o * length * inner + j];
    });
  }
  return y;
}

Tensor repeat_middle(const Tensor& x, int64_t n) {
  if (x.dim() != 2) {
    throw ShapeError("repeat_middle: expected 2-D input, got " +
                     shape_str(x.shape()));
  }
  const int64_t a = x.size(0), c = x.size(1);
  std::vector<double> out(static_cast<size_t>(a * n * c));
  const auto& xd = x.data();
  for (int64_t i = 0; i < a; ++i)
    for (int64_t k = 0; k < n; ++k)
      std::copy(xd.begin() + i * c, xd.begin() + (i + 1) * c,
                out.begin() + (i * n + k) * c);
  Tensor y = Tensor::from_data({a, n, c}, std::move(out));
  if (any_grad(x)) {
    auto* xn = x.node().get();
    auto* yn = y.node().get();
    wire(y, {x}, [xn, yn, a, n, c]() {
      for (int64_t i = 0; i < a; ++i)
        for (int64_t k = 0; k < n; ++k)
          for (int64_t j = 0; j < c; ++j)
            xn->grad[i * c + j] += yn->grad[(i * n + k) * c + j];
    });
  }
  return y;
}

// ------------------------- reductions -------------------------

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor y = Tensor::scalar(acc);
  if (any_grad(x)) {
    auto* xn = x.node().get();
    auto* yn = y.node().get();
    const int64_t n = x.numel();
    wire(y, {x}, [xn, yn, n]() {
      const double g = yn->grad[0];
      for (int64_t i = 0; i < n; ++i) xn->grad[i] += g;
    });
  }
  return y;
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / x.numel()); }

Tensor mean_last(const Tensor& x) {
  if (x.dim() < 2) {
    throw ShapeError("mean_last: need at least 2 dims, got " +
                     shape_str(x.shape()));
  }
  const int64_t L = x.size(-1);
  const int64_t outer = x.numel() / L;
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  std::vector<double> out(static_cast<size_t>(outer), 0.0);
  const auto& xd = x.data();
  for (int64_t o = 0; o < outer; ++o) {
    double acc = 0.0;
    for (int64_t j = 0; j < L; ++j) acc += xd[o * L + j];
    out[o] = acc / L;
  }
  Tensor y = Tensor::from_data(std::move(out_shape), std::move(out));
  if (any_grad(x)) {
    auto* xn = x.node().get();
    auto* yn = y.node().get();
    wire(y, {x}, [xn, yn, outer, L]() {
      for (int64_t o = 0; o < outer; ++o) {
        const double g = yn->grad[o] / L;
        for (int64_t j = 0; j < L; ++j) xn->grad[o * L + j] += g;
      }
    });
  }
  return y;
}

// ------------------------- linear algebra -------------------------

namespace {

struct MatmulPlan {
  int64_t batches, M, K, N;
  bool a_batched, b_batched;
};

MatmulPlan matmul_plan(const Shape& as, const Shape& bs) {
  if (as.size() < 2 || bs.size() < 2) {
    throw ShapeError("matmul: shapes " + shape_str(as) + " x " +
                     shape_str(bs) + " need at least 2 dims");
  }
  MatmulPlan p;
  p.M = as[as.size() - 2];
  p.K = as[as.size() - 1];
  const int64_t bk = bs[bs.size() - 2];
  p.N = bs[bs.size() - 1];
  if (p.K != bk) {
    throw ShapeError("matmul: inner dims of " + shape_str(as) + " and " +
                     shape_str(bs) + " disagree");
  }
  Shape abatch(as.begin(), as.end() - 2);
  Shape bbatch(bs.begin(), bs.end() - 2);
  p.a_batched = !abatch.empty();
  p.b_batched = !bbatch.empty();
  if (p.a_batched && p.b_batched && abatch != bbatch) {
    throw ShapeError("matmul: batch dims of " + shape_str(as) + " and " +
                     shape_str(bs) + " disagree");
  }
  p.batches = p.a_batched ? shape_numel(abatch)
                          : (p.b_batched ? shape_numel(bbatch) : 1);
  return p;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const MatmulPlan p = matmul_plan(a.shape(), b.shape());
  const Shape& batched_shape = p.a_batched ? a.shape() : b.shape();
  Shape out_shape(batched_shape.begin(), batched_shape.end() - 2);
  out_shape.push_back(p.M);
  out_shape.push_back(p.N);

  std::vector<double> out(static_cast<size_t>(p.batches * p.M * p.N));
  const double* ad = a.data().data();
  const double* bd = b.data().data();
  for (int64_t i = 0; i < p.batches; ++i) {
    MapC A(ad + (p.a_batched ? i * p.M * p.K : 0), p.M, p.K);
    MapC B(bd + (p.b_batched ? i * p.K * p.N : 0), p.K, p.N);
    MapM C(out.data() + i * p.M * p.N, p.M, p.N);
    C.noalias() = A * B;
  }
  Tensor y = Tensor::from_data(std::move(out_shape), std::move(out));
  if (any_grad(a, b)) {
    auto* an = a.node().get();
    auto* bn = b.node().get();
    auto* yn = y.node().get();
    wire(y, {a, b}, [an, bn, yn, p]() {
      for (int64_t i = 0; i < p.batches; ++i) {
        MapC G(yn->grad.data() + i * p.M * p.N, p.M, p.N);
        if (an->requires_grad) {
          MapC B(bn->data.data() + (p.b_batched ? i * p.K * p.N : 0), p.K,
                 p.N);
          MapM dA(an->grad.data() + (p.a_batched ? i * p.M * p.K : 0), p.M,
                  p.K);
          dA.noalias() += G * B.transpose();
        }
        if (bn->requires_grad) {
          MapC A(an->data.data() + (p.a_batched ? i * p.M * p.K : 0), p.M,
                 p.K);
          MapM dB(bn->grad.data() + (p.b_batched ? i * p.K * p.N : 0), p.K,
                  p.N);
          dB.noalias() += A.transpose() * G;
        }
      }
    });
  }
  return y;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  const int64_t d_in = x.size(-1);
  if (w.dim() != 2 || w.size(0) != d_in) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " vs weight " +
                     shape_str(w.shape()));
  }
  Tensor flat = reshape(x, {x.numel() / d_in, d_in});
  Tensor y = add_broadcast(matmul(flat, w), b);
  Shape out_shape = x.shape();
  out_shape.back() = w.size(1);
  return reshape(y, std::move(out_shape));
}

Tensor softmax(const Tensor& x, int64_t axis) {
  const Shape& s = x.shape();
  const int64_t nd = static_cast<int64_t>(s.size());
  if (axis < 0) axis += nd;
  if (axis < 0 || axis >= nd)
    throw ShapeError("softmax: bad axis for " + shape_str(s));
  int64_t outer = 1, inner = 1;
  const int64_t L = s[axis];
  for (int64_t i = 0; i < axis; ++i) outer *= s[i];
  for (int64_t i = axis + 1; i < nd; ++i) inner *= s[i];

  std::vector<double> out(static_cast<size_t>(x.numel()));
  const auto& xd = x.data();
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * L * inner + in;
      double mx = xd[base];
      for (int64_t j = 1; j < L; ++j)
        mx = std::max(mx, xd[base + j * inner]);
      double z = 0.0;
      for (int64_t j = 0; j < L; ++j) {
        const double e = std::exp(xd[base + j * inner] - mx);
        out[base + j * inner] = e;
        z += e;
      }
      for (int64_t j = 0; j < L; ++j) out[base + j * inner] /= z;
    }
  }
  Tensor y = Tensor::from_data(s, std::move(out));
  if (any_grad(x)) {
    auto* xn = x.node().get();
    auto* yn = y.node().get();
    wire(y, {x}, [xn, yn, outer, inner, L]() {
      for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
          const int64_t base = o * L * inner + in;
          double dot = 0.0;
          for (int64_t j = 0; j < L; ++j)
            dot += yn->grad[base + j * inner] * yn->data[base + j * inner];
          for (int64_t j = 0; j < L; ++j)
            xn->grad[base + j * inner] +=
                yn->data[base + j * inner] *
                (yn->grad[base + j * inner] - dot);
        }
      }
    });
  }
  return y;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  const int64_t C = x.size(-1);
  if (gamma.numel() != C || beta.numel() != C) {
    throw ShapeError("layer_norm: feature dim " + std::to_string(C) +
                     " vs gamma " + shape_str(gamma.shape()) + ", beta " +
                     shape_str(beta.shape()));
  }
  const int64_t lanes = x.numel() / C;
  std::vector<double> out(static_cast<size_t>(x.numel()));
  std::vector<double> istds(static_cast<size_t>(lanes));
  std::vector<double> mus(static_cast<size_t>(lanes));
  const auto& xd = x.data();
  const auto& gd = gamma.data();
  const auto& bd = beta.data();
  for (int64_t l = 0; l < lanes; ++l) {
    const int64_t base = l * C;
    double mu = 0.0;
    for (int64_t j = 0; j < C; ++j) mu += xd[base + j];
    mu /= C;
    double var = 0.0;
    for (int64_t j = 0; j < C; ++j) {
      const double d = xd[base + j] - mu;
      var += d * d;
    }
    var /= C;
    const double istd = 1.0 / std::sqrt(var + eps);
    mus[l] = mu;
    istds[l] = istd;
    for (int64_t j = 0; j < C; ++j)
      out[base + j] = (xd[base + j] - mu) * istd * gd[j] + bd[j];
  }
  Tensor y = Tensor::from_data(x.shape(), std::move(out));
  if (any_grad(x, gamma, beta)) {
    auto* xn = x.node().get();
    auto* gn = gamma.node().get();
    auto* bn = beta.node().get();
    auto* yn = y.node().get();
    wire(y, {x, gamma, beta},
         [xn, gn, bn, yn, lanes, C, mus = std::move(mus),
          istds = std::move(istds)]() {
           for (int64_t l = 0; l < lanes; ++l) {
             const int64_t base = l * C;
             const double mu = mus[l], istd = istds[l];
             double sum_dxh = 0.0, sum_dxh_xh = 0.0;
             for (int64_t j = 0; j < C; ++j) {
               const double xh = (xn->data[base + j] - mu) * istd;
               const double dxh = yn->grad[base + j] * gn->data[j];
               sum_dxh += dxh;
               sum_dxh_xh += dxh * xh;
               if (gn->requires_grad) gn->grad[j] += yn->grad[base + j] * xh;
               if (bn->requires_grad) bn->grad[j] += yn->grad[base + j];
             }
             if (xn->requires_grad) {
               for (int64_t j = 0; j < C; ++j) {
                 const double xh = (xn->data[base + j] - mu) * istd;
                 const double dxh = yn->grad[base + j] * gn->data[j];
                 xn->grad[base + j] +=
                     istd * (dxh - sum_dxh / C - xh * sum_dxh_xh / C);
               }
             }
           }
         });
  }
  return y;
}

// ------------------------- spatial -------------------------

Tensor conv2d_1x1(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  const bool unbatched = x.dim() == 3;
  Tensor x4 = unbatched
                  ? reshape(x, {1, x.size(0), x.size(1), x.size(2)})
                  : x;
  if (x4.dim() != 4) {
    throw ShapeError("conv2d_1x1: expected [B, C, H, W] input, got " +
                     shape_str(x.shape()));
  }
  const int64_t B = x4.size(0), Cin = x4.size(1), H = x4.size(2),
                W = x4.size(3);
  if (weight.dim() != 2 || weight.size(1) != Cin) {
    throw ShapeError("conv2d_1x1: input channels " + shape_str(x.shape()) +
                     " vs weight " + shape_str(weight.shape()));
  }
  const int64_t Cout = weight.size(0);
  if (bias.numel() != Cout) {
    throw ShapeError("conv2d_1x1: weight " + shape_str(weight.shape()) +
                     " vs bias " + shape_str(bias.shape()));
  }
  // Per-pixel linear map: [Cout, Cin] x [B, Cin, HW].
  Tensor flat = reshape(x4, {B, Cin, H * W});
  Tensor y = matmul(weight, flat);  // [B, Cout, HW]

  // Channel bias, broadcast over batch and pixels.
  {
    const int64_t n = y.numel();
    std::vector<double> out(static_cast<size_t>(n));
    const auto& yd = y.data();
    const auto& bd = bias.data();
    const int64_t S = H * W;
    for (int64_t i = 0; i < n; ++i) out[i] = yd[i] + bd[(i / S) % Cout];
    Tensor z = Tensor::from_data(y.shape(), std::move(out));
    if (any_grad(y, bias)) {
      auto* yn = y.node().get();
      auto* bn = bias.node().get();
      auto* zn = z.node().get();
      wire(z, {y, bias}, [yn, bn, zn, n, S, Cout]() {
        if (yn->requires_grad)
          for (int64_t i = 0; i < n; ++i) yn->grad[i] += zn->grad[i];
        if (bn->requires_grad)
          for (int64_t i = 0; i < n; ++i)
            bn->grad[(i / S) % Cout] += zn->grad[i];
      });
    }
    y = z;
  }
  y = reshape(y, {B, Cout, H, W});
  if (unbatched) y = reshape(y, {Cout, H, W});
  return y;
}

Tensor conv2d_3x3(const Tensor& x, const Tensor& weight, const Tensor& bias,
                  int64_t stride) {
  if (x.dim() != 4) {
    throw ShapeError("conv2d_3x3: expected [B, C, H, W] input, got " +
                     shape_str(x.shape()));
  }
  const int64_t B = x.size(0), Cin = x.size(1), H = x.size(2), W = x.size(3);
  if (weight.dim() != 4 || weight.size(1) != Cin || weight.size(2) != 3 ||
      weight.size(3) != 3) {
    throw ShapeError("conv2d_3x3: input " + shape_str(x.shape()) +
                     " vs weight " + shape_str(weight.shape()));
  }
  const int64_t Cout = weight.size(0);
  if (bias.numel() != Cout) {
    throw ShapeError("conv2d_3x3: weight " + shape_str(weight.shape()) +
                     " vs bias " + shape_str(bias.shape()));
  }
  const int64_t Ho = (H - 1) / stride + 1;
  const int64_t Wo = (W - 1) / stride + 1;

  std::vector<double> out(static_cast<size_t>(B * Cout * Ho * Wo));
  const auto& xd = x.data();
  const auto& wd = weight.data();
  const auto& bd = bias.data();
  for (int64_t b = 0; b < B; ++b) {
    for (int64_t co = 0; co < Cout; ++co) {
      for (int64_t oh = 0; oh < Ho; ++oh) {
        for (int64_t ow = 0; ow < Wo; ++ow) {
          double acc = bd[co];
          for (int64_t ci = 0; ci < Cin; ++ci) {
            for (int64_t kh = 0; kh < 3; ++kh) {
              const int64_t ih = oh * stride + kh - 1;
              if (ih < 0 || ih >= H) continue;
              for (int64_t kw = 0; kw < 3; ++kw) {
                const int64_t iw = ow * stride + kw - 1;
                if (iw < 0 || iw >= W) continue;
                acc += xd[((b * Cin + ci) * H + ih) * W + iw] *
                       wd[((co * Cin + ci) * 3 + kh) * 3 + kw];
              }
            }
          }
          out[((b * Cout + co) * Ho + oh) * Wo + ow] = acc;
        }
      }
    }
  }
  Tensor y = Tensor::from_data({B, Cout, Ho, Wo}, std::move(out));
  if (any_grad(x, weight, bias)) {
    auto* xn = x.node().get();
    auto* wn = weight.node().get();
    auto* bn = bias.node().get();
    auto* yn = y.node().get();
    wire(y, {x, weight, bias},
         [xn, wn, bn, yn, B, Cin, Cout, H, W, Ho, Wo, stride]() {
           for (int64_t b = 0; b < B; ++b) {
             for (int64_t co = 0; co < Cout; ++co) {
               for (int64_t oh = 0; oh < Ho; ++oh) {
                 for (int64_t ow = 0; ow < Wo; ++ow) {
                   const double g =
                       yn->grad[((b * Cout + co) * Ho + oh) * Wo + ow];
                   if (g == 0.0) continue;
                   if (bn->requires_grad) bn->grad[co] += g;
                   for (int64_t ci = 0; ci < Cin; ++ci) {
                     for (int64_t kh = 0; kh < 3; ++kh) {
                       const int64_t ih = oh * stride + kh - 1;
                       if (ih < 0 || ih >= H) continue;
                       for (int64_t kw = 0; kw < 3; ++kw) {
                         const int64_t iw = ow * stride + kw - 1;
                         if (iw < 0 || iw >= W) continue;
                         const int64_t xi =
                             ((b * Cin + ci) * H + ih) * W + iw;
                         const int64_t wi =
                             ((co * Cin + ci) * 3 + kh) * 3 + kw;
                         if (xn->requires_grad)
                           xn->grad[xi] += g * wn->data[wi];
                         if (wn->requires_grad)
                           wn->grad[wi] += g * xn->data[xi];
                       }
                     }
                   }
                 }
               }
             }
           }
         });
  }
  return y;
}

namespace {

struct ResizeAxis {
  std::vector<int64_t> lo, hi;
  std::vector<double> w_hi;  // weight of the hi sample
};

ResizeAxis resize_axis(int64_t in, int64_t out) {
  ResizeAxis r;
  r.lo.resize(out);
  r.hi.resize(out);
  r.w_hi.resize(out);
  const double s = static_cast<double>(in) / out;
  for (int64_t o = 0; o < out; ++o) {
    double src = (o + 0.5) * s - 0.5;
    src = std::max(0.0, std::min(src, static_cast<double>(in - 1)));
    const int64_t lo = static_cast<int64_t>(std::floor(src));
    r.lo[o] = lo;
    r.hi[o] = std::min(lo + 1, in - 1);
    r.w_hi[o] = src - lo;
  }
  return r;
}

}  // namespace

Tensor bilinear_resize(const Tensor& x, int64_t out_h, int64_t out_w) {
  if (x.dim() < 2 || out_h <= 0 || out_w <= 0) {
    throw ShapeError("bilinear_resize: input " + shape_str(x.shape()) +
                     " to " + std::to_string(out_h) + "x" +
                     std::to_string(out_w));
  }
  const int64_t H = x.size(-2), W = x.size(-1);
  const int64_t lanes = x.numel() / (H * W);
  ResizeAxis ry = resize_axis(H, out_h);
  ResizeAxis rx = resize_axis(W, out_w);
  Shape out_shape = x.shape();
  out_shape[out_shape.size() - 2] = out_h;
  out_shape[out_shape.size() - 1] = out_w;
  std::vector<double> out(static_cast<size_t>(lanes * out_h * out_w));
  const auto& xd = x.data();
  for (int64_t l = 0; l < lanes; ++l) {
    const int64_t ib = l * H * W;
    const int64_t ob = l * out_h * out_w;
    for (int64_t oh = 0; oh < out_h; ++oh) {
      const double wy = ry.w_hi[oh];
      for (int64_t ow = 0; ow < out_w; ++ow) {
        const double wx = rx.w_hi[ow];
        out[ob + oh * out_w + ow] =
            (1 - wy) * (1 - wx) * xd[ib + ry.lo[oh] * W + rx.lo[ow]] +
            (1 - wy) * wx * xd[ib + ry.lo[oh] * W + rx.hi[ow]] +
            wy * (1 - wx) * xd[ib + ry.hi[oh] * W + rx.lo[ow]] +
            wy * wx * xd[ib + ry.hi[oh] * W + rx.hi[ow]];
      }
    }
  }
  Tensor y = Tensor::from_data(std::move(out_shape), std::move(out));
  if (any_grad(x)) {
    auto* xn = x.node().get();
    auto* yn = y.node().get();
    wire(y, {x},
         [xn, yn, lanes, H, W, out_h, out_w, ry = std::move(ry),
          rx = std::move(rx)]() {
           for (int64_t l = 0; l < lanes; ++l) {
             const int64_t ib = l * H * W;
             const int64_t ob = l * out_h * out_w;
             for (int64_t oh = 0; oh < out_h; ++oh) {
               const double wy = ry.w_hi[oh];
               for (int64_t ow = 0; ow < out_w; ++ow) {
                 const double wx = rx.w_hi[ow];
                 const double g = yn->grad[ob + oh * out_w + ow];
                 xn->grad[ib + ry.lo[oh] * W + rx.lo[ow]] +=
                     (1 - wy) * (1 - wx) * g;
                 xn->grad[ib + ry.lo[oh] * W + rx.hi[ow]] += (1 - wy) * wx * g;
                 xn->grad[ib + ry.hi[oh] * W + rx.lo[ow]] += wy * (1 - wx) * g;
                 xn->grad[ib + ry.hi[oh] * W + rx.hi[ow]] += wy * wx * g;
               }
             }
           }
         });
  }
  return y;
}

Tensor maxpool2d(const Tensor& x) {
  if (x.dim() < 2) {
    throw ShapeError("maxpool2d: input " + shape_str(x.shape()));
  }
  const int64_t H = x.size(-2), W = x.size(-1);
  if (H % 2 != 0 || W % 2 != 0) {
    throw ShapeError("maxpool2d: odd spatial size in " +
                     shape_str(x.shape()));
  }
  const int64_t Ho = H / 2, Wo = W / 2;
  const int64_t lanes = x.numel() / (H * W);
  Shape out_shape = x.shape();
  out_shape[out_shape.size() - 2] = Ho;
  out_shape[out_shape.size() - 1] = Wo;
  std::vector<double> out(static_cast<size_t>(lanes * Ho * Wo));
  std::vector<int64_t> arg(out.size());
  const auto& xd = x.data();
  for (int64_t l = 0; l < lanes; ++l) {
    for (int64_t oh = 0; oh < Ho; ++oh) {
      for (int64_t ow = 0; ow < Wo; ++ow) {
        int64_t best = l * H * W + (2 * oh) * W + 2 * ow;
        for (int64_t dh = 0; dh < 2; ++dh)
          for (int64_t dw = 0; dw < 2; ++dw) {
            const int64_t i = l * H * W + (2 * oh + dh) * W + 2 * ow + dw;
            if (xd[i] > xd[best]) best = i;
          }
        const int64_t o = l * Ho * Wo + oh * Wo + ow;
        out[o] = xd[best];
        arg[o] = best;
      }
    }
  }
  Tensor y = Tensor::from_data(std::move(out_shape), std::move(out));
  if (any_grad(x)) {
    auto* xn = x.node().get();
    auto* yn = y.node().get();
    const int64_t n = y.numel();
    wire(y, {x}, [xn, yn, arg = std::move(arg), n]() {
      for (int64_t o = 0; o < n; ++o) xn->grad[arg[o]] += yn->grad[o];
    });
  }
  return y;
}

Tensor nearest_resize(const Tensor& x, int64_t out_h, int64_t out_w) {
  if (x.dim() < 2 || out_h <= 0 || out_w <= 0) {
    throw ShapeError("nearest_resize: input " + shape_str(x.shape()));
  }
  const int64_t H = x.size(-2), W = x.size(-1);
  const int64_t lanes = x.numel() / (H * W);
  Shape out_shape = x.shape();
  out_shape[out_shape.size() - 2] = out_h;
  out_shape[out_shape.size() - 1] = out_w;
  std::vector<double> out(static_cast<size_t>(lanes * out_h * out_w));
  const auto& xd = x.data();
  for (int64_t l = 0; l < lanes; ++l) {
    for (int64_t oh = 0; oh < out_h; ++oh) {
      const int64_t ih = std::min<int64_t>(
          H - 1, static_cast<int64_t>((oh + 0.5) * H / out_h));
      for (int64_t ow = 0; ow < out_w; ++ow) {
        const int64_t iw = std::min<int64_t>(
            W - 1, static_cast<int64_t>((ow + 0.5) * W / out_w));
        out[l * out_h * out_w + oh * out_w + ow] = xd[l * H * W + ih * W + iw];
      }
    }
  }
  return Tensor::from_data(std::move(out_shape), std::move(out));
}

}  // namespace autr
