#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"

using namespace autr;
using autr::testing::random_tensor;

TEST_CASE("elementwise forward values") {
  Tensor a = Tensor::from_data({3}, {1.0, -2.0, 0.5});
  Tensor b = Tensor::from_data({3}, {2.0, 3.0, -1.0});
  CHECK(add(a, b).at({0}) == 3.0);
  CHECK(sub(a, b).at({1}) == -5.0);
  CHECK(mul(a, b).at({2}) == -0.5);
  CHECK(div(a, b).at({0}) == 0.5);
  CHECK(neg(a).at({0}) == -1.0);
  CHECK(scale(a, 4.0).at({2}) == 2.0);
  CHECK(add_scalar(a, 1.5).at({1}) == -0.5);
  CHECK(relu(a).at({1}) == 0.0);
  CHECK(relu(a).at({0}) == 1.0);
  CHECK(exp(a).at({0}) == doctest::Approx(std::exp(1.0)));
  CHECK(sigmoid(Tensor::scalar(0.0)).value() == doctest::Approx(0.5));
  CHECK_THROWS_AS(add(a, Tensor::zeros({2})), ShapeError);
}

TEST_CASE("logsigmoid is stable at saturating logits") {
  Tensor big = Tensor::from_data({2}, {800.0, -800.0});
  Tensor y = logsigmoid(big);
  CHECK(y.at({0}) == doctest::Approx(0.0));
  CHECK(y.at({1}) == doctest::Approx(-800.0));
  CHECK(std::isfinite(y.at({1})));
}

TEST_CASE("gelu matches the exact erf formulation") {
  Tensor x = Tensor::from_data({3}, {-1.0, 0.0, 2.0});
  Tensor y = gelu(x);
  for (int i = 0; i < 3; ++i) {
    const double v = x.at({i});
    const double want = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
    CHECK(y.at({i}) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("add_broadcast broadcasts a suffix shape") {
  Tensor a = Tensor::from_data({2, 3}, {0, 1, 2, 3, 4, 5});
  Tensor b = Tensor::from_data({3}, {10, 20, 30});
  Tensor y = add_broadcast(a, b);
  CHECK(y.at({0, 0}) == 10.0);
  CHECK(y.at({1, 2}) == 35.0);
  CHECK_THROWS_AS(add_broadcast(a, Tensor::zeros({2})), ShapeError);
}

TEST_CASE("reshape keeps data and checks element count") {
  Tensor a = Tensor::from_data({2, 3}, {0, 1, 2, 3, 4, 5});
  Tensor y = reshape(a, {3, 2});
  CHECK(y.at({2, 1}) == 5.0);
  CHECK_THROWS_AS(reshape(a, {4, 2}), ShapeError);
}

TEST_CASE("permute transposes correctly") {
  Tensor a = Tensor::from_data({2, 3}, {0, 1, 2, 3, 4, 5});
  Tensor y = permute(a, {1, 0});
  CHECK(y.shape() == Shape{3, 2});
  CHECK(y.at({0, 1}) == 3.0);
  CHECK(y.at({2, 0}) == 2.0);
  CHECK_THROWS_AS(permute(a, {0}), ShapeError);
}

TEST_CASE("concat and slice round-trip") {
  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from_data({2, 1}, {5, 6});
  Tensor c = concat({a, b}, 1);
  CHECK(c.shape() == Shape{2, 3});
  CHECK(c.at({0, 2}) == 5.0);
  Tensor back = slice(c, 1, 0, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(back.at({i, j}) == a.at({i, j}));
  CHECK_THROWS_AS(slice(c, 1, 2, 5), ShapeError);
}

TEST_CASE("repeat_middle repeats rows") {
  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor y = repeat_middle(a, 3);
  CHECK(y.shape() == Shape{2, 3, 2});
  for (int n = 0; n < 3; ++n) {
    CHECK(y.at({0, n, 1}) == 2.0);
    CHECK(y.at({1, n, 0}) == 3.0);
  }
}

TEST_CASE("reductions") {
  Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  CHECK(sum(a).value() == 10.0);
  CHECK(mean(a).value() == 2.5);
  Tensor ml = mean_last(a);
  CHECK(ml.shape() == Shape{2});
  CHECK(ml.at({0}) == 1.5);
  CHECK(ml.at({1}) == 3.5);
}

TEST_CASE("matmul small oracle and batch rules") {
  Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b = Tensor::from_data({3, 2}, {7, 8, 9, 10, 11, 12});
  Tensor y = matmul(a, b);
  CHECK(y.at({0, 0}) == 58.0);
  CHECK(y.at({0, 1}) == 64.0);
  CHECK(y.at({1, 0}) == 139.0);
  CHECK(y.at({1, 1}) == 154.0);

  // 2-D rhs broadcast over a batched lhs.
  Tensor ab = Tensor::from_data({2, 2, 3}, {1, 2, 3, 4, 5, 6,
                                            1, 0, 0, 0, 1, 0});
  Tensor yb = matmul(ab, b);
  CHECK(yb.shape() == Shape{2, 2, 2});
  CHECK(yb.at({0, 0, 0}) == 58.0);
  CHECK(yb.at({1, 0, 0}) == 7.0);
  CHECK(yb.at({1, 1, 1}) == 10.0);

  CHECK_THROWS_AS(matmul(a, Tensor::zeros({2, 2})), ShapeError);
}

TEST_CASE("softmax rows sum to one and match a long-row oracle") {
  Tensor x = Tensor::zeros({1000, 3});
  Tensor y = softmax(x, -1);
  for (int64_t i = 0; i < 1000; ++i)
    for (int64_t j = 0; j < 3; ++j)
      CHECK(y.at({i, j}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  Tensor z = Tensor::from_data({1, 3}, {1000.0, 0.0, -1000.0});
  Tensor s = softmax(z, -1);
  CHECK(s.at({0, 0}) == doctest::Approx(1.0));
  CHECK(std::isfinite(s.at({0, 2})));
}

TEST_CASE("softmax over a middle axis") {
  Tensor x = Tensor::from_data({2, 2, 2}, {0, 0, 0, 0, 1, 2, 3, 4});
  Tensor y = softmax(x, 1);
  CHECK(y.at({0, 0, 0}) + y.at({0, 1, 0}) == doctest::Approx(1.0));
  CHECK(y.at({1, 0, 1}) + y.at({1, 1, 1}) == doctest::Approx(1.0));
}

TEST_CASE("layer_norm normalizes the last axis") {
  Rng rng(3);
  Tensor x = random_tensor({4, 8}, rng);
  Tensor g = Tensor::full({8}, 1.0);
  Tensor b = Tensor::zeros({8});
  Tensor y = layer_norm(x, g, b);
  for (int64_t i = 0; i < 4; ++i) {
    double mu = 0, var = 0;
    for (int64_t j = 0; j < 8; ++j) mu += y.at({i, j});
    mu /= 8;
    for (int64_t j = 0; j < 8; ++j) {
      const double d = y.at({i, j}) - mu;
      var += d * d;
    }
    CHECK(mu == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(var / 8 == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("conv2d_1x1 equals a per-pixel matmul") {
  Rng rng(4);
  Tensor x = random_tensor({2, 3, 4, 4}, rng);
  Tensor w = random_tensor({5, 3}, rng);
  Tensor b = random_tensor({5}, rng);
  Tensor y = conv2d_1x1(x, w, b);
  CHECK(y.shape() == Shape{2, 5, 4, 4});
  for (int64_t n = 0; n < 2; ++n)
    for (int64_t co = 0; co < 5; ++co)
      for (int64_t p = 0; p < 16; ++p) {
        double want = b.at({co});
        for (int64_t ci = 0; ci < 3; ++ci)
          want += w.at({co, ci}) * x.data()[(n * 3 + ci) * 16 + p];
        CHECK(y.data()[(n * 5 + co) * 16 + p] ==
              doctest::Approx(want).epsilon(1e-12));
      }
}

TEST_CASE("conv2d_3x3 matches a direct sliding-window oracle") {
  Rng rng(5);
  Tensor x = random_tensor({1, 2, 5, 5}, rng);
  Tensor w = random_tensor({3, 2, 3, 3}, rng);
  Tensor b = random_tensor({3}, rng);
  for (int64_t stride : {int64_t{1}, int64_t{2}}) {
    Tensor y = conv2d_3x3(x, w, b, stride);
    const int64_t oh = (5 + 2 - 3) / stride + 1;
    CHECK(y.shape() == Shape{1, 3, oh, oh});
    for (int64_t co = 0; co < 3; ++co)
      for (int64_t oy = 0; oy < oh; ++oy)
        for (int64_t ox = 0; ox < oh; ++ox) {
          double want = b.at({co});
          for (int64_t ci = 0; ci < 2; ++ci)
            for (int64_t ky = 0; ky < 3; ++ky)
              for (int64_t kx = 0; kx < 3; ++kx) {
                const int64_t iy = oy * stride + ky - 1;
                const int64_t ix = ox * stride + kx - 1;
                if (iy < 0 || iy >= 5 || ix < 0 || ix >= 5) continue;
                want += w.at({co, ci, ky, kx}) * x.at({0, ci, iy, ix});
              }
          CHECK(y.at({0, co, oy, ox}) == doctest::Approx(want).epsilon(1e-12));
        }
  }
}

TEST_CASE("bilinear_resize half-pixel upsampling values") {
  // 1x2 -> 1x4 with align-corners-false half-pixel sampling and edge clamp.
  Tensor x = Tensor::from_data({1, 1, 2}, {0.0, 1.0});
  Tensor y = bilinear_resize(x, 1, 4);
  CHECK(y.at({0, 0, 0}) == doctest::Approx(0.0));
  CHECK(y.at({0, 0, 1}) == doctest::Approx(0.25));
  CHECK(y.at({0, 0, 2}) == doctest::Approx(0.75));
  CHECK(y.at({0, 0, 3}) == doctest::Approx(1.0));
}

TEST_CASE("bilinear_resize at the same size is the identity") {
  Rng rng(6);
  Tensor x = random_tensor({2, 3, 5, 7}, rng);
  Tensor y = bilinear_resize(x, 5, 7);
  for (int64_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("nearest_resize picks nearest source cells") {
  Tensor x = Tensor::from_data({1, 2, 2}, {1, 2, 3, 4});
  Tensor y = nearest_resize(x, 4, 4);
  CHECK(y.at({0, 0, 0}) == 1.0);
  CHECK(y.at({0, 0, 3}) == 2.0);
  CHECK(y.at({0, 3, 0}) == 3.0);
  CHECK(y.at({0, 3, 3}) == 4.0);
  Tensor dn = nearest_resize(y, 2, 2);
  for (int64_t i = 0; i < 4; ++i) CHECK(dn.data()[i] == x.data()[i]);
}

TEST_CASE("maxpool2d takes the 2x2 max") {
  Tensor x = Tensor::from_data({1, 1, 2, 4}, {1, 5, 2, 0, 3, 4, 8, 7});
  Tensor y = maxpool2d(x);
  CHECK(y.shape() == Shape{1, 1, 1, 2});
  CHECK(y.at({0, 0, 0, 0}) == 5.0);
  CHECK(y.at({0, 0, 0, 1}) == 8.0);
  CHECK_THROWS_AS(maxpool2d(Tensor::zeros({1, 1, 3, 4})), ShapeError);
}

TEST_CASE("linear applies weight then bias") {
  Tensor x = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor w = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b = Tensor::from_data({3}, {0.5, 0.5, 0.5});
  Tensor y = linear(x, w, b);
  CHECK(y.at({0, 0}) == 1.5);
  CHECK(y.at({1, 2}) == 6.5);
}
