#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "sflow/tensor.hpp"
#include "testutil.hpp"

using namespace sflow;

namespace {

// quadruple-loop convolution oracle (cross-correlation, zero padding)
Tensor conv_oracle(const Tensor& in, const Tensor& ker, int pad) {
  const std::size_t cin = in.shape()[0], h = in.shape()[1], w = in.shape()[2];
  const std::size_t cout = ker.shape()[0], k = ker.shape()[2];
  const std::size_t ho = h + 2 * pad - k + 1, wo = w + 2 * pad - k + 1;
  Tensor out(Shape{cout, ho, wo});
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t y = 0; y < ho; ++y)
      for (std::size_t x = 0; x < wo; ++x) {
        double acc = 0.0;
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long yy = static_cast<long>(y + ky) - pad;
              const long xx = static_cast<long>(x + kx) - pad;
              if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) ||
                  xx >= static_cast<long>(w))
                continue;
              acc += ker.at(co, ci, ky, kx) * in.at(ci, yy, xx);
            }
        out.data()[(co * ho + y) * wo + x] = acc;
      }
  return out;
}

}  // namespace

TEST_CASE("elementwise basics") {
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  auto r = add(Tensor::from({2}, {1, 2}), Tensor::from({2}, {3, 4}));
  CHECK(r[0] == 4.0);
  CHECK(r[1] == 6.0);

  Rng rng(5);
  auto x = Tensor::randn(Shape{3, 4, 4}, rng);
  auto y = mul(x, Tensor::ones(x.shape()));
  CHECK(tu::bitwise_equal(x, y));
}

TEST_CASE("broadcasting rules") {
  auto a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  auto b = Tensor::from({3}, {10, 20, 30});
  auto r = add(a, b);
  CHECK(r.shape() == Shape{2, 3});
  CHECK(r.at(1, 2) == 36.0);

  // output shape is the elementwise max of input shapes
  auto c = Tensor::ones(Shape{4, 1, 5});
  auto d = Tensor::ones(Shape{1, 3, 1});
  CHECK(add(c, d).shape() == Shape{4, 3, 5});

  // bias-style [C,1,1] against [C,H,W]
  auto img = Tensor::ones(Shape{2, 3, 3});
  auto bias = Tensor::from({2, 1, 1}, {1.0, -1.0});
  auto out = add(img, bias);
  CHECK(out.at(0, 2, 2) == 2.0);
  CHECK(out.at(1, 0, 0) == 0.0);

  CHECK_THROWS_AS(add(Tensor::ones(Shape{2, 3}), Tensor::ones(Shape{2, 2})), ShapeError);
}

TEST_CASE("reduce_to inverts broadcasting") {
  Rng rng(9);
  auto g = Tensor::randn(Shape{4, 3, 5}, rng);
  auto r = reduce_to(g, Shape{1, 3, 1});
  double expect = 0.0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t k = 0; k < 5; ++k) expect += g.at(i, 1, k);
  CHECK(r.at(0, 1, 0) == doctest::Approx(expect).epsilon(1e-14));
  auto r2 = reduce_to(g, Shape{5});
  CHECK(r2.shape() == Shape{5});
}

TEST_CASE("conv2d identity and constant kernels") {
  Rng rng(1);
  auto x = Tensor::randn(Shape{1, 6, 6}, rng);
  auto ident = Tensor::zeros(Shape{1, 1, 3, 3});
  ident.data()[4] = 1.0;
  auto y = conv2d(x, ident, 1);
  CHECK(tu::max_abs_diff(x, y) == 0.0);

  auto onesk = Tensor::ones(Shape{1, 1, 3, 3});
  auto in5 = Tensor::ones(Shape{1, 5, 5});
  auto out = conv2d(in5, onesk, 0);
  CHECK(out.shape() == Shape{1, 3, 3});
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == 9.0);
}

TEST_CASE("conv2d matches quadruple-loop oracle") {
  Rng rng(17);
  auto x = Tensor::randn(Shape{1, 4, 4}, rng);
  auto k = Tensor::randn(Shape{1, 1, 3, 3}, rng);
  CHECK(tu::max_abs_diff(conv2d(x, k, 1), conv_oracle(x, k, 1)) < 1e-12);

  for (int trial = 0; trial < 5; ++trial) {
    auto xi = Tensor::randn(Shape{3, 7, 9}, rng);
    auto ki = Tensor::randn(Shape{4, 3, 3, 3}, rng);
    CHECK(tu::max_abs_diff(conv2d(xi, ki, 1), conv_oracle(xi, ki, 1)) < 1e-12);
    CHECK(tu::max_abs_diff(conv2d(xi, ki, 0), conv_oracle(xi, ki, 0)) < 1e-12);
  }
}

TEST_CASE("conv2d linearity in input") {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    auto x = Tensor::randn(Shape{2, 6, 6}, rng);
    auto y = Tensor::randn(Shape{2, 6, 6}, rng);
    auto k = Tensor::randn(Shape{3, 2, 3, 3}, rng);
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    auto lhs = conv2d(add(affine(x, a, 0), affine(y, b, 0)), k, 1);
    auto rhs = add(affine(conv2d(x, k, 1), a, 0), affine(conv2d(y, k, 1), b, 0));
    CHECK(tu::max_abs_diff(lhs, rhs) < 1e-10);
  }
}

TEST_CASE("conv2d shape errors") {
  auto x = Tensor::ones(Shape{2, 5, 5});
  CHECK_THROWS_AS(conv2d(x, Tensor::ones(Shape{1, 3, 3, 3}), 1), ShapeError);
  CHECK_THROWS_AS(conv2d(x, Tensor::ones(Shape{1, 2, 3, 3}), 2), ContractError);
}

TEST_CASE("global_avg_pool") {
  auto c = Tensor::full(Shape{2, 3, 3}, 2.5);
  auto p = global_avg_pool(c);
  CHECK(p[0] == 2.5);
  auto x = Tensor::from({1, 2, 2}, {1, 3, 5, 7});
  CHECK(global_avg_pool(x)[0] == 4.0);

  Rng rng(3);
  auto r = Tensor::randn(Shape{3, 8, 8}, rng);
  auto pooled = global_avg_pool(r);
  for (std::size_t ci = 0; ci < 3; ++ci) {
    double s = 0.0;
    for (std::size_t i = 0; i < 64; ++i) s += r.data()[ci * 64 + i];
    CHECK(pooled[ci] == doctest::Approx(s / 64.0).epsilon(1e-12));
  }
}

TEST_CASE("bilinear_upsample") {
  Rng rng(4);
  auto x = Tensor::randn(Shape{2, 3, 3}, rng);
  CHECK(tu::bitwise_equal(bilinear_upsample(x, 1), x));

  auto c = Tensor::full(Shape{1, 4, 4}, 3.25);
  auto up = bilinear_upsample(c, 3);
  CHECK(up.shape() == Shape{1, 12, 12});
  for (std::size_t i = 0; i < up.size(); ++i) CHECK(up[i] == doctest::Approx(3.25));

  // hand-computed align-corners=false oracle for [[0,2],[4,6]] factor 2:
  // row axis and column axis interpolate independently;
  // src coords {-0.25,0.25,0.75,1.25} -> weights on clamped neighbors
  auto q = Tensor::from({1, 2, 2}, {0, 2, 4, 6});
  auto u = bilinear_upsample(q, 2);
  const double expect[16] = {0.0, 0.5, 1.5, 2.0, 1.0, 1.5, 2.5, 3.0,
                             3.0, 3.5, 4.5, 5.0, 4.0, 4.5, 5.5, 6.0};
  for (std::size_t i = 0; i < 16; ++i)
    CHECK(u[i] == doctest::Approx(expect[i]).epsilon(1e-12));
}

TEST_CASE("avg_pool2 and local_mean3") {
  auto x = Tensor::from({1, 2, 2}, {1, 3, 5, 7});
  CHECK(avg_pool2(x).item() == 4.0);

  // count-normalized mean: constant field has zero boundary response
  auto c = Tensor::full(Shape{1, 5, 5}, 2.0);
  auto m = local_mean3(c);
  CHECK(tu::max_abs_diff(m, c) == 0.0);

  auto y = Tensor::from({3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  auto lm = local_mean3(y);
  CHECK(lm.at(0, 0) == doctest::Approx((1 + 2 + 4 + 5) / 4.0));
  CHECK(lm.at(1, 1) == doctest::Approx(5.0));
  CHECK(lm.at(2, 1) == doctest::Approx((4 + 5 + 6 + 7 + 8 + 9) / 6.0));
}

TEST_CASE("fft2 DC concentration") {
  auto c = Tensor::full(Shape{4, 4}, 1.5);
  auto z = Tensor::zeros(Shape{4, 4});
  auto [re, im] = fft2(c, z);
  CHECK(re.at(0, 0) == doctest::Approx(24.0).epsilon(1e-12));
  for (std::size_t i = 1; i < re.size(); ++i) {
    CHECK(std::fabs(re[i]) < 1e-10);
    CHECK(std::fabs(im[i]) < 1e-10);
  }
}

TEST_CASE("fft2/ifft2 round trip incl. odd extents") {
  Rng rng(31);
  for (auto hw : std::vector<std::pair<int, int>>{{3, 3}, {5, 7}, {8, 8}, {32, 32}, {17, 4}}) {
    auto re = Tensor::randn(Shape{(std::size_t)hw.first, (std::size_t)hw.second}, rng);
    auto im = Tensor::randn(re.shape(), rng);
    auto [fr, fi] = fft2(re, im);
    auto [br, bi] = ifft2(fr, fi);
    CHECK(tu::max_abs_diff(br, re) < 1e-10);
    CHECK(tu::max_abs_diff(bi, im) < 1e-10);
  }
}

TEST_CASE("fft2 Parseval identity") {
  Rng rng(13);
  auto re = Tensor::randn(Shape{8, 8}, rng);
  auto im = Tensor::randn(Shape{8, 8}, rng);
  auto [fr, fi] = fft2(re, im);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < re.size(); ++i) {
    lhs += re[i] * re[i] + im[i] * im[i];
    rhs += fr[i] * fr[i] + fi[i] * fi[i];
  }
  CHECK(lhs == doctest::Approx(rhs / 64.0).epsilon(1e-10));
}

TEST_CASE("real_ifft2 of forward transform recovers real signal") {
  Rng rng(77);
  auto w = Tensor::randn(Shape{2, 2, 3, 3}, rng);
  // forward-transform each 3x3 plane, then batched real inverse
  Tensor wre(w.shape()), wim(w.shape());
  for (std::size_t p = 0; p < 4; ++p) {
    Tensor plane(Shape{3, 3});
    std::copy(w.data() + p * 9, w.data() + p * 9 + 9, plane.data());
    auto [fr, fi] = fft2(plane, Tensor::zeros(Shape{3, 3}));
    std::copy(fr.data(), fr.data() + 9, wre.data() + p * 9);
    std::copy(fi.data(), fi.data() + 9, wim.data() + p * 9);
  }
  auto back = real_ifft2(wre, wim);
  CHECK(tu::max_abs_diff(back, w) < 1e-10);
  // imaginary residue of the batched inverse is ~0 for Hermitian input
  auto [br, bi] = ifft2_batched(wre, wim);
  CHECK(max_abs(bi) < 1e-10);
}

TEST_CASE("tensor invariants") {
  Rng rng(2);
  auto x = Tensor::randn(Shape{2, 3, 4}, rng);
  CHECK(x.size() == 24);
  CHECK(x.all_finite());
  auto r = x.reshaped(Shape{6, 4});
  CHECK(r.same_data(x));
  CHECK_THROWS_AS(x.reshaped(Shape{5, 5}), ShapeError);
  CHECK_THROWS_AS(Tensor::from(Shape{2}, {1.0}), ShapeError);
}
