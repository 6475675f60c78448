#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sflow/dispersive.hpp"
#include "testutil.hpp"

using namespace sflow;

namespace {

FeatureBatch fb(Tensor h, double tau = 0.5, double eps = 1e-8) {
  return FeatureBatch{std::move(h), tau, eps};
}

// brute-force double-loop oracle for the l2 variant
double disp_l2_oracle(const Tensor& h, double tau, double eps) {
  const std::size_t b = h.shape()[0], d = h.shape()[1];
  double s = 0.0;
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j) {
      if (i == j) continue;
      double dist = 0.0;
      for (std::size_t k = 0; k < d; ++k)
        dist += (h.at(i, k) - h.at(j, k)) * (h.at(i, k) - h.at(j, k));
      s += std::exp(-dist / tau);
    }
  return std::log(s / (b * (b - 1.0)) + eps);
}

double mean_pairwise_sqdist(const Tensor& h) {
  const std::size_t b = h.shape()[0], d = h.shape()[1];
  double s = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = i + 1; j < b; ++j) {
      for (std::size_t k = 0; k < d; ++k)
        s += (h.at(i, k) - h.at(j, k)) * (h.at(i, k) - h.at(j, k));
      ++n;
    }
  return s / n;
}

}  // namespace

TEST_CASE("info_nce: two identical points give log 2") {
  auto h = Tensor::from({2, 2}, {1, 1, 1, 1});
  CHECK(info_nce(fb(h), h) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("info_nce: positive at zero distance, negative far away -> 0") {
  auto h = Tensor::from({2, 2}, {0, 0, 300, 0});
  auto pos = h;  // each anchor's positive is itself
  CHECK(info_nce(fb(h, 1.0), pos) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("info_nce decomposition: positive term + log-sum-exp term") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    auto h = Tensor::randn(Shape{4, 3}, rng);
    auto pos = Tensor::randn(Shape{4, 3}, rng);
    auto batch = fb(h, 0.7);
    double pos_term = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      double dp = 0.0;
      for (std::size_t k = 0; k < 3; ++k)
        dp += (h.at(i, k) - pos.at(i, k)) * (h.at(i, k) - pos.at(i, k));
      pos_term += dp / batch.tau;
    }
    pos_term /= 4.0;
    CHECK(info_nce(batch, pos) ==
          doctest::Approx(pos_term + disp_lse(batch)).epsilon(1e-12));
  }
}

TEST_CASE("info_nce contract errors") {
  auto h1 = Tensor::ones(Shape{1, 3});
  CHECK_THROWS_AS(info_nce(fb(h1), h1), ContractError);
  auto h = Tensor::ones(Shape{2, 3});
  CHECK_THROWS_AS(info_nce(fb(h), Tensor::ones(Shape{2, 2})), ShapeError);
}

TEST_CASE("disp_l2 closed forms") {
  // identical batch: all distances zero
  auto same = Tensor::ones(Shape{3, 4});
  CHECK(disp_l2(fb(same)) == doctest::Approx(std::log(1.0 + 1e-8)).epsilon(1e-12));

  // B=2, |h1-h2|^2 = 4, tau = 4 -> log(e^-1) = -1
  auto two = Tensor::from({2, 2}, {0, 0, 2, 0});
  CHECK(disp_l2(fb(two, 4.0)) == doctest::Approx(-1.0).epsilon(1e-7));
}

TEST_CASE("disp_l2 matches double-loop oracle") {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    auto h = Tensor::randn(Shape{6, 8}, rng);
    CHECK(disp_l2(fb(h)) == doctest::Approx(disp_l2_oracle(h, 0.5, 1e-8)).epsilon(1e-12));
  }
}

TEST_CASE("disp_l2_grad: identical batch gives zero gradient") {
  auto same = Tensor::full(Shape{4, 3}, 0.7);
  CHECK(max_abs(disp_l2_grad(fb(same))) == 0.0);
}

TEST_CASE("per-anchor form: FD confirms the w12-weighted closed form") {
  // L_i = log sum_j exp(-D_ij/tau) over all j (self included). The printed
  // per-anchor expression (2/tau) w12 (h1-h2) is the repulsion (update)
  // direction; the derivative of L_1 itself is its negative.
  const double tau = 4.0;
  auto h = Tensor::from({2, 2}, {0, 0, 2, 0});
  auto w = disp_softmax_weights(fb(h, tau), 0);
  const double w12 = std::exp(-1.0) / (1.0 + std::exp(-1.0));
  CHECK(w[1] == doctest::Approx(w12).epsilon(1e-12));
  CHECK(w[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-12));

  auto anchor_lse = [&](const Tensor& hh) {
    double s = 0.0;
    for (std::size_t j = 0; j < 2; ++j) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < 2; ++k)
        d2 += (hh.at(0, k) - hh.at(j, k)) * (hh.at(0, k) - hh.at(j, k));
      s += std::exp(-d2 / tau);
    }
    return std::log(s);
  };
  // closed form from the printed expression, applied to anchor 1
  const double closed_x = 2.0 / tau * w12 * (h.at(0, 0) - h.at(1, 0));
  const double eps = 1e-6;
  Tensor hp = h.clone(), hm = h.clone();
  hp.data()[0] += eps;
  hm.data()[0] -= eps;
  const double fd_x = (anchor_lse(hp) - anchor_lse(hm)) / (2 * eps);
  CHECK(fd_x == doctest::Approx(-closed_x).epsilon(1e-5));
  CHECK(std::fabs(fd_x) == doctest::Approx(std::fabs(closed_x)).epsilon(1e-5));
}

TEST_CASE("gradient triple agreement: analytic vs autodiff vs finite differences") {
  Rng rng(77);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t b = 2 + rng.below(7), d = 1 + rng.below(16);
    auto h = Tensor::randn(Shape{b, d}, rng);
    const double tau = 0.3 + rng.uniform() * 1.5;
    auto batch = fb(h, tau);

    auto analytic = disp_l2_grad(batch);

    Tape tape;
    Var vh = tape.leaf(h);
    auto auto_grad = tape.backward(disp_l2(tape, vh, tau, 1e-8)).at(vh);
    CHECK(tu::max_rel_err(analytic, auto_grad) < 1e-9);

    auto f = [&](Tape& t, const std::vector<Var>& v) {
      return disp_l2(t, v[0], tau, 1e-8);
    };
    auto rep = grad_check(f, {h});
    CHECK(rep.pass(1e-6));
  }
}

TEST_CASE("disp_cosine closed forms and scale invariance") {
  // parallel, same direction
  auto par = Tensor::from({3, 2}, {1, 0, 2, 0, 0.5, 0});
  CHECK(disp_cosine(fb(par, 1.0)) == doctest::Approx(std::log(1 + 1e-8)).epsilon(1e-10));

  // B=2 orthogonal, tau=1 -> -1
  auto orth = Tensor::from({2, 2}, {1, 0, 0, 1});
  CHECK(disp_cosine(fb(orth, 1.0)) == doctest::Approx(-1.0).epsilon(1e-7));

  Rng rng(4);
  auto h = Tensor::randn(Shape{4, 5}, rng);
  const double base = disp_cosine(fb(h, 0.8));
  auto scaled = h.clone();
  for (std::size_t k = 0; k < 5; ++k) scaled.data()[2 * 5 + k] *= 3.0;
  CHECK(disp_cosine(fb(scaled, 0.8)) == doctest::Approx(base).epsilon(1e-12));

  auto zero_row = Tensor::zeros(Shape{2, 3});
  CHECK_THROWS_AS(disp_cosine(fb(zero_row)), ContractError);
}

TEST_CASE("disp_hinge closed forms and oracle") {
  // all pair distances >= margin -> 0
  auto far = Tensor::from({2, 1}, {0, 10});
  CHECK(disp_hinge(fb(far), 2.0) == 0.0);

  // identical pair, margin 2 -> max(0,2)^2 over both ordered pairs -> 4
  auto same = Tensor::zeros(Shape{2, 3});
  CHECK(disp_hinge(fb(same), 2.0) == doctest::Approx(4.0).epsilon(1e-12));

  Rng rng(15);
  auto h = Tensor::randn(Shape{5, 4}, rng);
  double oracle = 0.0;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      if (i == j) continue;
      double d2 = 0.0;
      for (std::size_t k = 0; k < 4; ++k)
        d2 += (h.at(i, k) - h.at(j, k)) * (h.at(i, k) - h.at(j, k));
      const double m = std::max(0.0, 1.5 - d2);
      oracle += m * m;
    }
  oracle /= 20.0;
  CHECK(disp_hinge(fb(h), 1.5) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("disp_covariance closed forms") {
  CHECK(disp_covariance(fb(Tensor::from({2, 2}, {1, 0, -1, 0}))) ==
        doctest::Approx(0.0).epsilon(1e-14));
  // C = [[2,2],[2,2]] -> off-diagonal Frobenius^2 = 8
  CHECK(disp_covariance(fb(Tensor::from({2, 2}, {1, 1, -1, -1}))) ==
        doctest::Approx(8.0).epsilon(1e-12));
  Rng rng(8);
  CHECK(disp_covariance(fb(Tensor::randn(Shape{5, 1}, rng))) == 0.0);
}

TEST_CASE("traced variants equal plain evaluation and are differentiable") {
  Rng rng(31);
  auto h = Tensor::randn(Shape{5, 6}, rng);
  Tape tape;
  Var vh = tape.leaf(h);
  CHECK(disp_l2(tape, vh, 0.5, 1e-8).value.item() ==
        doctest::Approx(disp_l2(fb(h))).epsilon(1e-12));
  CHECK(disp_cosine(tape, vh, 0.5, 1e-8).value.item() ==
        doctest::Approx(disp_cosine(fb(h))).epsilon(1e-12));
  CHECK(disp_hinge(tape, vh, 1.0).value.item() ==
        doctest::Approx(disp_hinge(fb(h), 1.0)).epsilon(1e-12));
  CHECK(disp_covariance(tape, vh).value.item() ==
        doctest::Approx(disp_covariance(fb(h))).epsilon(1e-12));

  for (auto variant : {DispVariant::Cosine, DispVariant::Hinge, DispVariant::Covariance}) {
    auto f = [&](Tape& t, const std::vector<Var>& v) {
      return disp_loss(t, v[0], variant, 0.5, 1e-8, 1.0);
    };
    auto rep = grad_check(f, {h});
    CHECK_MESSAGE(rep.pass(1e-6), to_string(variant), " err=", rep.max_rel_err);
  }
}

TEST_CASE("permutation invariance of every variant") {
  Rng rng(25);
  auto h = Tensor::randn(Shape{6, 4}, rng);
  std::vector<std::size_t> perm = {3, 1, 5, 0, 4, 2};
  Tensor hp(Shape{6, 4});
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t k = 0; k < 4; ++k) hp.data()[i * 4 + k] = h.at(perm[i], k);
  CHECK(disp_l2(fb(h)) == disp_l2(fb(hp)));
  CHECK(disp_cosine(fb(h)) == disp_cosine(fb(hp)));
  CHECK(disp_hinge(fb(h), 1.0) == disp_hinge(fb(hp), 1.0));
  CHECK(disp_covariance(fb(h)) == disp_covariance(fb(hp)));
}

TEST_CASE("translation invariance: l2 and hinge shift-free, cosine not asserted") {
  Rng rng(26);
  auto h = Tensor::randn(Shape{5, 3}, rng);
  auto shifted = h.clone();
  for (std::size_t i = 0; i < 5; ++i) {
    shifted.data()[i * 3 + 0] += 2.5;
    shifted.data()[i * 3 + 1] -= 1.25;
    shifted.data()[i * 3 + 2] += 0.75;
  }
  CHECK(std::fabs(disp_l2(fb(h)) - disp_l2(fb(shifted))) < 1e-12);
  CHECK(std::fabs(disp_hinge(fb(h), 1.0) - disp_hinge(fb(shifted), 1.0)) < 1e-12);
}

TEST_CASE("softmax weights are uniform at equal pairwise distances") {
  // equilateral triangle in the plane
  const double s3 = std::sqrt(3.0) / 2.0;
  auto h = Tensor::from({3, 2}, {0, 0, 1, 0, 0.5, s3});
  for (std::size_t a = 0; a < 3; ++a) {
    auto w = disp_softmax_weights(fb(h, 0.9), a);
    double off = -1.0;
    for (std::size_t j = 0; j < 3; ++j) {
      if (j == a) continue;
      if (off < 0)
        off = w[j];
      else
        CHECK(w[j] == doctest::Approx(off).epsilon(1e-12));
    }
  }
}

TEST_CASE("monotone dispersion under gradient descent on free features") {
  Rng rng(50);
  auto h = Tensor::randn(Shape{6, 4}, rng);
  for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] *= 0.1;  // tight init
  double prev = mean_pairwise_sqdist(h);
  const double lr = 0.05;
  for (int step = 0; step < 50; ++step) {
    auto g = disp_l2_grad(fb(h));
    for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] -= lr * g[i];
    const double now = mean_pairwise_sqdist(h);
    CHECK(now > prev);
    prev = now;
  }
}

TEST_CASE("stage1_loss combination and gradient additivity") {
  CHECK(stage1_loss(1.7, -0.4, 0.0) == 1.7);
  CHECK(stage1_loss(1.0, -1.0, 0.4) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK_THROWS_AS(stage1_loss(1.0, 1.0, -0.1), ContractError);

  // gradient of mf + lambda*disp splits additively
  Rng rng(61);
  auto h = Tensor::randn(Shape{4, 3}, rng);
  const double lambda = 0.4;
  Tape t1, t2, t3;
  Var v1 = t1.leaf(h), v2 = t2.leaf(h), v3 = t3.leaf(h);
  Var mf1 = mean_all(square(v1));
  Var total = add(mean_all(square(v3)), affine(disp_l2(t3, v3, 0.5, 1e-8), lambda, 0.0));
  auto gmf = t1.backward(mf1).at(v1);
  auto gdisp = t2.backward(disp_l2(t2, v2, 0.5, 1e-8)).at(v2);
  auto gtotal = t3.backward(total).at(v3);
  for (std::size_t i = 0; i < h.size(); ++i)
    CHECK(gtotal[i] == doctest::Approx(gmf[i] + lambda * gdisp[i]).epsilon(1e-12));
}
