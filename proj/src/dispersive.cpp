#include "sflow/dispersive.hpp"

#include <cmath>

namespace sflow {

namespace {

void check_batch(const FeatureBatch& fb) {
  if (fb.h.rank() != 2) throw ShapeError("FeatureBatch.h must be [B,d]");
  if (fb.batch() < 2) throw ContractError("dispersive losses need B >= 2");
  if (fb.tau <= 0.0) throw ContractError("temperature must be positive");
}

double sqdist_rows(const Tensor& h, std::size_t i, std::size_t j) {
  const std::size_t d = h.shape()[1];
  const double* a = h.data() + i * d;
  const double* b = h.data() + j * d;
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double t = a[k] - b[k];
    s += t * t;
  }
  return s;
}

// off-diagonal indicator over an n x n grid
Tensor offdiag_mask(std::size_t n) {
  Tensor m = Tensor::ones(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) m.data()[i * n + i] = 0.0;
  return m;
}

// value-ordered summation; batch reordering permutes the terms but cannot
// perturb the result, which keeps the disp_* losses exactly permutation
// invariant
double sorted_sum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

}  // namespace

DispVariant disp_variant_from_string(const std::string& s) {
  if (s == "l2") return DispVariant::L2;
  if (s == "cosine") return DispVariant::Cosine;
  if (s == "hinge") return DispVariant::Hinge;
  if (s == "covariance") return DispVariant::Covariance;
  throw ContractError("unknown dispersive variant: " + s);
}

std::string to_string(DispVariant v) {
  switch (v) {
    case DispVariant::L2: return "l2";
    case DispVariant::Cosine: return "cosine";
    case DispVariant::Hinge: return "hinge";
    case DispVariant::Covariance: return "covariance";
  }
  return "?";
}

double info_nce(const FeatureBatch& fb, const Tensor& positives) {
  check_batch(fb);
  if (positives.shape() != fb.h.shape())
    throw ShapeError("info_nce: positives shape " + positives.shape().str() +
                     " != h shape " + fb.h.shape().str());
  const std::size_t b = fb.batch(), d = fb.dim();
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    double dpos = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double t = fb.h.at(i, k) - positives.at(i, k);
      dpos += t * t;
    }
    double den = 0.0;
    for (std::size_t j = 0; j < b; ++j)
      den += std::exp(-sqdist_rows(fb.h, i, j) / fb.tau);
    total += -std::log(std::exp(-dpos / fb.tau) / den);
  }
  return total / static_cast<double>(b);
}

double disp_lse(const FeatureBatch& fb) {
  check_batch(fb);
  const std::size_t b = fb.batch();
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < b; ++j)
      s += std::exp(-sqdist_rows(fb.h, i, j) / fb.tau);
    total += std::log(s);
  }
  return total / static_cast<double>(b);
}

Tensor disp_softmax_weights(const FeatureBatch& fb, std::size_t anchor) {
  check_batch(fb);
  const std::size_t b = fb.batch();
  if (anchor >= b) throw ContractError("disp_softmax_weights: anchor out of range");
  Tensor w(Shape{b});
  double den = 0.0;
  for (std::size_t j = 0; j < b; ++j) {
    w.data()[j] = std::exp(-sqdist_rows(fb.h, anchor, j) / fb.tau);
    den += w[j];
  }
  for (std::size_t j = 0; j < b; ++j) w.data()[j] /= den;
  return w;
}

double disp_l2(const FeatureBatch& fb) {
  check_batch(fb);
  const std::size_t b = fb.batch();
  std::vector<double> terms;
  terms.reserve(b * (b - 1));
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j) {
      if (i == j) continue;
      terms.push_back(std::exp(-sqdist_rows(fb.h, i, j) / fb.tau));
    }
  return std::log(sorted_sum(terms) / static_cast<double>(b * (b - 1)) + fb.eps_num);
}

Tensor disp_l2_grad(const FeatureBatch& fb) {
  check_batch(fb);
  const std::size_t b = fb.batch(), d = fb.dim();
  // d/dh_a of log(S/(B(B-1)) + eps), S over ordered pairs: each unordered
  // pair contributes twice, so the pair weight is e_aj / (S + eps*B*(B-1))
  // and the repulsive term is -(4/tau) * w_aj * (h_a - h_j).
  double s = 0.0;
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j)
      if (i != j) s += std::exp(-sqdist_rows(fb.h, i, j) / fb.tau);
  const double den = s + fb.eps_num * static_cast<double>(b * (b - 1));
  Tensor grad = Tensor::zeros(fb.h.shape());
  for (std::size_t a = 0; a < b; ++a) {
    double* g = grad.data() + a * d;
    for (std::size_t j = 0; j < b; ++j) {
      if (j == a) continue;
      const double w = std::exp(-sqdist_rows(fb.h, a, j) / fb.tau) / den;
      const double c = -4.0 / fb.tau * w;
      const double* ha = fb.h.data() + a * d;
      const double* hj = fb.h.data() + j * d;
      for (std::size_t k = 0; k < d; ++k) g[k] += c * (ha[k] - hj[k]);
    }
  }
  return grad;
}

double disp_cosine(const FeatureBatch& fb) {
  check_batch(fb);
  const std::size_t b = fb.batch(), d = fb.dim();
  std::vector<double> norm(b);
  for (std::size_t i = 0; i < b; ++i) {
    double n2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) n2 += fb.h.at(i, k) * fb.h.at(i, k);
    if (n2 == 0.0) throw ContractError("disp_cosine: zero-norm row " + std::to_string(i));
    norm[i] = std::sqrt(n2);
  }
  std::vector<double> terms;
  terms.reserve(b * (b - 1));
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j) {
      if (i == j) continue;
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += fb.h.at(i, k) * fb.h.at(j, k);
      const double dist = 1.0 - dot / (norm[i] * norm[j]);
      terms.push_back(std::exp(-dist / fb.tau));
    }
  return std::log(sorted_sum(terms) / static_cast<double>(b * (b - 1)) + fb.eps_num);
}

double disp_hinge(const FeatureBatch& fb, double margin) {
  check_batch(fb);
  if (margin <= 0.0) throw ContractError("disp_hinge: margin must be positive");
  const std::size_t b = fb.batch();
  std::vector<double> terms;
  terms.reserve(b * (b - 1));
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j) {
      if (i == j) continue;
      const double hinge = std::max(0.0, margin - sqdist_rows(fb.h, i, j));
      terms.push_back(hinge * hinge);
    }
  return sorted_sum(terms) / static_cast<double>(b * (b - 1));
}

double disp_covariance(const FeatureBatch& fb) {
  check_batch(fb);
  const std::size_t b = fb.batch(), d = fb.dim();
  std::vector<double> mean(d, 0.0);
  std::vector<double> col(b);
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t i = 0; i < b; ++i) col[i] = fb.h.at(i, k);
    mean[k] = sorted_sum(col) / static_cast<double>(b);
  }
  double s = 0.0;
  for (std::size_t p = 0; p < d; ++p)
    for (std::size_t q = 0; q < d; ++q) {
      if (p == q) continue;
      for (std::size_t i = 0; i < b; ++i)
        col[i] = (fb.h.at(i, p) - mean[p]) * (fb.h.at(i, q) - mean[q]);
      const double c = sorted_sum(col) / static_cast<double>(b - 1);
      s += c * c;
    }
  return s;
}

double stage1_loss(double mf, double disp, double lambda) {
  if (lambda < 0.0) throw ContractError("stage1_loss: lambda must be >= 0");
  return mf + lambda * disp;
}

// ----------------------------------------------------------------- traced

namespace {

// [B,B] matrix of squared pairwise distances built from tape primitives
Var pairwise_sqdist(Tape& tape, const Var& h) {
  const std::size_t b = h.value.shape()[0], d = h.value.shape()[1];
  Var ha = reshape(h, Shape{b, 1, d});
  Var hb = reshape(h, Shape{1, b, d});
  Var diff = sub(ha, hb);
  return sum_axis(mul(diff, diff), 2);
}

void check_var_batch(const Var& h) {
  if (h.value.rank() != 2 || h.value.shape()[0] < 2)
    throw ContractError("traced dispersive loss needs h of shape [B>=2, d]");
}

}  // namespace

Var disp_l2(Tape& tape, const Var& h, double tau, double eps_num) {
  check_var_batch(h);
  if (tau <= 0.0) throw ContractError("temperature must be positive");
  const std::size_t b = h.value.shape()[0];
  Var d2 = pairwise_sqdist(tape, h);
  Var e = exp(affine(d2, -1.0 / tau, 0.0));
  Var masked = mul(e, vconst(offdiag_mask(b)));
  return log(affine(sum_all(masked), 1.0 / static_cast<double>(b * (b - 1)), eps_num));
}

Var disp_cosine(Tape& tape, const Var& h, double tau, double eps_num) {
  check_var_batch(h);
  const std::size_t b = h.value.shape()[0], d = h.value.shape()[1];
  Var n = sqrt(sum_axis(mul(h, h), 1));          // [B]
  Var unit = divide(h, reshape(n, Shape{b, 1}));  // [B,d]
  Var cosm = sum_axis(
      mul(reshape(unit, Shape{b, 1, d}), reshape(unit, Shape{1, b, d})), 2);
  Var dist = affine(cosm, -1.0, 1.0);
  Var e = exp(affine(dist, -1.0 / tau, 0.0));
  Var masked = mul(e, vconst(offdiag_mask(b)));
  return log(affine(sum_all(masked), 1.0 / static_cast<double>(b * (b - 1)), eps_num));
}

Var disp_hinge(Tape& tape, const Var& h, double margin) {
  check_var_batch(h);
  const std::size_t b = h.value.shape()[0];
  Var d2 = pairwise_sqdist(tape, h);
  Var hinge = square(relu(affine(d2, -1.0, margin)));
  Var masked = mul(hinge, vconst(offdiag_mask(b)));
  return affine(sum_all(masked), 1.0 / static_cast<double>(b * (b - 1)), 0.0);
}

Var disp_covariance(Tape& tape, const Var& h) {
  check_var_batch(h);
  const std::size_t b = h.value.shape()[0], d = h.value.shape()[1];
  Var mean = affine(sum_axis(h, 0), 1.0 / static_cast<double>(b), 0.0);  // [d]
  Var centered = sub(h, reshape(mean, Shape{1, d}));
  Var gram = sum_axis(
      mul(reshape(centered, Shape{b, d, 1}), reshape(centered, Shape{b, 1, d})), 0);
  Var cov = affine(gram, 1.0 / static_cast<double>(b - 1), 0.0);
  Var off = mul(cov, vconst(offdiag_mask(d)));
  return sum_all(square(off));
}

Var disp_loss(Tape& tape, const Var& h, DispVariant variant, double tau,
              double eps_num, double margin) {
  switch (variant) {
    case DispVariant::L2: return disp_l2(tape, h, tau, eps_num);
    case DispVariant::Cosine: return disp_cosine(tape, h, tau, eps_num);
    case DispVariant::Hinge: return disp_hinge(tape, h, margin);
    case DispVariant::Covariance: return disp_covariance(tape, h);
  }
  throw ContractError("disp_loss: bad variant");
}

}  // namespace sflow
