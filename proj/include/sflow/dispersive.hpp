#pragma once

#include <string>

#include "sflow/autodiff.hpp"
#include "sflow/tensor.hpp"

// Dispersive-loss family over pooled batch representations, the InfoNCE
// reference it derives from, and the analytic batch gradient. Plain
// (double-valued) entry points are the oracle surface; the Var overloads
// build the same losses from tape primitives for training.

namespace sflow {

// B x d pooled features with temperature and numerical-stability constant.
struct FeatureBatch {
  Tensor h;              // [B, d]
  double tau = 0.5;      // > 0
  double eps_num = 1e-8;  // added inside the log

  std::size_t batch() const { return h.shape()[0]; }
  std::size_t dim() const { return h.shape()[1]; }
};

enum class DispVariant { L2, Cosine, Hinge, Covariance };
DispVariant disp_variant_from_string(const std::string& s);
std::string to_string(DispVariant v);

// InfoNCE with squared-Euclidean dissimilarity; the denominator pools all
// B batch items (self included), the positive sits in the numerator only.
double info_nce(const FeatureBatch& fb, const Tensor& positives);

// mean_i log sum_j exp(-D(h_i,h_j)/tau) over all j: the log-sum-exp
// normalization term InfoNCE decomposes into.
double disp_lse(const FeatureBatch& fb);

// per-anchor softmax weights w_ij over -D(h_i, .)/tau, all j (self included)
Tensor disp_softmax_weights(const FeatureBatch& fb, std::size_t anchor);

// log( (1/(B(B-1))) sum_{i!=j} exp(-|h_i-h_j|^2/tau) + eps )
double disp_l2(const FeatureBatch& fb);

// Analytic gradient of disp_l2 w.r.t. h, assembled from the weighted
// repulsive pair terms; matches reverse-mode autodiff of disp_l2.
Tensor disp_l2_grad(const FeatureBatch& fb);

// variant with D = 1 - cos(h_i, h_j); rejects zero-norm rows
double disp_cosine(const FeatureBatch& fb);

// mean over ordered pairs i != j of max(0, margin - |h_i-h_j|^2)^2
double disp_hinge(const FeatureBatch& fb, double margin);

// squared Frobenius norm of the off-diagonal of the sample covariance
double disp_covariance(const FeatureBatch& fb);

// combined Stage-1 objective value
double stage1_loss(double mf, double disp, double lambda);

// ------------------------------------------------------- traced (training)
Var disp_l2(Tape& tape, const Var& h, double tau, double eps_num);
Var disp_cosine(Tape& tape, const Var& h, double tau, double eps_num);
Var disp_hinge(Tape& tape, const Var& h, double margin);
Var disp_covariance(Tape& tape, const Var& h);
Var disp_loss(Tape& tape, const Var& h, DispVariant variant, double tau,
              double eps_num, double margin);

}  // namespace sflow
