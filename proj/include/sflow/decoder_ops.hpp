#pragma once

#include <string>

#include "sflow/nn.hpp"

// Stage-2 decoder mechanisms: gated cross-scale fusion (dense sigmoid mask
// from a point-wise local branch plus a channel-attention global branch) and
// dynamic convolution whose 3x3 kernel is synthesized per input by modulating
// learnable frequency coefficients and inverse-transforming them.

namespace sflow {

// Gating branches. No normalization layers; gate M = sigmoid(local + global)
// is elementwise in (0,1).
struct DafState {
  ConvLayer local1, local2;          // point-wise, channel preserving
  ConvLayer global_reduce, global_expand;  // channel attention, ratio r
  std::size_t channels = 0;

  static DafState init(std::size_t channels, std::size_t reduction, Rng& rng);
  void collect(ParamRegistry& reg, const std::string& prefix);
};

// M = sigmoid(B_local(f_dec + f_skip) + B_global(f_dec + f_skip)), dense CxHxW
Var daf_gate(StepVars& sv, const Var& f_dec, const Var& f_skip, const DafState& st);

// 2 * f_dec . M + 2 * f_skip . (1 - M)
Var daf_fuse(const Var& f_dec, const Var& f_skip, const Var& gate);

// Frequency-domain dynamic convolution state: complex coefficients over the
// 3x3 frequency grid per (cout, cin) pair, and a modulation network
// gap -> 1x1 -> relu -> 1x1 -> sigmoid emitting 9 per-bin weights shared
// across channel pairs, scaled by 2 so the default (zero-initialized last
// layer) modulation is exactly 1.
struct FdconvState {
  Tensor wre, wim;     // [cout, cin, 3, 3]
  ConvLayer mod1, mod2;
  std::size_t cin = 0, cout = 0;

  static FdconvState init(std::size_t cin, std::size_t cout, Rng& rng);
  void collect(ParamRegistry& reg, const std::string& prefix);
};

// 2 * sigmoid(...) modulation weights a(f), shape [3,3]
Var fdconv_modulation(StepVars& sv, const Var& f, const FdconvState& st);

// W_eff = Re(IFFT2(a(f) . W~)) for an explicit modulation (test surface)
Var fdconv_synthesize(const Var& modulation, const Var& wre, const Var& wim);

// sample-dependent kernel [cout, cin, 3, 3]
Var fdconv_kernel(StepVars& sv, const Var& f, const FdconvState& st);

// conv2d(f, fdconv_kernel(f), padding 1)
Var fdconv_apply(StepVars& sv, const Var& f, const FdconvState& st);

// max |Im(IFFT2(a . W~))| of the synthesized kernel (monitoring/tests)
double fdconv_imag_residue(const Tensor& modulation, const Tensor& wre,
                           const Tensor& wim);

// Residual refinement block: y = relu(f + conv3x3(relu(first(f)))).
// The first convolution is the dynamic one; the standard arm swaps in a
// plain 3x3 convolution.
struct RefineBlock {
  bool use_fdconv = true;
  FdconvState fd;
  ConvLayer conv1_std;
  ConvLayer conv2;
  std::size_t channels = 0;

  static RefineBlock init(std::size_t channels, bool use_fdconv, Rng& rng);
  void collect(ParamRegistry& reg, const std::string& prefix);
  Var operator()(StepVars& sv, const Var& f) const;
};

}  // namespace sflow
