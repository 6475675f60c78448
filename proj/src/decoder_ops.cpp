#include "sflow/decoder_ops.hpp"

#include <algorithm>
#include <cmath>

namespace sflow {

DafState DafState::init(std::size_t channels, std::size_t reduction, Rng& rng) {
  DafState st;
  st.channels = channels;
  st.local1 = ConvLayer::kaiming(channels, channels, 1, 0, rng);
  st.local2 = ConvLayer::kaiming(channels, channels, 1, 0, rng);
  const std::size_t mid = std::max<std::size_t>(1, channels / reduction);
  st.global_reduce = ConvLayer::kaiming(channels, mid, 1, 0, rng);
  st.global_expand = ConvLayer::kaiming(mid, channels, 1, 0, rng);
  return st;
}

void DafState::collect(ParamRegistry& reg, const std::string& prefix) {
  local1.collect(reg, prefix + ".local1");
  local2.collect(reg, prefix + ".local2");
  global_reduce.collect(reg, prefix + ".global_reduce");
  global_expand.collect(reg, prefix + ".global_expand");
}

Var daf_gate(StepVars& sv, const Var& f_dec, const Var& f_skip, const DafState& st) {
  if (f_dec.value.shape() != f_skip.value.shape())
    throw ShapeError("daf_gate: feature shapes differ: " +
                     f_dec.value.shape().str() + " vs " + f_skip.value.shape().str());
  Var fsum = add(f_dec, f_skip);
  Var local = st.local2(sv, relu(st.local1(sv, fsum)));
  const std::size_t c = fsum.value.shape()[0];
  Var pooled = reshape(global_avg_pool(fsum), Shape{c, 1, 1});
  Var global = st.global_expand(sv, relu(st.global_reduce(sv, pooled)));
  return sigmoid(add(local, global));  // broadcast over HxW
}

Var daf_fuse(const Var& f_dec, const Var& f_skip, const Var& gate) {
  Var dec_term = affine(mul(f_dec, gate), 2.0, 0.0);
  Var skip_term = affine(mul(f_skip, affine(gate, -1.0, 1.0)), 2.0, 0.0);
  return add(dec_term, skip_term);
}

FdconvState FdconvState::init(std::size_t cin, std::size_t cout, Rng& rng) {
  FdconvState st;
  st.cin = cin;
  st.cout = cout;
  // frequency coefficients start as the transform of a Kaiming spatial
  // kernel, so training begins equivalent to a standard convolution
  Tensor spatial = Tensor::randn(Shape{cout, cin, 3, 3}, rng);
  const double scale = std::sqrt(2.0 / static_cast<double>(cin * 9));
  for (std::size_t i = 0; i < spatial.size(); ++i) spatial.data()[i] *= scale;
  st.wre = Tensor::zeros(Shape{cout, cin, 3, 3});
  st.wim = Tensor::zeros(Shape{cout, cin, 3, 3});
  for (std::size_t p = 0; p < cout * cin; ++p) {
    Tensor plane(Shape{3, 3});
    std::copy(spatial.data() + p * 9, spatial.data() + p * 9 + 9, plane.data());
    auto [fr, fi] = fft2(plane, Tensor::zeros(Shape{3, 3}));
    std::copy(fr.data(), fr.data() + 9, st.wre.data() + p * 9);
    std::copy(fi.data(), fi.data() + 9, st.wim.data() + p * 9);
  }
  const std::size_t hidden = std::max<std::size_t>(4, cin / 4);
  st.mod1 = ConvLayer::kaiming(cin, hidden, 1, 0, rng);
  // zero-initialized last layer puts the sigmoid at 0.5, i.e. a(f) == 1
  st.mod2 = ConvLayer::kaiming(hidden, 9, 1, 0, rng);
  st.mod2.w = Tensor::zeros(st.mod2.w.shape());
  return st;
}

void FdconvState::collect(ParamRegistry& reg, const std::string& prefix) {
  reg.add(prefix + ".freq_re", &wre);
  reg.add(prefix + ".freq_im", &wim);
  mod1.collect(reg, prefix + ".mod1");
  mod2.collect(reg, prefix + ".mod2");
}

Var fdconv_modulation(StepVars& sv, const Var& f, const FdconvState& st) {
  const std::size_t c = f.value.shape()[0];
  Var pooled = reshape(global_avg_pool(f), Shape{c, 1, 1});
  Var u = st.mod2(sv, relu(st.mod1(sv, pooled)));  // [9,1,1]
  return affine(sigmoid(reshape(u, Shape{3, 3})), 2.0, 0.0);
}

Var fdconv_synthesize(const Var& modulation, const Var& wre, const Var& wim) {
  Var mod = reshape(modulation, Shape{1, 1, 3, 3});
  return real_ifft2(mul(wre, mod), mul(wim, mod));
}

Var fdconv_kernel(StepVars& sv, const Var& f, const FdconvState& st) {
  Var mod = fdconv_modulation(sv, f, st);
  return fdconv_synthesize(mod, sv.of(st.wre), sv.of(st.wim));
}

Var fdconv_apply(StepVars& sv, const Var& f, const FdconvState& st) {
  return conv2d(f, fdconv_kernel(sv, f, st), 1);
}

double fdconv_imag_residue(const Tensor& modulation, const Tensor& wre,
                           const Tensor& wim) {
  Tensor mod = modulation.reshaped(Shape{1, 1, 3, 3});
  auto [re, im] = ifft2_batched(mul(wre, mod), mul(wim, mod));
  return max_abs(im);
}

RefineBlock RefineBlock::init(std::size_t channels, bool use_fdconv, Rng& rng) {
  RefineBlock rb;
  rb.channels = channels;
  rb.use_fdconv = use_fdconv;
  if (use_fdconv)
    rb.fd = FdconvState::init(channels, channels, rng);
  else
    rb.conv1_std = ConvLayer::kaiming(channels, channels, 3, 1, rng);
  rb.conv2 = ConvLayer::kaiming(channels, channels, 3, 1, rng);
  return rb;
}

void RefineBlock::collect(ParamRegistry& reg, const std::string& prefix) {
  if (use_fdconv)
    fd.collect(reg, prefix + ".fdconv");
  else
    conv1_std.collect(reg, prefix + ".conv1");
  conv2.collect(reg, prefix + ".conv2");
}

Var RefineBlock::operator()(StepVars& sv, const Var& f) const {
  Var first = use_fdconv ? fdconv_apply(sv, f, fd) : conv1_std(sv, f);
  return relu(add(f, conv2(sv, relu(first))));
}

}  // namespace sflow
