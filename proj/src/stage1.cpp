#include "sflow/stage1.hpp"

#include <cmath>

namespace sflow {

PerturbState perturb(const Tensor& z0, double t, double s, Rng& rng) {
  if (t < 0.0 || t > 1.0) throw ContractError("perturb: t must lie in [0,1]");
  if (s < 0.0 || s > t) throw ContractError("perturb: need 0 <= s <= t");
  PerturbState st;
  st.z0 = z0;
  st.eps = Tensor::randn(z0.shape(), rng);
  st.t = t;
  st.s = s;
  Tensor zt = affine(z0, 1.0 - t, 0.0);
  kernels::ops().axpy(t, st.eps.data(), zt.data(), zt.size());
  st.zt = zt;
  return st;
}

Tensor velocity(const PerturbState& st) { return sub(st.eps, st.z0); }

std::pair<double, double> sample_times(Rng& rng, double p_eq) {
  // fixed draw order (a, b, gate) keeps the stream stable across branches
  const double a = rng.uniform();
  const double b = rng.uniform();
  const double gate = rng.uniform();
  if (gate < p_eq) return {a, a};
  return {std::max(a, b), std::min(a, b)};
}

Tensor ts_channels(std::size_t h, std::size_t w, double t, double s) {
  Tensor out(Shape{2, h, w});
  std::fill(out.data(), out.data() + h * w, t);
  std::fill(out.data() + h * w, out.data() + 2 * h * w, s);
  return out;
}

MeanFlowHead MeanFlowHead::init(std::size_t latent_ch, Rng& rng) {
  MeanFlowHead head;
  head.latent_ch = latent_ch;
  head.c1 = ConvLayer::kaiming(latent_ch + 2, latent_ch, 3, 1, rng);
  head.c2 = ConvLayer::kaiming(latent_ch, latent_ch, 3, 1, rng);
  head.c3 = ConvLayer::kaiming(latent_ch, latent_ch, 3, 1, rng);
  return head;
}

void MeanFlowHead::collect(ParamRegistry& reg, const std::string& prefix) {
  c1.collect(reg, prefix + ".conv1");
  c2.collect(reg, prefix + ".conv2");
  c3.collect(reg, prefix + ".conv3");
}

Var MeanFlowHead::forward(StepVars& sv, const Var& input) const {
  return c3(sv, relu(c2(sv, relu(c1(sv, input)))));
}

Var MeanFlowHead::forward(Tape& tape, const Var& input) const {
  return c3(tape, relu(c2(tape, relu(c1(tape, input)))));
}

Tensor MeanFlowHead::forward(const Tensor& input) const {
  return c3(relu(c2(relu(c1(input)))));
}

std::vector<Tensor*> MeanFlowHead::tensors() {
  return {&c1.w, &c1.b, &c2.w, &c2.b, &c3.w, &c3.b};
}

std::vector<const Tensor*> MeanFlowHead::tensors() const {
  return {&c1.w, &c1.b, &c2.w, &c2.b, &c3.w, &c3.b};
}

void ema_update(const MeanFlowHead& online, MeanFlowHead& ema, double decay) {
  if (decay < 0.0 || decay > 1.0) throw ContractError("ema_update: decay in [0,1]");
  auto src = online.tensors();
  auto dst = ema.tensors();
  for (std::size_t i = 0; i < src.size(); ++i)
    ema_update_tensor(*dst[i], *src[i], decay);
}

Tensor meanflow_target(const PerturbState& st, const MeanFlowHead& ema) {
  const Tensor v = velocity(st);
  if (st.t == st.s) return v;  // (t-s) kills the correction term exactly
  const std::size_t h = st.zt.shape()[1], w = st.zt.shape()[2];
  // total derivative along the trajectory via forward-mode JVP:
  // input tangent is (dz/dt, dt, ds) = (v, 1, 0)
  Tensor input(Shape{st.zt.shape()[0] + 2, h, w});
  std::copy(st.zt.data(), st.zt.data() + st.zt.size(), input.data());
  Tensor tsch = ts_channels(h, w, st.t, st.s);
  std::copy(tsch.data(), tsch.data() + tsch.size(), input.data() + st.zt.size());

  Tensor dir(input.shape());
  std::copy(v.data(), v.data() + v.size(), dir.data());
  Tensor dts = ts_channels(h, w, 1.0, 0.0);
  std::copy(dts.data(), dts.data() + dts.size(), dir.data() + v.size());

  Tensor dh = jvp(
      [&ema](Tape& tape, const Var& x) { return ema.forward(tape, x); }, input, dir);

  Tensor target = v;
  Tensor out = target.clone();
  kernels::ops().axpy(-(st.t - st.s), dh.data(), out.data(), out.size());
  return out;
}

Var meanflow_loss(Tape& tape, StepVars& sv, const MeanFlowHead& head,
                  const MeanFlowHead& ema, const Var& zt, const PerturbState& st) {
  const std::size_t h = st.zt.shape()[1], w = st.zt.shape()[2];
  const Tensor target = meanflow_target(st, ema);
  Var input = concat_ch({zt, vconst(ts_channels(h, w, st.t, st.s))});
  Var pred = head.forward(sv, input);
  return mean_all(square(sub(pred, vconst(target))));
}

Tensor replicate3(const Tensor& mask) {
  const Shape s = mask.shape();
  const std::size_t h = s.rank == 3 ? s.d[1] : s.d[0];
  const std::size_t w = s.rank == 3 ? s.d[2] : s.d[1];
  if (s.rank == 3 && s.d[0] != 1)
    throw ShapeError("replicate3: expected a single-channel mask");
  Tensor out(Shape{3, h, w});
  for (int c = 0; c < 3; ++c)
    std::copy(mask.data(), mask.data() + h * w, out.data() + c * h * w);
  return out;
}

MixedBatch make_mixed_batch(const std::vector<Tensor>& images,
                            const std::vector<Tensor>& masks,
                            std::size_t batch_size, double mask_ratio, Rng& rng) {
  if (mask_ratio < 0.0 || mask_ratio > 1.0)
    throw ContractError("make_mixed_batch: mask_ratio in [0,1]");
  const std::size_t n_mask =
      static_cast<std::size_t>(std::llround(mask_ratio * static_cast<double>(batch_size)));
  if (n_mask > 0 && masks.empty())
    throw ContractError("make_mixed_batch: empty mask dataset");
  if (n_mask < batch_size && images.empty())
    throw ContractError("make_mixed_batch: empty image dataset");

  // positions of mask items within the batch, then per-item draws
  std::vector<std::size_t> pos(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) pos[i] = i;
  rng.shuffle(pos);

  MixedBatch batch;
  batch.inputs.resize(batch_size);
  batch.tags.resize(batch_size);
  batch.ids.resize(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const bool is_mask = pos[i] < n_mask;
    if (is_mask) {
      const std::size_t idx = static_cast<std::size_t>(rng.below(masks.size()));
      batch.inputs[i] = replicate3(masks[idx]);
      batch.tags[i] = Domain::Mask;
      batch.ids[i] = static_cast<int>(idx);
    } else {
      const std::size_t idx = static_cast<std::size_t>(rng.below(images.size()));
      batch.inputs[i] = images[idx];
      batch.tags[i] = Domain::Image;
      batch.ids[i] = static_cast<int>(idx);
    }
  }
  return batch;
}

}  // namespace sflow
