#pragma once

#include <utility>
#include <vector>

#include "sflow/nn.hpp"

// Stage-1 latent-transport pretraining pieces: perturbation along the linear
// schedule, ordered time-pair sampling, the self-distilled regression target
// produced by a stop-gradient EMA head, and mixed image/mask batching.

namespace sflow {

// Perturbed latent along the linear schedule: z_t = (1-t) z0 + t eps,
// instantaneous velocity v = eps - z0. Always t >= s.
struct PerturbState {
  Tensor z0;
  Tensor eps;
  Tensor zt;
  double t = 0.0;
  double s = 0.0;
};

PerturbState perturb(const Tensor& z0, double t, double s, Rng& rng);
inline PerturbState perturb(const Tensor& z0, double t, Rng& rng) {
  return perturb(z0, t, t, rng);
}

// v = eps - z0
Tensor velocity(const PerturbState& st);

// (t, s) with t >= s: degenerate (s = t) with probability p_eq, otherwise
// the order statistics of two independent uniforms.
std::pair<double, double> sample_times(Rng& rng, double p_eq);

// two constant conditioning channels over an h x w grid
Tensor ts_channels(std::size_t h, std::size_t w, double t, double s);

// Small convolutional head h(z_t, t, s): 3x3 convs, latent width preserved,
// (t, s) entering as two broadcast channels. Discarded after Stage-1.
struct MeanFlowHead {
  ConvLayer c1, c2, c3;
  std::size_t latent_ch = 0;

  static MeanFlowHead init(std::size_t latent_ch, Rng& rng);
  void collect(ParamRegistry& reg, const std::string& prefix);

  // input is concat(z_t, t-channel, s-channel): (C+2) x h x w
  Var forward(StepVars& sv, const Var& input) const;
  Var forward(Tape& tape, const Var& input) const;  // constant params
  Tensor forward(const Tensor& input) const;

  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
};

// theta_minus <- decay * theta_minus + (1 - decay) * theta
void ema_update(const MeanFlowHead& online, MeanFlowHead& ema, double decay);

// Regression target: v - (t-s) * d/dt[h_ema(z_t, t, s)], where the total
// derivative runs along the trajectory (dz/dt = v, dt = 1, ds = 0) and is
// computed by forward-mode JVP through the stop-gradient head. Detached.
Tensor meanflow_target(const PerturbState& st, const MeanFlowHead& ema);

// mean over elements of |h(z_t,t,s) - target|^2; differentiable w.r.t. the
// online head parameters (and anything feeding zt), never the EMA head.
Var meanflow_loss(Tape& tape, StepVars& sv, const MeanFlowHead& head,
                  const MeanFlowHead& ema, const Var& zt, const PerturbState& st);

// --------------------------------------------------------------- mixed batch

enum class Domain { Image, Mask };

struct MixedBatch {
  std::vector<Tensor> inputs;  // each 3 x H x W, un-normalized
  std::vector<Domain> tags;
  std::vector<int> ids;  // index into the source dataset
};

// replicate a 1xHxW binary mask along the channel axis
Tensor replicate3(const Tensor& mask);

// round(mask_ratio * batch_size) items are channel-replicated masks drawn
// from `masks`; the rest are drawn from `images`. Deterministic under rng.
MixedBatch make_mixed_batch(const std::vector<Tensor>& images,
                            const std::vector<Tensor>& masks,
                            std::size_t batch_size, double mask_ratio, Rng& rng);

}  // namespace sflow
