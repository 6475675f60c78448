#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sflow/autodiff.hpp"
#include "sflow/kernels.hpp"
#include "sflow/rng.hpp"
#include "sflow/tensor.hpp"

// Named-parameter plumbing shared by the MeanFlow head, decoder blocks and
// the encoder: modules own their tensors and register (name, pointer) pairs;
// a StepVars view turns registered parameters into tape leaves for one
// training step, honoring a freeze predicate.

namespace sflow {

class ParamRegistry {
 public:
  void add(std::string name, Tensor* t) {
    items_.emplace_back(std::move(name), t);
  }
  const std::vector<std::pair<std::string, Tensor*>>& items() const { return items_; }

  Tensor* find(const std::string& name) const {
    for (const auto& [n, t] : items_)
      if (n == name) return t;
    return nullptr;
  }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& [name, t] : items_) n += t->size();
    return n;
  }

 private:
  std::vector<std::pair<std::string, Tensor*>> items_;
};

// Per-step leaf Vars for registered parameters. Parameters whose name fails
// the trainable predicate become constant leaves (requires_grad = false).
class StepVars {
 public:
  StepVars(Tape& tape, const ParamRegistry& reg,
           const std::function<bool(const std::string&)>& trainable = nullptr) {
    for (const auto& [name, t] : reg.items()) {
      const bool rg = trainable ? trainable(name) : true;
      Var v = tape.leaf(*t, rg);
      vars_.emplace(t->data(), v);
      if (rg) trainables_.emplace_back(name, t, v);
    }
  }

  Var of(const Tensor& param) const {
    auto it = vars_.find(param.data());
    if (it == vars_.end())
      throw ContractError("StepVars: parameter not registered for this step");
    return it->second;
  }

  struct Trainable {
    std::string name;
    Tensor* param;
    Var var;
  };
  const std::vector<Trainable>& trainables() const { return trainables_; }

 private:
  std::unordered_map<const double*, Var> vars_;
  std::vector<Trainable> trainables_;
};

// 2-D convolution layer with bias, cross-correlation convention.
struct ConvLayer {
  Tensor w;  // [cout, cin, k, k]
  Tensor b;  // [cout, 1, 1]
  int pad = 0;

  static ConvLayer kaiming(std::size_t cin, std::size_t cout, std::size_t k,
                           int pad, Rng& rng) {
    ConvLayer l;
    l.w = Tensor::randn(Shape{cout, cin, k, k}, rng);
    const double scale = std::sqrt(2.0 / static_cast<double>(cin * k * k));
    for (std::size_t i = 0; i < l.w.size(); ++i) l.w.data()[i] *= scale;
    l.b = Tensor::zeros(Shape{cout, 1, 1});
    l.pad = pad;
    return l;
  }

  void collect(ParamRegistry& reg, const std::string& prefix) {
    reg.add(prefix + ".weight", &w);
    reg.add(prefix + ".bias", &b);
  }

  // traced forward with parameters taken from the step view
  Var operator()(StepVars& sv, const Var& x) const {
    return add(conv2d(x, sv.of(w), pad), sv.of(b));
  }
  // traced forward with constant (stop-gradient) parameters
  Var operator()(Tape&, const Var& x) const {
    return add(conv2d(x, vconst(w), pad), vconst(b));
  }
  // plain forward
  Tensor operator()(const Tensor& x) const { return add(conv2d(x, w, pad), b); }
};

inline void ema_update_tensor(Tensor& target, const Tensor& src, double decay) {
  if (target.shape() != src.shape())
    throw ShapeError("ema_update: shape mismatch " + target.shape().str() + " vs " +
                     src.shape().str());
  Tensor out = affine(target, decay, 0.0);
  kernels::ops().axpy(1.0 - decay, src.data(), out.data(), out.size());
  target = out;
}

}  // namespace sflow
