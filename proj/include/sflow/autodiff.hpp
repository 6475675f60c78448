#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sflow/tensor.hpp"

// Reverse-mode autodiff over the tensor operation set, plus forward-mode
// directional derivatives (JVP) computed by linearizing the recorded tape —
// exact, not finite differences. One Tape per training step; a Tape is
// single-threaded, distinct tapes on distinct threads are independent.

namespace sflow {

class Tape;

// Differentiable value: a Tensor plus its node on the recording tape.
// id < 0 means constant (not recorded, zero upstream gradient).
struct Var {
  Tensor value;
  int id = -1;
  Tape* tape = nullptr;

  bool tracked() const { return id >= 0; }
  const Shape& shape() const { return value.shape(); }
};

// Constant (untracked) var; also what detach() returns.
inline Var vconst(const Tensor& t) { return Var{t, -1, nullptr}; }
inline Var detach(const Var& v) { return Var{v.value, -1, nullptr}; }

class Gradients {
 public:
  Gradients(std::vector<std::optional<Tensor>> g) : g_(std::move(g)) {}
  // gradient of a leaf; zero tensor if the leaf was never reached
  Tensor at(const Var& leaf) const;
  bool reached(const Var& leaf) const;

 private:
  std::vector<std::optional<Tensor>> g_;
};

class Tape {
 public:
  using VjpFn = std::function<void(const Tensor& g, class BackwardCtx& ctx)>;
  using JvpFn = std::function<Tensor(const std::array<const Tensor*, 3>&)>;

  Var leaf(const Tensor& value, bool requires_grad = true);

  // records a node; parents are node ids (<0 for constants)
  int record(std::array<int, 3> parents, int arity, VjpFn vjp, JvpFn jvp);

  // reverse pass from a scalar loss (seed 1)
  Gradients backward(const Var& loss);
  // reverse pass from explicit (var, seed) cotangents
  Gradients backward(const std::vector<std::pair<Var, Tensor>>& seeds);

  // forward-mode directional derivative of `out` given tangents on leaves
  Tensor forward_tangent(const Var& out,
                         const std::vector<std::pair<Var, Tensor>>& seeds);

  bool requires_grad(int id) const { return id >= 0 && nodes_[id].rg; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::array<int, 3> parents{-1, -1, -1};
    int arity = 0;
    bool rg = false;
    VjpFn vjp;
    JvpFn jvp;
  };
  std::vector<Node> nodes_;
  friend class BackwardCtx;
};

// accumulates gradient contributions into parent slots during backward
class BackwardCtx {
 public:
  BackwardCtx(std::vector<std::optional<Tensor>>& grads, const std::array<int, 3>& parents,
              const Tape& tape)
      : grads_(grads), parents_(parents), tape_(tape) {}
  // adds `t` to the gradient of parent slot `slot` (no-op for constants
  // and for subgraphs that cannot reach a requires-grad leaf)
  void add(int slot, const Tensor& t);
  bool wants(int slot) const;

 private:
  std::vector<std::optional<Tensor>>& grads_;
  const std::array<int, 3>& parents_;
  const Tape& tape_;
};

// ------------------------------------------------------------------ operators
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var divide(const Var& a, const Var& b);
Var affine(const Var& x, double a, double b);  // a*x + b
Var sigmoid(const Var& x);
Var relu(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
Var abs(const Var& x);
Var sqrt(const Var& x);
Var clamp(const Var& x, double lo, double hi);
Var conv2d(const Var& input, const Var& kernel, int padding);
Var global_avg_pool(const Var& x);
Var avg_pool2(const Var& x);
Var bilinear_upsample(const Var& x, int factor);
Var local_mean3(const Var& x);
Var concat_ch(const std::vector<Var>& xs);  // stack along channel axis
Var real_ifft2(const Var& re, const Var& im);
Var sum_all(const Var& x);   // -> rank-0
Var mean_all(const Var& x);  // -> rank-0
Var sum_axis(const Var& x, std::size_t axis);
Var reshape(const Var& x, Shape s);

inline Var square(const Var& x) { return mul(x, x); }
inline Var add(const Var& a, const Tensor& b) { return add(a, vconst(b)); }
inline Var sub(const Var& a, const Tensor& b) { return sub(a, vconst(b)); }
inline Var sub(const Tensor& a, const Var& b) { return sub(vconst(a), b); }
inline Var mul(const Var& a, const Tensor& b) { return mul(a, vconst(b)); }

// ------------------------------------------------------------------ jvp / fd

// Directional derivative of f at x along dir, by dual-number forward mode.
Tensor jvp(const std::function<Var(Tape&, const Var&)>& f, const Tensor& x,
           const Tensor& dir);

// ------------------------------------------------------------- grad_check

struct GradCheckEntry {
  std::size_t input;
  std::size_t flat_index;
  double analytic;
  double numeric;
  double rel_err;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t elements_checked = 0;
  std::vector<GradCheckEntry> worst;  // a few highest-error entries
  bool pass(double tol) const { return max_rel_err <= tol; }
};

// Central differences (step 1e-5) against reverse-mode gradients, relative
// error |a-b| / max(1, |a|, |b|). Checks up to max_per_input elements per
// input, sampled deterministically when an input is larger than that.
GradCheckReport grad_check(
    const std::function<Var(Tape&, const std::vector<Var>&)>& f,
    const std::vector<Tensor>& xs, double step = 1e-5,
    std::size_t max_per_input = static_cast<std::size_t>(-1),
    std::uint64_t sample_seed = 1);

}  // namespace sflow
