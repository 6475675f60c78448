#include "sflow/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "sflow/kernels.hpp"

namespace sflow {

// ------------------------------------------------------------------ Gradients

Tensor Gradients::at(const Var& leaf) const {
  if (leaf.tracked() && static_cast<std::size_t>(leaf.id) < g_.size() &&
      g_[leaf.id].has_value())
    return *g_[leaf.id];
  return Tensor::zeros(leaf.value.shape());
}

bool Gradients::reached(const Var& leaf) const {
  return leaf.tracked() && static_cast<std::size_t>(leaf.id) < g_.size() &&
         g_[leaf.id].has_value();
}

// ----------------------------------------------------------------------- Tape

Var Tape::leaf(const Tensor& value, bool requires_grad) {
  Node n;
  n.arity = 0;
  n.rg = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{value, static_cast<int>(nodes_.size()) - 1, this};
}

int Tape::record(std::array<int, 3> parents, int arity, VjpFn vjp, JvpFn jvp) {
  Node n;
  n.parents = parents;
  n.arity = arity;
  n.rg = false;
  for (int i = 0; i < arity; ++i)
    if (parents[i] >= 0 && nodes_[parents[i]].rg) n.rg = true;
  n.vjp = std::move(vjp);
  n.jvp = std::move(jvp);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void BackwardCtx::add(int slot, const Tensor& t) {
  const int pid = parents_[slot];
  if (pid < 0 || !tape_.nodes_[pid].rg) return;
  auto& g = grads_[pid];
  if (!g.has_value())
    g = t;  // shares storage; accumulation below is functional
  else
    g = sflow::add(*g, t);
}

bool BackwardCtx::wants(int slot) const {
  const int pid = parents_[slot];
  return pid >= 0 && tape_.nodes_[pid].rg;
}

Gradients Tape::backward(const Var& loss) {
  if (loss.value.rank() != 0)
    throw ContractError("backward: loss must be scalar, got shape " +
                        loss.value.shape().str());
  return backward({{loss, Tensor::scalar(1.0)}});
}

Gradients Tape::backward(const std::vector<std::pair<Var, Tensor>>& seeds) {
  std::vector<std::optional<Tensor>> grads(nodes_.size());
  int top = -1;
  for (const auto& [v, seed] : seeds) {
    if (!v.tracked()) continue;
    if (v.tape != this) throw ContractError("backward: seed var from another tape");
    if (seed.shape() != v.value.shape())
      throw ShapeError("backward: seed shape " + seed.shape().str() +
                       " != var shape " + v.value.shape().str());
    auto& g = grads[v.id];
    g = g.has_value() ? sflow::add(*g, seed) : seed;
    top = std::max(top, v.id);
  }
  for (int id = top; id >= 0; --id) {
    if (!grads[id].has_value()) continue;
    Node& n = nodes_[id];
    if (n.arity == 0 || !n.vjp) continue;
    bool any = false;
    for (int i = 0; i < n.arity; ++i)
      if (n.parents[i] >= 0 && nodes_[n.parents[i]].rg) any = true;
    if (!any) continue;
    BackwardCtx ctx(grads, n.parents, *this);
    n.vjp(*grads[id], ctx);
    // interior gradients are not part of the result; free early unless leaf
    if (n.arity > 0) grads[id].reset();
  }
  return Gradients(std::move(grads));
}

Tensor Tape::forward_tangent(const Var& out,
                             const std::vector<std::pair<Var, Tensor>>& seeds) {
  if (!out.tracked()) return Tensor::zeros(out.value.shape());
  std::vector<std::optional<Tensor>> tang(out.id + 1);
  for (const auto& [v, dir] : seeds) {
    if (!v.tracked() || v.tape != this)
      throw ContractError("forward_tangent: seed var not on this tape");
    if (dir.shape() != v.value.shape())
      throw ShapeError("forward_tangent: direction shape mismatch");
    if (v.id <= out.id) tang[v.id] = dir;
  }
  for (int id = 0; id <= out.id; ++id) {
    Node& n = nodes_[id];
    if (n.arity == 0 || !n.jvp) continue;
    std::array<const Tensor*, 3> pt{nullptr, nullptr, nullptr};
    bool any = false;
    for (int i = 0; i < n.arity; ++i) {
      const int pid = n.parents[i];
      if (pid >= 0 && tang[pid].has_value()) {
        pt[i] = &*tang[pid];
        any = true;
      }
    }
    if (any) tang[id] = n.jvp(pt);
  }
  return tang[out.id].has_value() ? *tang[out.id] : Tensor::zeros(out.value.shape());
}

// ------------------------------------------------------------------ operators

namespace {

Tape* common_tape(const Var& a, const Var& b) {
  Tape* t = a.tape ? a.tape : b.tape;
  if (a.tape && b.tape && a.tape != b.tape)
    throw ContractError("operands recorded on different tapes");
  return t;
}

Var make(Tape* tape, Tensor value, std::array<int, 3> parents, int arity,
         Tape::VjpFn vjp, Tape::JvpFn jvp) {
  if (!tape) return vconst(value);
  const int id = tape->record(parents, arity, std::move(vjp), std::move(jvp));
  return Var{std::move(value), id, tape};
}

}  // namespace

Var add(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  Tensor out = add(a.value, b.value);
  const Shape sa = a.value.shape(), sb = b.value.shape();
  return make(
      t, std::move(out), {a.id, b.id, -1}, 2,
      [sa, sb](const Tensor& g, BackwardCtx& ctx) {
        if (ctx.wants(0)) ctx.add(0, reduce_to(g, sa));
        if (ctx.wants(1)) ctx.add(1, reduce_to(g, sb));
      },
      [sa, sb](const std::array<const Tensor*, 3>& pt) {
        if (pt[0] && pt[1]) return add(*pt[0], *pt[1]);
        // missing tangent is zero; broadcast to the output shape
        const Tensor& have = pt[0] ? *pt[0] : *pt[1];
        const Shape so = broadcast_shape(sa, sb);
        return have.shape() == so ? have : add(have, Tensor::zeros(so));
      });
}

Var sub(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  Tensor out = sub(a.value, b.value);
  const Shape sa = a.value.shape(), sb = b.value.shape();
  return make(
      t, std::move(out), {a.id, b.id, -1}, 2,
      [sa, sb](const Tensor& g, BackwardCtx& ctx) {
        if (ctx.wants(0)) ctx.add(0, reduce_to(g, sa));
        if (ctx.wants(1)) ctx.add(1, reduce_to(affine(g, -1.0, 0.0), sb));
      },
      [sa, sb](const std::array<const Tensor*, 3>& pt) {
        const Shape so = broadcast_shape(sa, sb);
        Tensor ta = pt[0] ? *pt[0] : Tensor::zeros(sa);
        Tensor tb = pt[1] ? *pt[1] : Tensor::zeros(sb);
        Tensor r = sub(ta, tb);
        return r.shape() == so ? r : add(r, Tensor::zeros(so));
      });
}

Var mul(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  Tensor out = mul(a.value, b.value);
  const Tensor av = a.value, bv = b.value;
  return make(
      t, std::move(out), {a.id, b.id, -1}, 2,
      [av, bv](const Tensor& g, BackwardCtx& ctx) {
        if (ctx.wants(0)) ctx.add(0, reduce_to(mul(g, bv), av.shape()));
        if (ctx.wants(1)) ctx.add(1, reduce_to(mul(g, av), bv.shape()));
      },
      [av, bv](const std::array<const Tensor*, 3>& pt) {
        std::optional<Tensor> r;
        if (pt[0]) r = mul(*pt[0], bv);
        if (pt[1]) {
          Tensor s = mul(av, *pt[1]);
          r = r.has_value() ? add(*r, s) : s;
        }
        return *r;
      });
}

Var divide(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  Tensor out = divide(a.value, b.value);
  const Tensor av = a.value, bv = b.value;
  return make(
      t, std::move(out), {a.id, b.id, -1}, 2,
      [av, bv](const Tensor& g, BackwardCtx& ctx) {
        if (ctx.wants(0)) ctx.add(0, reduce_to(divide(g, bv), av.shape()));
        if (ctx.wants(1))
          ctx.add(1, reduce_to(affine(divide(mul(g, av), mul(bv, bv)), -1.0, 0.0),
                               bv.shape()));
      },
      [av, bv](const std::array<const Tensor*, 3>& pt) {
        std::optional<Tensor> r;
        if (pt[0]) r = divide(*pt[0], bv);
        if (pt[1]) {
          Tensor s = affine(divide(mul(av, *pt[1]), mul(bv, bv)), -1.0, 0.0);
          r = r.has_value() ? add(*r, s) : s;
        }
        return *r;
      });
}

Var affine(const Var& x, double a, double b) {
  Tensor out = affine(x.value, a, b);
  return make(
      x.tape, std::move(out), {x.id, -1, -1}, 1,
      [a](const Tensor& g, BackwardCtx& ctx) { ctx.add(0, affine(g, a, 0.0)); },
      [a](const std::array<const Tensor*, 3>& pt) { return affine(*pt[0], a, 0.0); });
}

Var sigmoid(const Var& x) {
  Tensor out = sigmoid(x.value);
  const Tensor s = out;
  auto dsig = [s](const Tensor& u) {
    Tensor d(s.shape());
    for (std::size_t i = 0; i < s.size(); ++i)
      d.data()[i] = u[i] * s[i] * (1.0 - s[i]);
    return d;
  };
  return make(
      x.tape, std::move(out), {x.id, -1, -1}, 1,
      [dsig](const Tensor& g, BackwardCtx& ctx) { ctx.add(0, dsig(g)); },
      [dsig](const std::array<const Tensor*, 3>& pt) { return dsig(*pt[0]); });
}

Var relu(const Var& x) {
  Tensor out = relu(x.value);
  const Tensor xv = x.value;
  auto drelu = [xv](const Tensor& u) {
    Tensor d(xv.shape());
    kernels::ops().relu_grad(xv.data(), u.data(), d.data(), xv.size());
    return d;
  };
  return make(
      x.tape, std::move(out), {x.id, -1, -1}, 1,
      [drelu](const Tensor& g, BackwardCtx& ctx) { ctx.add(0, drelu(g)); },
      [drelu](const std::array<const Tensor*, 3>& pt) { return drelu(*pt[0]); });
}

Var exp(const Var& x) {
  Tensor out = exp(x.value);
  const Tensor ov = out;
  return make(
      x.tape, std::move(out), {x.id, -1, -1}, 1,
      [ov](const Tensor& g, BackwardCtx& ctx) { ctx.add(0, mul(g, ov)); },
      [ov](const std::array<const Tensor*, 3>& pt) { return mul(*pt[0], ov); });
}

Var log(const Var& x) {
  Tensor out = log(x.value);
  const Tensor xv = x.value;
  return make(
      x.tape, std::move(out), {x.id, -1, -1}, 1,
      [xv](const Tensor& g, BackwardCtx& ctx) { ctx.add(0, divide(g, xv)); },
      [xv](const std::array<const Tensor*, 3>& pt) { return divide(*pt[0], xv); });
}

Var abs(const Var& x) {
  Tensor out = abs(x.value);
  const Tensor xv = x.value;
  auto dabs = [xv](const Tensor& u) {
    Tensor d(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double s = xv[i] > 0.0 ? 1.0 : (xv[i] < 0.0 ? -1.0 : 0.0);
      d.data()[i] = u[i] * s;
    }
    return d;
  };
  return make(
      x.tape, std::move(out), {x.id, -1, -1}, 1,
      [dabs](const Tensor& g, BackwardCtx& ctx) { ctx.add(0, dabs(g)); },
      [dabs](const std::array<const Tensor*, 3>& pt) { return dabs(*pt[0]); });
}

Var sqrt(const Var& x) {
  Tensor out = sqrt(x.value);
  const Tensor ov = out;
  auto dsqrt = [ov](const Tensor& u) {
    Tensor d(ov.shape());
    for (std::size_t i = 0; i < ov.size(); ++i) d.data()[i] = 0.5 * u[i] / ov[i];
    return d;
  };
  return make(
      x.tape, std::move(out), {x.id, -1, -1}, 1,
      [dsqrt](const Tensor& g, BackwardCtx& ctx) { ctx.add(0, dsqrt(g)); },
      [dsqrt](const std::array<const Tensor*, 3>& pt) { return dsqrt(*pt[0]); });
}

Var clamp(const Var& x, double lo, double hi) {
  Tensor out = clamp(x.value, lo, hi);
  const Tensor xv = x.value;
  auto dclamp = [xv, lo, hi](const Tensor& u) {
    Tensor d(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i)
      d.data()[i] = (xv[i] > lo && xv[i] < hi) ? u[i] : 0.0;
    return d;
  };
  return make(
      x.tape, std::move(out), {x.id, -1, -1}, 1,
      [dclamp](const Tensor& g, BackwardCtx& ctx) { ctx.add(0, dclamp(g)); },
      [dclamp](const std::array<const Tensor*, 3>& pt) { return dclamp(*pt[0]); });
}

Var conv2d(const Var& input, const Var& kernel, int padding) {
  Tape* t = common_tape(input, kernel);
  Tensor out = conv2d(input.value, kernel.value, padding);
  const Tensor xv = input.value, kv = kernel.value;
  const int k = static_cast<int>(kv.shape()[2]);
  return make(
      t, std::move(out), {input.id, kernel.id, -1}, 2,
      [xv, kv, k, padding](const Tensor& g, BackwardCtx& ctx) {
        if (ctx.wants(0)) {
          // grad wrt input: full-correlation with the flipped, transposed kernel
          Tensor gp = pad_spatial(g, k - 1);
          Tensor gin_pad = conv2d(gp, flip_transpose_kernel(kv), 0);
          ctx.add(0, crop_spatial(gin_pad, padding));
        }
        if (ctx.wants(1)) {
          Tensor pin = pad_spatial(xv, padding);
          Tensor gk = Tensor::zeros(kv.shape());
          kernels::ops().conv_gradk(
              pin.data(), static_cast<int>(pin.shape()[0]),
              static_cast<int>(pin.shape()[1]), static_cast<int>(pin.shape()[2]),
              g.data(), static_cast<int>(kv.shape()[0]), k, gk.data(),
              static_cast<int>(g.shape()[1]), static_cast<int>(g.shape()[2]));
          ctx.add(1, gk);
        }
      },
      [xv, kv, padding](const std::array<const Tensor*, 3>& pt) {
        std::optional<Tensor> r;
        if (pt[0]) r = conv2d(*pt[0], kv, padding);
        if (pt[1]) {
          Tensor s = conv2d(xv, *pt[1], padding);
          r = r.has_value() ? add(*r, s) : s;
        }
        return *r;
      });
}

Var global_avg_pool(const Var& x) {
  Tensor out = global_avg_pool(x.value);
  const Shape xs = x.value.shape();
  return make(
      x.tape, std::move(out), {x.id, -1, -1}, 1,
      [xs](const Tensor& g, BackwardCtx& ctx) {
        const std::size_t c = xs.rank == 3 ? xs.d[0] : 1;
        const std::size_t hw = xs.rank == 3 ? xs.d[1] * xs.d[2] : xs.d[0] * xs.d[1];
        Tensor gin(xs);
        for (std::size_t ci = 0; ci < c; ++ci)
          std::fill(gin.data() + ci * hw, gin.data() + (ci + 1) * hw,
                    g[ci] / static_cast<double>(hw));
        ctx.add(0, gin);
      },
      [](const std::array<const Tensor*, 3>& pt) { return global_avg_pool(*pt[0]); });
}

Var avg_pool2(const Var& x) {
  Tensor out = avg_pool2(x.value);
  const Shape xs = x.value.shape();
  return make(
      x.tape, std::move(out), {x.id, -1, -1}, 1,
      [xs](const Tensor& g, BackwardCtx& ctx) {
        Tensor gin(xs);
        const std::size_t c = xs.d[0], h = xs.d[1], w = xs.d[2];
        for (std::size_t ci = 0; ci < c; ++ci)
          for (std::size_t y = 0; y < h / 2; ++y)
            for (std::size_t xo = 0; xo < w / 2; ++xo) {
              const double v = 0.25 * g[(ci * (h / 2) + y) * (w / 2) + xo];
              double* r0 = gin.data() + (ci * h + 2 * y) * w + 2 * xo;
              r0[0] += v;
              r0[1] += v;
              r0[w] += v;
              r0[w + 1] += v;
            }
        ctx.add(0, gin);
      },
      [](const std::array<const Tensor*, 3>& pt) { return avg_pool2(*pt[0]); });
}

namespace {

// adjoint of bilinear interpolation: scatter output cotangent to sources
Tensor bilinear_adjoint(const Tensor& g, const Shape& in_shape, int factor) {
  const std::size_t c = in_shape.rank == 3 ? in_shape.d[0] : 1;
  const std::size_t h = in_shape.rank == 3 ? in_shape.d[1] : in_shape.d[0];
  const std::size_t w = in_shape.rank == 3 ? in_shape.d[2] : in_shape.d[1];
  const std::size_t ho = h * factor, wo = w * factor;
  Tensor gin(in_shape);
  auto src = [&](std::size_t i, std::size_t n_in, std::size_t& i0, std::size_t& i1,
                 double& wt) {
    const double s = (static_cast<double>(i) + 0.5) / factor - 0.5;
    const double f = std::floor(s);
    const long lo = static_cast<long>(f);
    wt = s - f;
    i0 = static_cast<std::size_t>(std::clamp<long>(lo, 0, static_cast<long>(n_in) - 1));
    i1 = static_cast<std::size_t>(
        std::clamp<long>(lo + 1, 0, static_cast<long>(n_in) - 1));
  };
  for (std::size_t ci = 0; ci < c; ++ci) {
    const double* gp = g.data() + ci * ho * wo;
    double* ip = gin.data() + ci * h * w;
    for (std::size_t y = 0; y < ho; ++y) {
      std::size_t y0, y1;
      double fy;
      src(y, h, y0, y1, fy);
      for (std::size_t xo = 0; xo < wo; ++xo) {
        std::size_t x0, x1;
        double fx;
        src(xo, w, x0, x1, fx);
        const double v = gp[y * wo + xo];
        ip[y0 * w + x0] += v * (1.0 - fy) * (1.0 - fx);
        ip[y0 * w + x1] += v * (1.0 - fy) * fx;
        ip[y1 * w + x0] += v * fy * (1.0 - fx);
        ip[y1 * w + x1] += v * fy * fx;
      }
    }
  }
  return gin;
}

}  // namespace

Var bilinear_upsample(const Var& x, int factor) {
  Tensor out = bilinear_upsample(x.value, factor);
  const Shape xs = x.value.shape();
  return make(
      x.tape, std::move(out), {x.id, -1, -1}, 1,
      [xs, factor](const Tensor& g, BackwardCtx& ctx) {
        ctx.add(0, factor == 1 ? g : bilinear_adjoint(g, xs, factor));
      },
      [factor](const std::array<const Tensor*, 3>& pt) {
        return bilinear_upsample(*pt[0], factor);
      });
}

namespace {

// adjoint of the count-normalized 3x3 mean
Tensor local_mean3_adjoint(const Tensor& g) {
  const Shape s = g.shape();
  const std::size_t c = s.rank == 3 ? s.d[0] : 1;
  const std::size_t h = s.rank == 3 ? s.d[1] : s.d[0];
  const std::size_t w = s.rank == 3 ? s.d[2] : s.d[1];
  Tensor gin(s);
  for (std::size_t ci = 0; ci < c; ++ci) {
    const double* gp = g.data() + ci * h * w;
    double* ip = gin.data() + ci * h * w;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        int cnt = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const long yy = static_cast<long>(y) + dy, xx = static_cast<long>(x) + dx;
            if (yy >= 0 && xx >= 0 && yy < static_cast<long>(h) &&
                xx < static_cast<long>(w))
              ++cnt;
          }
        const double v = gp[y * w + x] / cnt;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const long yy = static_cast<long>(y) + dy, xx = static_cast<long>(x) + dx;
            if (yy >= 0 && xx >= 0 && yy < static_cast<long>(h) &&
                xx < static_cast<long>(w))
              ip[yy * w + xx] += v;
          }
      }
  }
  return gin;
}

}  // namespace

Var local_mean3(const Var& x) {
  Tensor out = local_mean3(x.value);
  return make(
      x.tape, std::move(out), {x.id, -1, -1}, 1,
      [](const Tensor& g, BackwardCtx& ctx) { ctx.add(0, local_mean3_adjoint(g)); },
      [](const std::array<const Tensor*, 3>& pt) { return local_mean3(*pt[0]); });
}

Var concat_ch(const std::vector<Var>& xs) {
  if (xs.empty() || xs.size() > 3)
    throw ContractError("concat_ch: expects 1..3 inputs");
  Tape* t = nullptr;
  std::size_t ctotal = 0;
  const std::size_t h = xs[0].value.shape()[1], w = xs[0].value.shape()[2];
  for (const auto& v : xs) {
    if (v.value.rank() != 3 || v.value.shape()[1] != h || v.value.shape()[2] != w)
      throw ShapeError("concat_ch: inputs must be CxHxW with equal spatial extents");
    ctotal += v.value.shape()[0];
    if (v.tape) {
      if (t && t != v.tape) throw ContractError("concat_ch: mixed tapes");
      t = v.tape;
    }
  }
  Tensor out(Shape{ctotal, h, w});
  std::array<int, 3> parents{-1, -1, -1};
  std::vector<std::size_t> channels(xs.size());
  std::size_t off = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const std::size_t n = xs[i].value.size();
    std::copy(xs[i].value.data(), xs[i].value.data() + n, out.data() + off);
    off += n;
    parents[i] = xs[i].id;
    channels[i] = xs[i].value.shape()[0];
  }
  const int arity = static_cast<int>(xs.size());
  return make(
      t, std::move(out), parents, arity,
      [channels, h, w](const Tensor& g, BackwardCtx& ctx) {
        std::size_t off = 0;
        for (std::size_t i = 0; i < channels.size(); ++i) {
          const std::size_t n = channels[i] * h * w;
          if (ctx.wants(static_cast<int>(i))) {
            Tensor gi(Shape{channels[i], h, w});
            std::copy(g.data() + off, g.data() + off + n, gi.data());
            ctx.add(static_cast<int>(i), gi);
          }
          off += n;
        }
      },
      [channels, h, w](const std::array<const Tensor*, 3>& pt) {
        std::size_t ctotal = 0;
        for (auto c : channels) ctotal += c;
        Tensor out(Shape{ctotal, h, w});
        std::size_t off = 0;
        for (std::size_t i = 0; i < channels.size(); ++i) {
          const std::size_t n = channels[i] * h * w;
          if (pt[i]) std::copy(pt[i]->data(), pt[i]->data() + n, out.data() + off);
          off += n;
        }
        return out;
      });
}

Var real_ifft2(const Var& re, const Var& im) {
  Tape* t = common_tape(re, im);
  Tensor out = real_ifft2(re.value, im.value);
  const Shape s = re.value.shape();
  const double n =
      static_cast<double>(s.d[s.rank - 2]) * static_cast<double>(s.d[s.rank - 1]);
  return make(
      t, std::move(out), {re.id, im.id, -1}, 2,
      [s, n](const Tensor& g, BackwardCtx& ctx) {
        // adjoint: (1/N) * unnormalized forward DFT of the real cotangent
        Tensor gre(s), gim(s);
        // forward DFT == conj(inverse DFT of conj); with imag = 0 this is
        // ifft with negated imag output, times N
        auto [br, bi] = ifft2_batched(g, Tensor::zeros(s));
        if (ctx.wants(0)) ctx.add(0, br);
        if (ctx.wants(1)) ctx.add(1, affine(bi, -1.0, 0.0));
      },
      [s](const std::array<const Tensor*, 3>& pt) {
        Tensor tr = pt[0] ? *pt[0] : Tensor::zeros(s);
        Tensor ti = pt[1] ? *pt[1] : Tensor::zeros(s);
        return real_ifft2(tr, ti);
      });
}

Var sum_all(const Var& x) {
  Tensor out = Tensor::scalar(sum(x.value));
  const Shape xs = x.value.shape();
  return make(
      x.tape, std::move(out), {x.id, -1, -1}, 1,
      [xs](const Tensor& g, BackwardCtx& ctx) {
        ctx.add(0, Tensor::full(xs, g.item()));
      },
      [](const std::array<const Tensor*, 3>& pt) {
        return Tensor::scalar(sum(*pt[0]));
      });
}

Var mean_all(const Var& x) {
  const double n = static_cast<double>(x.value.size());
  Tensor out = Tensor::scalar(sum(x.value) / n);
  const Shape xs = x.value.shape();
  return make(
      x.tape, std::move(out), {x.id, -1, -1}, 1,
      [xs, n](const Tensor& g, BackwardCtx& ctx) {
        ctx.add(0, Tensor::full(xs, g.item() / n));
      },
      [n](const std::array<const Tensor*, 3>& pt) {
        return Tensor::scalar(sum(*pt[0]) / n);
      });
}

namespace {

Tensor expand_axis(const Tensor& g, const Shape& target, std::size_t axis) {
  Tensor out(target);
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= target.d[i];
  for (std::size_t i = axis + 1; i < target.rank; ++i) inner *= target.d[i];
  const std::size_t n = target.d[axis];
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t k = 0; k < n; ++k)
      std::copy(g.data() + o * inner, g.data() + (o + 1) * inner,
                out.data() + (o * n + k) * inner);
  return out;
}

}  // namespace

Var sum_axis(const Var& x, std::size_t axis) {
  Tensor out = sum_axis(x.value, axis);
  const Shape xs = x.value.shape();
  return make(
      x.tape, std::move(out), {x.id, -1, -1}, 1,
      [xs, axis](const Tensor& g, BackwardCtx& ctx) {
        ctx.add(0, expand_axis(g, xs, axis));
      },
      [axis](const std::array<const Tensor*, 3>& pt) { return sum_axis(*pt[0], axis); });
}

Var reshape(const Var& x, Shape s) {
  Tensor out = x.value.reshaped(s);
  const Shape xs = x.value.shape();
  return make(
      x.tape, std::move(out), {x.id, -1, -1}, 1,
      [xs](const Tensor& g, BackwardCtx& ctx) { ctx.add(0, g.reshaped(xs)); },
      [s](const std::array<const Tensor*, 3>& pt) { return pt[0]->reshaped(s); });
}

// ------------------------------------------------------------------ jvp / fd

Tensor jvp(const std::function<Var(Tape&, const Var&)>& f, const Tensor& x,
           const Tensor& dir) {
  if (dir.shape() != x.shape())
    throw ShapeError("jvp: direction shape " + dir.shape().str() +
                     " != input shape " + x.shape().str());
  Tape tape;
  Var in = tape.leaf(x, false);
  Var out = f(tape, in);
  return tape.forward_tangent(out, {{in, dir}});
}

GradCheckReport grad_check(
    const std::function<Var(Tape&, const std::vector<Var>&)>& f,
    const std::vector<Tensor>& xs, double step, std::size_t max_per_input,
    std::uint64_t sample_seed) {
  // reverse-mode gradients
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(xs.size());
    for (const auto& x : xs) vars.push_back(tape.leaf(x, true));
    Var loss = f(tape, vars);
    if (loss.value.rank() != 0) throw ContractError("grad_check: f must be scalar");
    Gradients g = tape.backward(loss);
    for (const auto& v : vars) analytic.push_back(g.at(v));
  }

  auto eval = [&](const std::vector<Tensor>& inputs) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(inputs.size());
    for (const auto& x : inputs) vars.push_back(tape.leaf(x, false));
    return f(tape, vars).value.item();
  };

  GradCheckReport report;
  Rng rng(sample_seed);
  std::vector<Tensor> work;
  work.reserve(xs.size());
  for (const auto& x : xs) work.push_back(x.clone());

  for (std::size_t i = 0; i < xs.size(); ++i) {
    // deterministic subsample for large inputs
    std::vector<std::size_t> idx(xs[i].size());
    for (std::size_t j = 0; j < idx.size(); ++j) idx[j] = j;
    if (idx.size() > max_per_input) {
      rng.shuffle(idx);
      idx.resize(max_per_input);
    }
    for (std::size_t j : idx) {
      const double orig = work[i][j];
      work[i].data()[j] = orig + step;
      const double fp = eval(work);
      work[i].data()[j] = orig - step;
      const double fm = eval(work);
      work[i].data()[j] = orig;
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[i][j];
      const double rel =
          std::fabs(a - numeric) / std::max({1.0, std::fabs(a), std::fabs(numeric)});
      ++report.elements_checked;
      if (rel > report.max_rel_err) report.max_rel_err = rel;
      if (report.worst.size() < 5 ||
          rel > report.worst.back().rel_err) {
        report.worst.push_back({i, j, a, numeric, rel});
        std::sort(report.worst.begin(), report.worst.end(),
                  [](const auto& l, const auto& r) { return l.rel_err > r.rel_err; });
        if (report.worst.size() > 5) report.worst.resize(5);
      }
    }
  }
  return report;
}

}  // namespace sflow
