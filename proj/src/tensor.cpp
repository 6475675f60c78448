#include "sflow/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sflow/kernels.hpp"

namespace sflow {

// ---------------------------------------------------------------------- Shape

Shape::Shape(std::initializer_list<std::size_t> dims) {
  if (dims.size() > 4) throw ShapeError("rank > 4 not supported");
  rank = static_cast<std::uint8_t>(dims.size());
  std::size_t i = 0;
  for (auto v : dims) d[i++] = v;
}

std::size_t Shape::numel() const {
  std::size_t n = 1;
  for (std::size_t i = 0; i < rank; ++i) n *= d[i];
  return n;
}

bool Shape::operator==(const Shape& o) const {
  if (rank != o.rank) return false;
  for (std::size_t i = 0; i < rank; ++i)
    if (d[i] != o.d[i]) return false;
  return true;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < rank; ++i) os << (i ? "," : "") << d[i];
  os << "]";
  return os.str();
}

// --------------------------------------------------------------------- Tensor

Tensor::Tensor(Shape s) : shape_(s), size_(s.numel()) {
  data_ = std::shared_ptr<double[]>(new double[size_]());
}

Tensor Tensor::scalar(double v) {
  Tensor t{Shape{}};
  t.data()[0] = v;
  return t;
}

Tensor Tensor::full(Shape s, double v) {
  Tensor t(s);
  std::fill(t.data(), t.data() + t.size(), v);
  return t;
}

Tensor Tensor::from(Shape s, std::vector<double> values) {
  if (s.numel() != values.size())
    throw ShapeError("from(): " + s.str() + " needs " + std::to_string(s.numel()) +
                     " values, got " + std::to_string(values.size()));
  Tensor t(s);
  std::copy(values.begin(), values.end(), t.data());
  return t;
}

Tensor Tensor::randn(Shape s, Rng& rng) {
  Tensor t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
  return t;
}

Tensor Tensor::uniform(Shape s, Rng& rng, double lo, double hi) {
  Tensor t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(lo, hi);
  return t;
}

double Tensor::item() const {
  if (size_ != 1) throw ShapeError("item() on tensor of size " + std::to_string(size_));
  return data_.get()[0];
}

Tensor Tensor::clone() const {
  Tensor t(shape_);
  std::copy(data(), data() + size_, t.data());
  return t;
}

Tensor Tensor::reshaped(Shape s) const {
  if (s.numel() != size_)
    throw ShapeError("reshape " + shape_.str() + " -> " + s.str());
  Tensor t = *this;
  t.shape_ = s;
  return t;
}

bool Tensor::all_finite() const {
  for (std::size_t i = 0; i < size_; ++i)
    if (!std::isfinite(data_.get()[i])) return false;
  return true;
}

// ---------------------------------------------------------------- broadcast

Shape broadcast_shape(const Shape& a, const Shape& b) {
  Shape out;
  out.rank = std::max(a.rank, b.rank);
  for (std::size_t i = 0; i < out.rank; ++i) {
    // right-aligned extents
    const std::size_t ai = i + a.rank >= out.rank ? a.d[i + a.rank - out.rank] : 1;
    const std::size_t bi = i + b.rank >= out.rank ? b.d[i + b.rank - out.rank] : 1;
    if (ai != bi && ai != 1 && bi != 1)
      throw ShapeError("cannot broadcast " + a.str() + " with " +
                       b.str());
    out.d[i] = std::max(ai, bi);
  }
  return out;
}

namespace {

// strides of `s` right-aligned into a rank-`out_rank` frame, with stride 0
// on broadcast axes
std::array<std::size_t, 4> aligned_strides(const Shape& s, std::uint8_t out_rank,
                                           const Shape& out) {
  std::array<std::size_t, 4> st{0, 0, 0, 0};
  std::size_t stride = 1;
  for (int i = static_cast<int>(s.rank) - 1; i >= 0; --i) {
    const std::size_t axis = static_cast<std::size_t>(i) + out_rank - s.rank;
    st[axis] = (s.d[i] == 1 && out.d[axis] != 1) ? 0 : stride;
    stride *= s.d[i];
  }
  return st;
}

template <typename F>
Tensor binary_broadcast(const Tensor& a, const Tensor& b, F&& f) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape());
  Tensor out(out_shape);
  const auto sa = aligned_strides(a.shape(), out_shape.rank, out_shape);
  const auto sb = aligned_strides(b.shape(), out_shape.rank, out_shape);
  std::array<std::size_t, 4> ext{1, 1, 1, 1};
  for (std::size_t i = 0; i < out_shape.rank; ++i) ext[4 - out_shape.rank + i] = out_shape.d[i];
  std::array<std::size_t, 4> stA{0, 0, 0, 0}, stB{0, 0, 0, 0};
  for (std::size_t i = 0; i < out_shape.rank; ++i) {
    stA[4 - out_shape.rank + i] = sa[i];
    stB[4 - out_shape.rank + i] = sb[i];
  }
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  std::size_t idx = 0;
  for (std::size_t i0 = 0; i0 < ext[0]; ++i0)
    for (std::size_t i1 = 0; i1 < ext[1]; ++i1)
      for (std::size_t i2 = 0; i2 < ext[2]; ++i2) {
        const double* ra = pa + i0 * stA[0] + i1 * stA[1] + i2 * stA[2];
        const double* rb = pb + i0 * stB[0] + i1 * stB[1] + i2 * stB[2];
        if (stA[3] == 1 && stB[3] == 1) {
          for (std::size_t i3 = 0; i3 < ext[3]; ++i3) po[idx++] = f(ra[i3], rb[i3]);
        } else {
          for (std::size_t i3 = 0; i3 < ext[3]; ++i3)
            po[idx++] = f(ra[i3 * stA[3]], rb[i3 * stB[3]]);
        }
      }
  return out;
}

}  // namespace

// --------------------------------------------------------------- elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) {
    Tensor out(a.shape());
    kernels::ops().add(a.data(), b.data(), out.data(), a.size());
    return out;
  }
  return binary_broadcast(a, b, [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) {
    Tensor out(a.shape());
    kernels::ops().sub(a.data(), b.data(), out.data(), a.size());
    return out;
  }
  return binary_broadcast(a, b, [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) {
    Tensor out(a.shape());
    kernels::ops().mul(a.data(), b.data(), out.data(), a.size());
    return out;
  }
  return binary_broadcast(a, b, [](double x, double y) { return x * y; });
}

Tensor divide(const Tensor& a, const Tensor& b) {
  return binary_broadcast(a, b, [](double x, double y) { return x / y; });
}

Tensor affine(const Tensor& x, double a, double b) {
  Tensor out(x.shape());
  kernels::ops().affine(x.data(), a, b, out.data(), x.size());
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    out.data()[i] = 1.0 / (1.0 + std::exp(-x[i]));
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out(x.shape());
  kernels::ops().relu(x.data(), out.data(), x.size());
  return out;
}

Tensor exp(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = std::exp(x[i]);
  return out;
}

Tensor log(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = std::log(x[i]);
  return out;
}

Tensor abs(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = std::fabs(x[i]);
  return out;
}

Tensor sqrt(const Tensor& x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = std::sqrt(x[i]);
  return out;
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    out.data()[i] = std::min(hi, std::max(lo, x[i]));
  return out;
}

Tensor reduce_to(const Tensor& g, const Shape& target) {
  if (g.shape() == target) return g;
  if (broadcast_shape(g.shape(), target) != g.shape())
    throw ShapeError("reduce_to: " + g.shape().str() + " does not cover " +
                     target.str());
  Tensor out(target);
  const auto st = aligned_strides(target, g.shape().rank, g.shape());
  std::array<std::size_t, 4> ext{1, 1, 1, 1};
  std::array<std::size_t, 4> to{0, 0, 0, 0};
  const std::uint8_t r = g.shape().rank;
  for (std::size_t i = 0; i < r; ++i) {
    ext[4 - r + i] = g.shape().d[i];
    to[4 - r + i] = st[i];
  }
  const double* pg = g.data();
  double* po = out.data();
  std::size_t idx = 0;
  for (std::size_t i0 = 0; i0 < ext[0]; ++i0)
    for (std::size_t i1 = 0; i1 < ext[1]; ++i1)
      for (std::size_t i2 = 0; i2 < ext[2]; ++i2)
        for (std::size_t i3 = 0; i3 < ext[3]; ++i3)
          po[i0 * to[0] + i1 * to[1] + i2 * to[2] + i3 * to[3]] += pg[idx++];
  return out;
}

// ---------------------------------------------------------------- reductions

double sum(const Tensor& x) { return kernels::ops().sum(x.data(), x.size()); }

double mean(const Tensor& x) { return sum(x) / static_cast<double>(x.size()); }

double max_abs(const Tensor& x) {
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::fabs(x[i]));
  return m;
}

Tensor sum_axis(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) throw ShapeError("sum_axis: axis out of range");
  Shape out_shape;
  out_shape.rank = static_cast<std::uint8_t>(x.rank() - 1);
  for (std::size_t i = 0, j = 0; i < x.rank(); ++i)
    if (i != axis) out_shape.d[j++] = x.shape().d[i];
  Tensor out(out_shape);
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.shape().d[i];
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.shape().d[i];
  const std::size_t n = x.shape().d[axis];
  const double* px = x.data();
  double* po = out.data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t k = 0; k < n; ++k)
      kernels::ops().axpy(1.0, px + (o * n + k) * inner, po + o * inner, inner);
  return out;
}

// --------------------------------------------------------------- conv / pool

namespace {

// wrap a rank-2 HxW tensor as 1xHxW
Shape as_chw(const Shape& s) {
  if (s.rank == 3) return s;
  if (s.rank == 2) return Shape{1, s.d[0], s.d[1]};
  throw ShapeError("expected CxHxW or HxW, got " + s.str());
}

Tensor pad_chw(const Tensor& x, std::size_t c, std::size_t h, std::size_t w, int p) {
  if (p == 0) return x;
  Tensor out(Shape{c, h + 2 * p, w + 2 * p});
  const std::size_t wp = w + 2 * p;
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t y = 0; y < h; ++y)
      std::copy(x.data() + (ci * h + y) * w, x.data() + (ci * h + y) * w + w,
                out.data() + (ci * (h + 2 * p) + y + p) * wp + p);
  return out;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, int padding) {
  const Shape is = as_chw(input.shape());
  if (kernel.rank() != 4) throw ShapeError("conv2d kernel must be CoutxCinxkxk");
  const std::size_t cin = is.d[0], h = is.d[1], w = is.d[2];
  const std::size_t cout = kernel.shape().d[0];
  const std::size_t k = kernel.shape().d[2];
  if (kernel.shape().d[1] != cin)
    throw ShapeError("conv2d: kernel cin " + std::to_string(kernel.shape().d[1]) +
                     " != input cin " + std::to_string(cin));
  if (kernel.shape().d[3] != k || k % 2 == 0)
    throw ContractError("conv2d: kernel must be square with odd k");
  if (padding != 0 && padding != static_cast<int>(k / 2))
    throw ContractError("conv2d: padding must be 0 or k/2");
  const std::size_t hout = h + 2 * padding - k + 1;
  const std::size_t wout = w + 2 * padding - k + 1;
  if (h + 2 * padding < k || w + 2 * padding < k)
    throw ShapeError("conv2d: input smaller than kernel");

  const Tensor padded =
      pad_chw(input.shape().rank == 2 ? input.reshaped(is) : input, cin, h, w, padding);
  Tensor out(Shape{cout, hout, wout});
  kernels::ops().conv_fwd(padded.data(), static_cast<int>(cin),
                          static_cast<int>(h + 2 * padding),
                          static_cast<int>(w + 2 * padding), kernel.data(),
                          static_cast<int>(cout), static_cast<int>(k), out.data(),
                          static_cast<int>(hout), static_cast<int>(wout));
  return out;
}

Tensor pad_spatial(const Tensor& x, int p) {
  const Shape is = as_chw(x.shape());
  if (p == 0) return x;
  return pad_chw(x.rank() == 2 ? x.reshaped(is) : x, is.d[0], is.d[1], is.d[2], p);
}

Tensor crop_spatial(const Tensor& x, int p) {
  if (p == 0) return x;
  const Shape is = as_chw(x.shape());
  const std::size_t c = is.d[0], h = is.d[1], w = is.d[2];
  if (h < 2 * static_cast<std::size_t>(p) || w < 2 * static_cast<std::size_t>(p))
    throw ShapeError("crop_spatial: border larger than tensor");
  const std::size_t ho = h - 2 * p, wo = w - 2 * p;
  Tensor out(Shape{c, ho, wo});
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t y = 0; y < ho; ++y)
      std::copy(x.data() + (ci * h + y + p) * w + p,
                x.data() + (ci * h + y + p) * w + p + wo,
                out.data() + (ci * ho + y) * wo);
  return out;
}

Tensor flip_transpose_kernel(const Tensor& k) {
  if (k.rank() != 4) throw ShapeError("flip_transpose_kernel: rank-4 expected");
  const std::size_t co = k.shape()[0], ci = k.shape()[1], kk = k.shape()[2];
  Tensor out(Shape{ci, co, kk, kk});
  for (std::size_t a = 0; a < co; ++a)
    for (std::size_t b = 0; b < ci; ++b)
      for (std::size_t y = 0; y < kk; ++y)
        for (std::size_t x = 0; x < kk; ++x)
          out.data()[((b * co + a) * kk + (kk - 1 - y)) * kk + (kk - 1 - x)] =
              k.at(a, b, y, x);
  return out;
}

Tensor global_avg_pool(const Tensor& x) {
  const Shape is = as_chw(x.shape());
  const std::size_t c = is.d[0], hw = is.d[1] * is.d[2];
  if (hw == 0) throw ContractError("global_avg_pool: empty spatial extent");
  Tensor out(Shape{c});
  for (std::size_t ci = 0; ci < c; ++ci)
    out.data()[ci] = kernels::ops().sum(x.data() + ci * hw, hw) / static_cast<double>(hw);
  return out;
}

Tensor avg_pool2(const Tensor& x) {
  const Shape is = as_chw(x.shape());
  const std::size_t c = is.d[0], h = is.d[1], w = is.d[2];
  if (h % 2 != 0 || w % 2 != 0) throw ShapeError("avg_pool2: extents must be even");
  Tensor out(Shape{c, h / 2, w / 2});
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t y = 0; y < h / 2; ++y)
      for (std::size_t xo = 0; xo < w / 2; ++xo) {
        const double* r0 = x.data() + (ci * h + 2 * y) * w + 2 * xo;
        const double* r1 = r0 + w;
        out.data()[(ci * (h / 2) + y) * (w / 2) + xo] =
            0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
      }
  return out;
}

Tensor bilinear_upsample(const Tensor& x, int factor) {
  if (factor < 1) throw ContractError("bilinear_upsample: factor must be >= 1");
  if (factor == 1) return x;
  const Shape is = as_chw(x.shape());
  const std::size_t c = is.d[0], h = is.d[1], w = is.d[2];
  const std::size_t ho = h * factor, wo = w * factor;
  Tensor out(x.rank() == 2 ? Shape{ho, wo} : Shape{c, ho, wo});

  // precompute per-axis source indices/weights (align-corners=false)
  std::vector<std::size_t> y0(ho), y1(ho), x0(wo), x1(wo);
  std::vector<double> wy(ho), wx(wo);
  auto fill = [&](std::size_t n_out, std::size_t n_in, std::vector<std::size_t>& i0,
                  std::vector<std::size_t>& i1, std::vector<double>& wgt) {
    for (std::size_t i = 0; i < n_out; ++i) {
      const double src = (static_cast<double>(i) + 0.5) / factor - 0.5;
      const double f = std::floor(src);
      const long lo = static_cast<long>(f);
      wgt[i] = src - f;
      i0[i] = static_cast<std::size_t>(std::clamp<long>(lo, 0, static_cast<long>(n_in) - 1));
      i1[i] = static_cast<std::size_t>(
          std::clamp<long>(lo + 1, 0, static_cast<long>(n_in) - 1));
    }
  };
  fill(ho, h, y0, y1, wy);
  fill(wo, w, x0, x1, wx);

  for (std::size_t ci = 0; ci < c; ++ci) {
    const double* ip = x.data() + ci * h * w;
    double* op = out.data() + ci * ho * wo;
    for (std::size_t y = 0; y < ho; ++y) {
      const double* r0 = ip + y0[y] * w;
      const double* r1 = ip + y1[y] * w;
      const double fy = wy[y];
      for (std::size_t xi = 0; xi < wo; ++xi) {
        const double top = r0[x0[xi]] * (1.0 - wx[xi]) + r0[x1[xi]] * wx[xi];
        const double bot = r1[x0[xi]] * (1.0 - wx[xi]) + r1[x1[xi]] * wx[xi];
        op[y * wo + xi] = top * (1.0 - fy) + bot * fy;
      }
    }
  }
  return out;
}

Tensor local_mean3(const Tensor& x) {
  const Shape is = as_chw(x.shape());
  const std::size_t c = is.d[0], h = is.d[1], w = is.d[2];
  Tensor out(x.shape());
  for (std::size_t ci = 0; ci < c; ++ci) {
    const double* ip = x.data() + ci * h * w;
    double* op = out.data() + ci * h * w;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xi = 0; xi < w; ++xi) {
        double s = 0.0;
        int cnt = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const long yy = static_cast<long>(y) + dy;
            const long xx = static_cast<long>(xi) + dx;
            if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) ||
                xx >= static_cast<long>(w))
              continue;
            s += ip[yy * w + xx];
            ++cnt;
          }
        op[y * w + xi] = s / cnt;
      }
  }
  return out;
}

// ----------------------------------------------------------------------- fft

namespace {

// direct 1-D DFT along the last axis of a batch of rows
// sign = -1: forward kernel exp(-i theta); sign = +1: inverse kernel
void dft_rows(const double* re, const double* im, double* ore, double* oim,
              std::size_t rows, std::size_t n, double sign) {
  std::vector<double> cos_tab(n * n), sin_tab(n * n);
  const double two_pi = 6.283185307179586476925286766559;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t j = 0; j < n; ++j) {
      // reduce k*j mod n to keep angles in [0, 2*pi)
      const double ang = two_pi * static_cast<double>((k * j) % n) / static_cast<double>(n);
      cos_tab[k * n + j] = std::cos(ang);
      sin_tab[k * n + j] = sign * std::sin(ang);
    }
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = re + r * n;
    const double* xi = im + r * n;
    double* yr = ore + r * n;
    double* yi = oim + r * n;
    for (std::size_t k = 0; k < n; ++k) {
      double sre = 0.0, sim = 0.0;
      const double* ct = cos_tab.data() + k * n;
      const double* st = sin_tab.data() + k * n;
      for (std::size_t j = 0; j < n; ++j) {
        sre += xr[j] * ct[j] - xi[j] * st[j];
        sim += xr[j] * st[j] + xi[j] * ct[j];
      }
      yr[k] = sre;
      yi[k] = sim;
    }
  }
}

void transpose_plane(const double* in, double* out, std::size_t h, std::size_t w) {
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) out[x * h + y] = in[y * w + x];
}

// full 2-D DFT of each trailing HxW plane
void dft2_planes(const Tensor& re, const Tensor& im, Tensor& ore, Tensor& oim,
                 double sign, double scale) {
  const std::size_t rnk = re.rank();
  const std::size_t h = re.shape().d[rnk - 2];
  const std::size_t w = re.shape().d[rnk - 1];
  std::size_t planes = re.size() / (h * w);
  std::vector<double> tr(h * w), ti(h * w), ur(h * w), ui(h * w);
  for (std::size_t p = 0; p < planes; ++p) {
    const double* pr = re.data() + p * h * w;
    const double* pi = im.data() + p * h * w;
    double* qr = ore.data() + p * h * w;
    double* qi = oim.data() + p * h * w;
    // rows
    dft_rows(pr, pi, tr.data(), ti.data(), h, w, sign);
    // columns via transpose
    transpose_plane(tr.data(), ur.data(), h, w);
    transpose_plane(ti.data(), ui.data(), h, w);
    dft_rows(ur.data(), ui.data(), tr.data(), ti.data(), w, h, sign);
    transpose_plane(tr.data(), ur.data(), w, h);
    transpose_plane(ti.data(), ui.data(), w, h);
    for (std::size_t i = 0; i < h * w; ++i) {
      qr[i] = ur[i] * scale;
      qi[i] = ui[i] * scale;
    }
  }
}

void check_complex_pair(const Tensor& re, const Tensor& im, bool rank2_only) {
  if (re.shape() != im.shape())
    throw ShapeError("fft: real/imag shapes differ: " +
                     re.shape().str() + " vs " +
                     im.shape().str());
  if (rank2_only && re.rank() != 2) throw ShapeError("fft2 expects an HxW tensor");
  if (re.rank() < 2) throw ShapeError("fft: rank must be >= 2");
  if (re.size() == 0) throw ShapeError("fft: empty tensor");
}

}  // namespace

std::pair<Tensor, Tensor> fft2(const Tensor& re, const Tensor& im) {
  check_complex_pair(re, im, true);
  Tensor ore(re.shape()), oim(re.shape());
  dft2_planes(re, im, ore, oim, -1.0, 1.0);
  return {ore, oim};
}

std::pair<Tensor, Tensor> ifft2(const Tensor& re, const Tensor& im) {
  check_complex_pair(re, im, true);
  Tensor ore(re.shape()), oim(re.shape());
  const std::size_t n = re.size();
  dft2_planes(re, im, ore, oim, 1.0, 1.0 / static_cast<double>(n));
  return {ore, oim};
}

std::pair<Tensor, Tensor> ifft2_batched(const Tensor& re, const Tensor& im) {
  check_complex_pair(re, im, false);
  Tensor ore(re.shape()), oim(re.shape());
  const std::size_t rnk = re.rank();
  const double n =
      static_cast<double>(re.shape().d[rnk - 2] * re.shape().d[rnk - 1]);
  dft2_planes(re, im, ore, oim, 1.0, 1.0 / n);
  return {ore, oim};
}

Tensor real_ifft2(const Tensor& re, const Tensor& im) {
  return ifft2_batched(re, im).first;
}

}  // namespace sflow
