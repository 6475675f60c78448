#include "sflow/kernels.hpp"

#include <cmath>

// Reference kernels. Plain loops, no explicit FMA (the build disables
// fp-contract), per-element accumulation order is the contract the SIMD
// variants are tested against.

namespace sflow::kernels {
namespace {

void k_add(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void k_sub(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void k_mul(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void k_relu(const double* x, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void k_relu_grad(const double* x, const double* g, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? g[i] : 0.0;
}

void k_affine(const double* x, double a, double b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i] + b;
}

void k_axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double k_dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double k_sum(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

void k_conv_fwd(const double* in, int cin, int hp, int wp,
                const double* ker, int cout, int k,
                double* out, int hout, int wout) {
  for (int co = 0; co < cout; ++co) {
    double* oplane = out + static_cast<std::size_t>(co) * hout * wout;
    for (int y = 0; y < hout; ++y) {
      double* orow = oplane + static_cast<std::size_t>(y) * wout;
      for (int x = 0; x < wout; ++x) {
        double acc = 0.0;
        for (int ci = 0; ci < cin; ++ci) {
          const double* iplane = in + (static_cast<std::size_t>(ci) * hp) * wp;
          const double* kbase =
              ker + ((static_cast<std::size_t>(co) * cin + ci) * k) * k;
          for (int ky = 0; ky < k; ++ky) {
            const double* irow = iplane + static_cast<std::size_t>(y + ky) * wp + x;
            const double* krow = kbase + static_cast<std::size_t>(ky) * k;
            for (int kx = 0; kx < k; ++kx) acc += krow[kx] * irow[kx];
          }
        }
        orow[x] = acc;
      }
    }
  }
}

void k_conv_gradk(const double* in, int cin, int hp, int wp,
                  const double* gout, int cout, int k,
                  double* gker, int hout, int wout) {
  for (int co = 0; co < cout; ++co) {
    const double* gplane = gout + static_cast<std::size_t>(co) * hout * wout;
    for (int ci = 0; ci < cin; ++ci) {
      const double* iplane = in + (static_cast<std::size_t>(ci) * hp) * wp;
      double* kbase = gker + ((static_cast<std::size_t>(co) * cin + ci) * k) * k;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          double acc = 0.0;
          for (int y = 0; y < hout; ++y) {
            const double* grow = gplane + static_cast<std::size_t>(y) * wout;
            const double* irow =
                iplane + static_cast<std::size_t>(y + ky) * wp + kx;
            for (int x = 0; x < wout; ++x) acc += grow[x] * irow[x];
          }
          kbase[static_cast<std::size_t>(ky) * k + kx] += acc;
        }
      }
    }
  }
}

void k_adamw(double* p, double* m, double* v, const double* g,
             double lr, double b1, double b2, double bc1, double bc2,
             double eps, double wd, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] = p[i] * (1.0 - lr * wd) - lr * mhat / (std::sqrt(vhat) + eps);
  }
}

const Ops kScalarOps = {
    "scalar", k_add,  k_sub,  k_mul,      k_relu,      k_relu_grad, k_affine,
    k_axpy,   k_dot,  k_sum,  k_conv_fwd, k_conv_gradk, k_adamw,
};

}  // namespace

const Ops& scalar_ops() { return kScalarOps; }

}  // namespace sflow::kernels
