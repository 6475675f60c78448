#pragma once

#include <cstddef>

// Low-level numeric kernels on contiguous f64 buffers. Every entry has a
// scalar reference implementation; on x86-64 an AVX2+FMA variant is selected
// at runtime when the CPU supports it. The two variants are equivalence-tested
// against each other (see tests/test_kernels.cpp). Select explicitly with
// set_backend() or the SPECTRAFLOW_SIMD env var (auto|scalar|avx2).

namespace sflow::kernels {

enum class Backend { Auto, Scalar, Avx2 };

struct Ops {
  const char* name;

  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  void (*relu)(const double* x, double* out, std::size_t n);
  // out[i] = g[i] where x[i] > 0, else 0
  void (*relu_grad)(const double* x, const double* g, double* out, std::size_t n);
  // out[i] = a * x[i] + b
  void (*affine)(const double* x, double a, double b, double* out, std::size_t n);
  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* x, std::size_t n);

  // Dense 2-D cross-correlation on a pre-padded input.
  //   out[co][y][x] = sum_{ci,ky,kx} ker[co][ci][ky][kx] * in[ci][y+ky][x+kx]
  // in: cin x hp x wp, ker: cout x cin x k x k, out: cout x hout x wout,
  // with hout = hp - k + 1, wout = wp - k + 1. Accumulation order over
  // (ci, ky, kx) is fixed per output element in the scalar path.
  void (*conv_fwd)(const double* in, int cin, int hp, int wp,
                   const double* ker, int cout, int k,
                   double* out, int hout, int wout);

  // Gradient of the above w.r.t. the kernel, accumulated into gker:
  //   gker[co][ci][ky][kx] += sum_{y,x} gout[co][y][x] * in[ci][y+ky][x+kx]
  void (*conv_gradk)(const double* in, int cin, int hp, int wp,
                     const double* gout, int cout, int k,
                     double* gker, int hout, int wout);

  // Fused AdamW update over one parameter buffer.
  //   m = b1*m + (1-b1)*g;  v = b2*v + (1-b2)*g*g
  //   p = p - lr*wd*p - lr * (m/bc1) / (sqrt(v/bc2) + eps)
  void (*adamw)(double* p, double* m, double* v, const double* g,
                double lr, double b1, double b2, double bc1, double bc2,
                double eps, double wd, std::size_t n);
};

const Ops& ops();

Backend active_backend();
void set_backend(Backend b);
bool avx2_available();

const Ops& scalar_ops();
#if defined(SFLOW_BUILD_AVX2)
const Ops& avx2_ops();
#endif

}  // namespace sflow::kernels
