#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sflow/error.hpp"
#include "sflow/rng.hpp"

namespace sflow {

// Shapes are rank <= 4, row-major. A rank-0 shape is a scalar (1 element).
struct Shape {
  std::array<std::size_t, 4> d{1, 1, 1, 1};
  std::uint8_t rank = 0;

  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims);

  std::size_t numel() const;
  std::size_t operator[](std::size_t i) const { return d[i]; }
  bool operator==(const Shape& o) const;
  bool operator!=(const Shape& o) const { return !(*this == o); }
  std::string str() const;
};

// Dense f64 tensor. Storage is shared on copy; public operations treat
// tensors as immutable, and mutation through data() is reserved for code
// that owns a freshly created buffer (ops, optimizer internals).
class Tensor {
 public:
  Tensor() : Tensor(Shape{}) {}
  explicit Tensor(Shape s);

  static Tensor scalar(double v);
  static Tensor zeros(Shape s) { return Tensor(s); }
  static Tensor full(Shape s, double v);
  static Tensor ones(Shape s) { return full(s, 1.0); }
  static Tensor from(Shape s, std::vector<double> values);
  static Tensor randn(Shape s, Rng& rng);
  static Tensor uniform(Shape s, Rng& rng, double lo = 0.0, double hi = 1.0);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.rank; }
  std::size_t size() const { return size_; }

  const double* data() const { return data_.get(); }
  double* data() { return data_.get(); }

  double operator[](std::size_t i) const { return data_.get()[i]; }

  double at(std::size_t i) const { return data_.get()[i]; }
  double at(std::size_t i, std::size_t j) const {
    return data_.get()[i * shape_.d[1] + j];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_.get()[(i * shape_.d[1] + j) * shape_.d[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data_.get()[((i * shape_.d[1] + j) * shape_.d[2] + k) * shape_.d[3] + l];
  }

  double item() const;

  Tensor clone() const;
  Tensor reshaped(Shape s) const;  // same data, new shape (numel must match)

  bool all_finite() const;
  bool same_data(const Tensor& o) const { return data_ == o.data_; }

 private:
  Shape shape_;
  std::size_t size_ = 1;
  std::shared_ptr<double[]> data_;
};

// ------------------------------------------------------------- broadcasting
// Shapes broadcast numpy-style after right-alignment: each aligned extent
// must be equal or 1; the output extent is the elementwise max.
Shape broadcast_shape(const Shape& a, const Shape& b);

// --------------------------------------------------------------- elementwise
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);
Tensor affine(const Tensor& x, double a, double b);  // a*x + b
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);

// reduce a broadcast result back to `target` by summing the expanded axes
Tensor reduce_to(const Tensor& g, const Shape& target);

// ---------------------------------------------------------------- reductions
double sum(const Tensor& x);
double mean(const Tensor& x);
double max_abs(const Tensor& x);
Tensor sum_axis(const Tensor& x, std::size_t axis);  // axis removed

// -------------------------------------------------------------- conv / pool
// Cross-correlation (no kernel flip). k odd, padding in {0, k/2}.
Tensor conv2d(const Tensor& input, const Tensor& kernel, int padding);
// zero-pad / crop a CxHxW border (used by conv adjoints)
Tensor pad_spatial(const Tensor& x, int p);
Tensor crop_spatial(const Tensor& x, int p);
// [Cout,Cin,k,k] -> [Cin,Cout,k,k] with both spatial axes reversed
Tensor flip_transpose_kernel(const Tensor& k);
Tensor global_avg_pool(const Tensor& x);       // CxHxW -> C
Tensor avg_pool2(const Tensor& x);             // CxHxW -> C x H/2 x W/2
Tensor bilinear_upsample(const Tensor& x, int factor);  // align-corners=false
// 3x3 neighborhood mean normalized by the in-image window size
Tensor local_mean3(const Tensor& x);

// --------------------------------------------------------------------- fft
// Unnormalized forward DFT over an HxW grid; ifft2 applies 1/(H*W).
// Complex tensors are (real, imag) pairs. Direct mixed-size implementation.
std::pair<Tensor, Tensor> fft2(const Tensor& re, const Tensor& im);
std::pair<Tensor, Tensor> ifft2(const Tensor& re, const Tensor& im);
// Batched over leading dims: transforms each trailing HxW plane.
std::pair<Tensor, Tensor> ifft2_batched(const Tensor& re, const Tensor& im);
// Real part of the normalized inverse DFT of each trailing plane.
Tensor real_ifft2(const Tensor& re, const Tensor& im);

}  // namespace sflow
