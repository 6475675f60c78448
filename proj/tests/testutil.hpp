#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "sflow/rng.hpp"
#include "sflow/tensor.hpp"

namespace tu {

inline double rel_err(double a, double b) {
  return std::fabs(a - b) / std::max({1.0, std::fabs(a), std::fabs(b)});
}

inline double max_rel_err(const sflow::Tensor& a, const sflow::Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, rel_err(a[i], b[i]));
  return m;
}

inline double max_abs_diff(const sflow::Tensor& a, const sflow::Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

inline bool bitwise_equal(const sflow::Tensor& a, const sflow::Tensor& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

}  // namespace tu
