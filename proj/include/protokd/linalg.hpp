#pragma once

#include <cstddef>
#include <span>

namespace protokd::detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

/// ||r - w g||^2 evaluated directly, no expansion.
inline double residual_sq(std::span<const double> r, std::span<const double> g, double w) {
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double d = r[i] - w * g[i];
    s += d * d;
  }
  return s;
}

}  // namespace protokd::detail
