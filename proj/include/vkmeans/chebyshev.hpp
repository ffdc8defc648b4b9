// Copyright 2026 The vkmeans Authors.
// SPDX-License-Identifier: Apache-2.0

// Chebyshev interpolation at first-kind nodes and Clenshaw evaluation.

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace vkm {

// Coefficients c_0..c_degree of the interpolant of f on [-1, 1] at the
// degree+1 Chebyshev points of the first kind. The series is
// sum_j c_j T_j(x), with no halving convention on c_0.
inline std::vector<double> chebyshev_interpolate(const std::function<double(double)>& f,
                                                 int degree) {
  if (degree < 0) throw std::invalid_argument("chebyshev_interpolate: negative degree");
  const auto n = static_cast<std::size_t>(degree) + 1;
  std::vector<double> fx(n);
  std::vector<double> theta(n);
  for (std::size_t m = 0; m < n; ++m) {
    theta[m] = std::numbers::pi * (static_cast<double>(m) + 0.5) / static_cast<double>(n);
    fx[m] = f(std::cos(theta[m]));
  }
  std::vector<double> c(n);
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t m = 0; m < n; ++m) acc += fx[m] * std::cos(static_cast<double>(j) * theta[m]);
    c[j] = 2.0 * acc / static_cast<double>(n);
  }
  c[0] *= 0.5;
  return c;
}

// Scalar Clenshaw recurrence for sum_j c_j T_j(x).
inline double clenshaw(std::span<const double> c, double x) {
  if (c.empty()) return 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
  const double two_x = 2.0 * x;
  for (std::size_t j = c.size() - 1; j >= 1; --j) {
    const double b0 = two_x * b1 - b2 + c[j];
    b2 = b1;
    b1 = b0;
  }
  return x * b1 - b2 + c[0];
}

}  // namespace vkm
