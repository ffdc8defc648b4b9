// Copyright 2026 The vkmeans Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vkm {

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }

  Matrix select_columns(std::span<const int> columns) const {
    Matrix out(rows, columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (columns[j] < 0 || static_cast<std::size_t>(columns[j]) >= cols)
        throw std::out_of_range("select_columns: column " + std::to_string(columns[j]));
      for (std::size_t i = 0; i < rows; ++i) out(i, j) = (*this)(i, static_cast<std::size_t>(columns[j]));
    }
    return out;
  }

  bool operator==(const Matrix&) const = default;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t f = 0; f < a.size(); ++f) {
    const double t = a[f] - b[f];
    s += t * t;
  }
  return s;
}

}  // namespace vkm
