// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace roma {

// Dense row-major tensor of 64-bit floats. Rank 0 (scalar) through 2 is all
// the policy needs; no views, no strides.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> s);
  Tensor(std::vector<int64_t> s, std::vector<double> d);

  static Tensor scalar(double v);
  static Tensor zeros(std::vector<int64_t> s);
  static Tensor full(std::vector<int64_t> s, double v);

  int64_t numel() const;
  int rank() const { return static_cast<int>(shape.size()); }
  int64_t rows() const;
  int64_t cols() const;

  double& at(int64_t i) { return data[static_cast<size_t>(i)]; }
  double at(int64_t i) const { return data[static_cast<size_t>(i)]; }
  double& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols() + c)]; }
  double at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols() + c)]; }
  double* row_ptr(int64_t r) { return data.data() + r * cols(); }
  const double* row_ptr(int64_t r) const { return data.data() + r * cols(); }

  // Scalar value; throws unless numel() == 1.
  double value() const;

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;

  std::string shape_str() const;
};

int64_t shape_numel(const std::vector<int64_t>& shape);

}  // namespace roma
