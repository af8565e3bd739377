// SPDX-License-Identifier: Apache-2.0
#include "roma/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace roma {

int64_t shape_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (const int64_t e : shape) {
    if (e < 0) throw std::invalid_argument("negative tensor extent");
    n *= e;
  }
  return n;
}

Tensor::Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
  data.assign(static_cast<size_t>(shape_numel(shape)), 0.0);
}

Tensor::Tensor(std::vector<int64_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  if (shape_numel(shape) != static_cast<int64_t>(data.size()))
    throw std::invalid_argument("tensor data length does not match shape " + shape_str());
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::zeros(std::vector<int64_t> s) { return Tensor(std::move(s)); }

Tensor Tensor::full(std::vector<int64_t> s, double v) {
  Tensor t(std::move(s));
  for (double& x : t.data) x = v;
  return t;
}

int64_t Tensor::numel() const { return static_cast<int64_t>(data.size()); }

int64_t Tensor::rows() const {
  if (rank() != 2) throw std::logic_error("rows() on tensor of rank " + std::to_string(rank()));
  return shape[0];
}

int64_t Tensor::cols() const {
  if (rank() == 2) return shape[1];
  if (rank() == 1) return shape[0];
  throw std::logic_error("cols() on tensor of rank " + std::to_string(rank()));
}

double Tensor::value() const {
  if (numel() != 1) throw std::logic_error("value() requires a single-element tensor, got " + shape_str());
  return data[0];
}

bool Tensor::all_finite() const {
  for (const double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

}  // namespace roma
