#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace splab {

// Dense row-major tensor of 64-bit floats: the universal value type for
// fields, activations, and weights.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);

  static Tensor zeros(const std::vector<std::size_t>& shape);
  static Tensor full(const std::vector<std::size_t>& shape, double value);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t axis) const;

  // Flat offset of a multi-index (row-major).
  std::size_t offset(const std::vector<std::size_t>& index) const;
  double& at(std::initializer_list<std::size_t> index);
  double at(std::initializer_list<std::size_t> index) const;

  // Same data, new shape; element count must match.
  Tensor reshaped(const std::vector<std::size_t>& shape) const;
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);

// Elementwise arithmetic; shapes must match exactly.
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator*(double s, const Tensor& a);

// 2-D matrix product: (m×k)·(k×n) -> m×n.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose2d(const Tensor& a);

double dot(const Tensor& a, const Tensor& b);
double frobenius_norm(const Tensor& a);
double max_abs(const Tensor& a);

// Throws numeric_error if any entry is NaN/Inf; `context` names the caller.
void check_finite(const Tensor& t, const char* context);

bool same_shape(const Tensor& a, const Tensor& b);

}  // namespace splab
