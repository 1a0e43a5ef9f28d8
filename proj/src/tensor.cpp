#include "splab/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <utility>

#include "splab/errors.hpp"

namespace splab {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!same_shape(a, b)) {
    throw config_error(std::string("tensor ") + op + ": shape mismatch");
  }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
  if (data.size() != shape_numel(shape)) {
    throw config_error("tensor: data length does not match shape");
  }
}

Tensor Tensor::zeros(const std::vector<std::size_t>& shape) {
  return Tensor(shape, std::vector<double>(shape_numel(shape), 0.0));
}

Tensor Tensor::full(const std::vector<std::size_t>& shape, double value) {
  return Tensor(shape, std::vector<double>(shape_numel(shape), value));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape.size()) throw config_error("tensor: axis out of range");
  return shape[axis];
}

std::size_t Tensor::offset(const std::vector<std::size_t>& index) const {
  if (index.size() != shape.size()) {
    throw config_error("tensor: index rank mismatch");
  }
  std::size_t off = 0;
  for (std::size_t a = 0; a < shape.size(); ++a) {
    if (index[a] >= shape[a]) throw config_error("tensor: index out of range");
    off = off * shape[a] + index[a];
  }
  return off;
}

double& Tensor::at(std::initializer_list<std::size_t> index) {
  return data[offset(std::vector<std::size_t>(index))];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  return data[offset(std::vector<std::size_t>(index))];
}

Tensor Tensor::reshaped(const std::vector<std::size_t>& new_shape) const {
  if (shape_numel(new_shape) != data.size()) {
    throw config_error("tensor reshape: element count mismatch");
  }
  return Tensor(new_shape, data);
}

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw config_error("tensor: zero-length dimension");
    n *= d;
  }
  return n;
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
  return out;
}

Tensor operator*(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

Tensor operator*(double s, const Tensor& a) {
  Tensor out = a;
  for (double& v : out.data) v *= s;
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0]) {
    throw config_error("matmul: incompatible shapes");
  }
  const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  Tensor out = Tensor::zeros({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = &a.data[i * k];
    double* crow = &out.data[i * n];
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      const double* brow = &b.data[kk * n];
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor transpose2d(const Tensor& a) {
  if (a.rank() != 2) throw config_error("transpose2d: rank must be 2");
  const std::size_t m = a.shape[0], n = a.shape[1];
  Tensor out = Tensor::zeros({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out.data[j * m + i] = a.data[i * n + j];
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

double frobenius_norm(const Tensor& a) { return std::sqrt(dot(a, a)); }

double max_abs(const Tensor& a) {
  double m = 0.0;
  for (double v : a.data) m = std::max(m, std::abs(v));
  return m;
}

void check_finite(const Tensor& t, const char* context) {
  for (double v : t.data) {
    if (!std::isfinite(v)) {
      throw numeric_error(std::string(context) + ": non-finite value");
    }
  }
}

bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

}  // namespace splab
