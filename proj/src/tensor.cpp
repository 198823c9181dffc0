#include "fguap/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "fguap/errors.hpp"

namespace fguap {

std::string shape_string(const Shape& dims) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out << ',';
    out << dims[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_numel(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         std::multiplies<>());
}

namespace {

void check_dims(const Shape& dims) {
  if (dims.size() > 4) {
    throw ShapeError("tensor rank " + std::to_string(dims.size()) +
                     " exceeds 4: " + shape_string(dims));
  }
  for (std::size_t d : dims) {
    if (d == 0) throw ShapeError("zero-length axis in " + shape_string(dims));
  }
}

}  // namespace

Tensor::Tensor() : data_(1, 0.0) {}

Tensor::Tensor(Shape dims) : dims_(std::move(dims)) {
  check_dims(dims_);
  data_.assign(shape_numel(dims_), 0.0);
}

Tensor::Tensor(Shape dims, std::vector<double> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  check_dims(dims_);
  if (data_.size() != shape_numel(dims_)) {
    throw ShapeError("data length " + std::to_string(data_.size()) +
                     " does not match dims " + shape_string(dims_));
  }
}

Tensor Tensor::full(Shape dims, double value) {
  Tensor t(std::move(dims));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

double& Tensor::at(std::size_t i, std::size_t j) {
  return data_[i * dims_.at(1) + j];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  return data_[i * dims_.at(1) + j];
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError("item() on tensor with dims " + shape_string(dims_));
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape dims) const {
  if (shape_numel(dims) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_string(dims_) + " to " +
                     shape_string(dims));
  }
  return Tensor(std::move(dims), data_);
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

double Tensor::max_abs() const noexcept {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.dims() != b.dims()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_string(a.dims()) + " vs " + shape_string(b.dims()));
  }
}

}  // namespace fguap
