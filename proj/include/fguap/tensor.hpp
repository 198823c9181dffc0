#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace fguap {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& dims);
std::size_t shape_numel(const Shape& dims);

/// Dense row-major array of doubles, rank 0 to 4.
///
/// A Tensor is a plain value. Gradient participation is decided when the
/// tensor is placed on an ad::Tape, not by the tensor itself.
class Tensor {
 public:
  Tensor();  // rank-0 zero
  explicit Tensor(Shape dims);
  Tensor(Shape dims, std::vector<double> data);

  static Tensor zeros(Shape dims) { return Tensor(std::move(dims)); }
  static Tensor full(Shape dims, double value);
  static Tensor scalar(double value);
  /// 1-D tensor from a literal list.
  static Tensor vector(std::initializer_list<double> values);
  /// 2-D tensor from nested literal rows.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  const double& operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j);
  double at(std::size_t i, std::size_t j) const;
  double item() const;

  /// Same data under new dims; element count must match.
  Tensor reshaped(Shape dims) const;

  bool all_finite() const noexcept;
  double max_abs() const noexcept;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.dims_ == b.dims_ && a.data_ == b.data_;
  }

 private:
  Shape dims_;
  std::vector<double> data_;
};

/// Throws ShapeError unless a and b have identical dims.
void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

}  // namespace fguap
