#pragma once

#include <cstdint>

#include "fguap/tensor.hpp"

namespace fguap {

/// Moment accumulators for one optimized tensor.
struct AdamState {
  explicit AdamState(const Shape& dims, double beta1 = 0.9, double beta2 = 0.999,
                     double eps = 1e-8);

  Tensor first_moment;
  Tensor second_moment;
  std::uint64_t step = 0;
  double beta1;
  double beta2;
  double eps;
};

/// One bias-corrected Adam update that descends along `grad`:
///   param - lr * m_hat / (sqrt(v_hat) + eps).
/// Callers that want ascent pass the negated gradient. `state` is advanced
/// in place.
Tensor adam_step(const Tensor& param, const Tensor& grad, AdamState& state,
                 double lr);

}  // namespace fguap
