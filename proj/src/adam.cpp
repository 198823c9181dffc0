#include "fguap/adam.hpp"

#include <cmath>

#include "fguap/errors.hpp"

namespace fguap {

AdamState::AdamState(const Shape& dims, double beta1, double beta2, double eps)
    : first_moment(dims), second_moment(dims), beta1(beta1), beta2(beta2), eps(eps) {}

Tensor adam_step(const Tensor& param, const Tensor& grad, AdamState& state,
                 double lr) {
  require_same_shape(param, grad, "adam_step");
  require_same_shape(param, state.first_moment, "adam_step state");
  if (!(lr > 0.0)) throw ArgumentError("adam_step: learning rate must be > 0");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);

  Tensor out = param;
  auto m = state.first_moment.data();
  auto v = state.second_moment.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double g = grad[i];
    m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
    v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    out[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
  return out;
}

}  // namespace fguap
