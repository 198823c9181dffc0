#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fguap/autodiff.hpp"
#include "fguap/ops.hpp"
#include "fguap/rng.hpp"
#include "fguap/tensor.hpp"

namespace fguap::testing {

inline constexpr double kFdStep = 1e-5;
inline constexpr double kFdRelTol = 1e-4;
// Relative error is measured against max(|analytic|, |numeric|, kFdFloor) so
// that entries which are zero analytically are judged on an absolute scale.
inline constexpr double kFdFloor = 1e-2;

/// Builds a scalar from leaves placed on `tape` in the order given.
using ScalarFn = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;  // "input i, element j: analytic a vs numeric n"
};

inline double eval_scalar(const ScalarFn& f, const std::vector<Tensor>& inputs) {
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  for (const auto& t : inputs) leaves.push_back(tape.constant(t));
  return f(tape, leaves).value().item();
}

/// Central differences against reverse mode for every element of every input.
inline GradCheck gradcheck(const ScalarFn& f, std::vector<Tensor> inputs) {
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  for (const auto& t : inputs) leaves.push_back(tape.variable(t));
  tape.backward(f(tape, leaves));

  GradCheck out;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor analytic = leaves[i].grad();
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      const double saved = inputs[i][j];
      inputs[i][j] = saved + kFdStep;
      const double up = eval_scalar(f, inputs);
      inputs[i][j] = saved - kFdStep;
      const double down = eval_scalar(f, inputs);
      inputs[i][j] = saved;
      const double numeric = (up - down) / (2 * kFdStep);
      const double a = analytic[j];
      const double err =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), kFdFloor});
      if (err > out.max_rel_error) {
        out.max_rel_error = err;
        std::ostringstream s;
        s << "input " << i << ", element " << j << ": analytic " << a << " vs numeric "
          << numeric;
        out.worst = s.str();
      }
    }
  }
  return out;
}

inline Tensor random_tensor(Shape dims, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(dims));
  for (auto& v : t.storage()) v = rng.uniform(lo, hi);
  return t;
}

/// Values with |v| in [gap, gap + 1], so that relu and friends stay off their kink.
inline Tensor off_kink_tensor(Shape dims, Rng& rng, double gap = 0.05) {
  Tensor t(std::move(dims));
  for (auto& v : t.storage()) {
    const double mag = gap + rng.uniform();
    v = rng.uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

/// sum(w * y) with fixed random weights, reducing any output to a scalar
/// whose gradient touches every output element differently.
inline ad::Var project(ad::Tape& tape, const ad::Var& y, std::uint64_t seed) {
  Rng rng(seed);
  return ad::sum(ad::mul(y, tape.constant(random_tensor(y.dims(), rng))));
}

}  // namespace fguap::testing
