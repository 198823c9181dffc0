#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fguap/attack.hpp"
#include "fguap/model.hpp"
#include "fguap/ops.hpp"
#include "gradcheck.hpp"

namespace fguap::testing {

struct GradCase {
  std::string name;
  ScalarFn fn;
  std::vector<Tensor> inputs;
};

/// Every differentiable primitive and loss, with inputs drawn from `seed`.
/// Piecewise ops get inputs kept clear of their kinks.
inline std::vector<GradCase> op_cases(std::uint64_t seed) {
  using V = std::vector<ad::Var>;
  Rng rng(Rng::derive(seed, 0x9c));
  auto p = [seed](ad::Tape& t, const ad::Var& y) { return project(t, y, seed); };
  std::vector<GradCase> c;

  const Tensor a = random_tensor({3, 4}, rng);
  const Tensor b = random_tensor({3, 4}, rng, 0.5, 2.0);
  c.push_back({"add", [=](ad::Tape& t, const V& v) { return p(t, v[0] + v[1]); }, {a, b}});
  c.push_back({"sub", [=](ad::Tape& t, const V& v) { return p(t, v[0] - v[1]); }, {a, b}});
  c.push_back({"mul", [=](ad::Tape& t, const V& v) { return p(t, v[0] * v[1]); }, {a, b}});
  c.push_back({"div", [=](ad::Tape& t, const V& v) { return p(t, v[0] / v[1]); }, {a, b}});
  c.push_back({"scalar affine", [=](ad::Tape& t, const V& v) { return p(t, v[0] * 2.5 + 0.3); }, {a}});
  c.push_back({"neg", [=](ad::Tape& t, const V& v) { return p(t, -v[0]); }, {a}});

  c.push_back({"matmul", [=](ad::Tape& t, const V& v) { return p(t, ad::matmul(v[0], v[1])); },
               {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)}});
  c.push_back({"bmm", [=](ad::Tape& t, const V& v) { return p(t, ad::bmm(v[0], v[1])); },
               {random_tensor({2, 3, 4}, rng), random_tensor({2, 4, 3}, rng)}});
  c.push_back({"transpose", [=](ad::Tape& t, const V& v) { return p(t, ad::transpose(v[0])); },
               {random_tensor({3, 5}, rng)}});
  c.push_back({"transpose_last2",
               [=](ad::Tape& t, const V& v) { return p(t, ad::transpose_last2(v[0])); },
               {random_tensor({2, 3, 4}, rng)}});
  c.push_back({"linear", [=](ad::Tape& t, const V& v) { return p(t, ad::linear(v[0], v[1], v[2])); },
               {random_tensor({4, 5}, rng), random_tensor({3, 5}, rng), random_tensor({3}, rng)}});

  c.push_back({"reshape", [=](ad::Tape& t, const V& v) { return p(t, ad::reshape(v[0], {6, 2})); },
               {random_tensor({3, 4}, rng)}});
  c.push_back({"flatten", [=](ad::Tape& t, const V& v) { return p(t, ad::flatten(v[0])); },
               {random_tensor({2, 1, 3, 3}, rng)}});
  c.push_back({"add_per_sample",
               [=](ad::Tape& t, const V& v) { return p(t, ad::add_per_sample(v[0], v[1])); },
               {random_tensor({3, 1, 2, 2}, rng), random_tensor({1, 2, 2}, rng)}});
  c.push_back({"patchify", [=](ad::Tape& t, const V& v) { return p(t, ad::patchify(v[0], 2)); },
               {random_tensor({2, 2, 4, 4}, rng)}});
  const std::vector<std::size_t> idx = {2, 0, 1};
  c.push_back({"pick", [=](ad::Tape& t, const V& v) { return p(t, ad::pick(v[0], idx)); },
               {random_tensor({3, 4}, rng)}});

  const Tensor x = random_tensor({2, 2, 5, 5}, rng);
  const Tensor k = random_tensor({3, 2, 3, 3}, rng);
  c.push_back({"conv2d", [=](ad::Tape& t, const V& v) { return p(t, ad::conv2d(v[0], v[1], v[2], 1, 1)); },
               {x, k, random_tensor({3}, rng)}});
  c.push_back({"conv2d strided", [=](ad::Tape& t, const V& v) { return p(t, ad::conv2d(v[0], v[1], 2, 0)); },
               {x, k}});

  c.push_back({"relu", [=](ad::Tape& t, const V& v) { return p(t, ad::relu(v[0])); },
               {off_kink_tensor({4, 3}, rng)}});
  c.push_back({"max_pool2d", [=](ad::Tape& t, const V& v) { return p(t, ad::max_pool2d(v[0], 2)); },
               {random_tensor({2, 2, 4, 5}, rng)}});
  Tensor clamped = random_tensor({4, 4}, rng, -1.5, 1.5);
  for (auto& e : clamped.storage()) {
    if (std::abs(std::abs(e) - 0.5) < 0.05) e += 0.1;
  }
  c.push_back({"clamp", [=](ad::Tape& t, const V& v) { return p(t, ad::clamp(v[0], -0.5, 0.5)); },
               {clamped}});

  c.push_back({"sum", [](ad::Tape&, const V& v) { return ad::sum(v[0]); }, {random_tensor({3, 4}, rng)}});
  c.push_back({"mean", [](ad::Tape&, const V& v) { return ad::mean(v[0]); }, {random_tensor({3, 4}, rng)}});
  c.push_back({"mean_pool", [=](ad::Tape& t, const V& v) { return p(t, ad::mean_pool(v[0])); },
               {random_tensor({2, 3, 4}, rng)}});
  c.push_back({"softmax", [=](ad::Tape& t, const V& v) { return p(t, ad::softmax(v[0])); },
               {random_tensor({3, 5}, rng, -3, 3)}});
  c.push_back({"log_softmax", [=](ad::Tape& t, const V& v) { return p(t, ad::log_softmax(v[0])); },
               {random_tensor({3, 5}, rng, -3, 3)}});

  c.push_back({"cosine_similarity",
               [](ad::Tape&, const V& v) { return ad::cosine_similarity(v[0], v[1]); },
               {random_tensor({6}, rng), random_tensor({6}, rng)}});
  c.push_back({"cosine_similarity_rows",
               [=](ad::Tape& t, const V& v) { return p(t, ad::cosine_similarity_rows(v[0], v[1])); },
               {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)}});
  c.push_back({"fg_loss", [](ad::Tape&, const V& v) { return attack::fg_loss(v[0], v[1]); },
               {random_tensor({4, 5}, rng), random_tensor({4, 5}, rng)}});
  c.push_back({"targeted_fg_loss",
               [](ad::Tape&, const V& v) { return attack::targeted_fg_loss(v[0], v[1], v[2], 2); },
               {random_tensor({4, 5}, rng), random_tensor({4, 5}, rng), random_tensor({4, 3}, rng)}});
  const std::vector<std::size_t> labels = {0, 3, 1, 3};
  c.push_back({"cross_entropy", [=](ad::Tape&, const V& v) { return ad::cross_entropy(v[0], labels); },
               {random_tensor({4, 4}, rng, -3, 3)}});
  return c;
}

/// Whole model against its input: cross-entropy plus a projection of the
/// features, so both heads of the forward pass are exercised.
inline GradCase model_input_case(nn::Arch arch, std::uint64_t seed) {
  Rng rng(Rng::derive(seed, 0x3d));
  const nn::Model model = nn::Model::build(arch, 3, seed, {1, 8, 8});
  const std::vector<std::size_t> labels = {1, 2};
  return {std::string(nn::arch_name(arch)) + " input",
          [=](ad::Tape& t, const std::vector<ad::Var>& v) {
            const nn::ForwardResult r = model.forward(t, v[0], false);
            return ad::cross_entropy(r.logits, labels) + project(t, r.features, seed) * 0.1;
          },
          {random_tensor({2, 1, 8, 8}, rng, 0.0, 1.0)}};
}

/// Whole model against its weights. Analytic gradients come from the model's
/// own parameter leaves, numeric ones from perturbing a copy. Up to 64 evenly
/// spaced entries per tensor are probed.
inline GradCheck model_weight_check(nn::Arch arch, std::uint64_t seed) {
  Rng rng(Rng::derive(seed, 0x3d));
  const nn::Model model = nn::Model::build(arch, 3, seed, {1, 8, 8});
  const Tensor x = random_tensor({2, 1, 8, 8}, rng, 0.0, 1.0);
  const std::vector<std::size_t> labels = {1, 2};
  auto loss_of = [&](const nn::Model& m) {
    ad::Tape t;
    return ad::cross_entropy(m.forward(t, t.constant(x), true).logits, labels).value().item();
  };

  ad::Tape tape;
  const nn::ForwardResult r = model.forward(tape, tape.constant(x), true);
  tape.backward(ad::cross_entropy(r.logits, labels));
  nn::Model probe = model;
  auto params = probe.parameters();

  GradCheck out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor analytic = r.params[i].grad();
    Tensor& w = *params[i].second;
    const std::size_t stride = std::max<std::size_t>(1, w.size() / 64);
    for (std::size_t j = (seed * 7) % stride; j < w.size(); j += stride) {
      const double saved = w[j];
      w[j] = saved + kFdStep;
      const double up = loss_of(probe);
      w[j] = saved - kFdStep;
      const double down = loss_of(probe);
      w[j] = saved;
      const double numeric = (up - down) / (2 * kFdStep);
      const double err = std::abs(analytic[j] - numeric) /
                         std::max({std::abs(analytic[j]), std::abs(numeric), kFdFloor});
      if (err > out.max_rel_error) {
        out.max_rel_error = err;
        out.worst = params[i].first + "[" + std::to_string(j) + "]";
      }
    }
  }
  return out;
}

}  // namespace fguap::testing
