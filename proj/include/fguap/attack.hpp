#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fguap/autodiff.hpp"
#include "fguap/dataset.hpp"
#include "fguap/model.hpp"

namespace fguap::attack {

/// Which pair of vectors the cosine loss compares.
enum class Method {
  kFeatureGathering,  // last-layer features h(x), h(x+delta)
  kLogitCosine,       // logit vectors f(x), f(x+delta)
};

std::string_view method_name(Method m);  // "fg" | "logit-cosine"
Method parse_method(std::string_view tag);

struct AttackConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  double learning_rate = 0.02;
  double xi = 10.0 / 255.0;
  /// Unset: untargeted. Set: push predictions towards this class.
  std::optional<std::size_t> target;
  std::uint64_t seed = 0;
  /// Random rotation and horizontal flip of every batch sample (mini-set UAP).
  bool augment = false;

  void validate() const;
};

/// A universal perturbation and where it came from.
struct Perturbation {
  Tensor delta;  // [C,H,W]
  double xi = 0.0;
  Method method = Method::kFeatureGathering;
  std::optional<std::size_t> target;
  std::string surrogate;
  std::uint64_t seed = 0;

  bool targeted() const noexcept { return target.has_value(); }
  /// ||delta||_inf <= xi, xi >= 0, rank 3, finite. Throws ArgumentError.
  void validate() const;

  friend bool operator==(const Perturbation&, const Perturbation&) = default;
};

Perturbation zero_perturbation(const Shape& sample_shape, double xi);
/// Each pixel drawn independently from U[-xi, xi].
Perturbation uniform_random_perturbation(const Shape& sample_shape, double xi,
                                         std::uint64_t seed);

/// Mean cosine similarity between clean and adversarial vectors. Rank-1
/// inputs give the plain cosine; [N,d] inputs give the mean over rows.
ad::Var fg_loss(const ad::Var& h, const ad::Var& h_adv);

/// fg_loss(h, h_adv) - logits_adv[target] (batch mean for [N,K] logits).
/// Minimizing it lowers feature similarity and raises the target logit.
ad::Var targeted_fg_loss(const ad::Var& h, const ad::Var& h_adv, const ad::Var& logits_adv,
                         std::size_t target);

struct AttackResult {
  Perturbation perturbation;
  /// Sample-weighted mean loss per epoch.
  std::vector<double> epoch_loss;
  std::size_t steps = 0;
};

/// Called after every clamp with the running step count and current delta.
using StepObserver = std::function<void(std::size_t step, const Tensor& delta)>;

/// Universal perturbation by Adam descent on the cosine loss. delta starts at
/// zero; each batch step averages the loss over the batch, takes one Adam step
/// and clamps delta to [-xi, xi]. The very first gradient is taken at a small
/// seeded sign pattern (1e-3 * xi) because it vanishes at delta = 0. The batch order is reshuffled every epoch
/// from cfg.seed and the optimizer state carries across epochs.
AttackResult craft_uap(const nn::Classifier& m, const data::LabeledDataset& ds,
                       const AttackConfig& cfg, std::string surrogate = {},
                       const StepObserver& observer = {});

/// Same loop with the loss measured on logits instead of features.
AttackResult craft_logit_cosine_baseline(const nn::Classifier& m,
                                         const data::LabeledDataset& ds,
                                         const AttackConfig& cfg, std::string surrogate = {},
                                         const StepObserver& observer = {});

AttackResult craft(Method method, const nn::Classifier& m, const data::LabeledDataset& ds,
                   const AttackConfig& cfg, std::string surrogate = {},
                   const StepObserver& observer = {});

/// clamp(x + delta, 0, 1) for a batch [N,C,H,W].
Tensor apply(const Perturbation& p, const Tensor& batch);
data::Image apply(const Perturbation& p, const data::Image& x);

/// UAPPERT1 container.
void save_perturbation(const Perturbation& p, const std::filesystem::path& path);
Perturbation load_perturbation(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_perturbation(const Perturbation& p);
Perturbation decode_perturbation(const std::vector<std::uint8_t>& bytes);

}  // namespace fguap::attack
