#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "fguap/autodiff.hpp"
#include "fguap/tensor.hpp"

namespace fguap::nn {

enum class Arch { kConvNet, kMlp, kAttnNet };

std::string_view arch_name(Arch arch);
/// Throws ArgumentError listing the valid tags.
Arch parse_arch(std::string_view tag);

inline constexpr std::size_t kFeatureDim = 48;

struct ForwardResult {
  ad::Var logits;    // [N,K]
  ad::Var features;  // [N,d], the input of the final linear layer
  /// Parameter leaves in parameters() order (empty for parameter-free models).
  std::vector<ad::Var> params;
  /// Attention matrices [N,P,P], one per attention block.
  std::vector<ad::Var> attention;
};

/// Anything that maps a batch of images to logits through a last-layer
/// feature. Model is the real implementation; tests plug in stubs.
class Classifier {
 public:
  virtual ~Classifier() = default;

  /// [C,H,W] of one input image.
  virtual Shape input_shape() const = 0;
  virtual std::size_t num_classes() const = 0;
  virtual std::size_t feature_dim() const = 0;
  /// `input` is [N,C,H,W]. When track_params is false the weights enter the
  /// tape as constants.
  virtual ForwardResult forward(ad::Tape& tape, const ad::Var& input,
                                bool track_params) const = 0;
};

// Layers. Each holds its own weights by value.
struct Conv2d {
  Tensor kernel;  // [F,C,k,k]
  Tensor bias;    // [F]
  std::size_t stride = 1;
  std::size_t padding = 1;
};
struct ReLU {};
struct MaxPool2d {
  std::size_t window = 2;
};
struct Flatten {};
struct Linear {
  Tensor weight;  // [out,in]
  Tensor bias;    // [out]
};
/// Non-overlapping patches projected to a token width: [N,C,H,W] -> [N,P,D].
struct PatchEmbed {
  std::size_t patch = 4;
  Tensor weight;  // [D, C*patch*patch]
  Tensor bias;    // [D]
};
/// Single-head scaled dot-product self-attention with a residual connection:
///   x + softmax(xWq (xWk)^T / sqrt(D)) xWv Wo
struct SelfAttention {
  Tensor wq, wk, wv, wo;  // each [D,D]
};
/// [N,P,D] -> [N,D]
struct MeanPool {};

using Layer =
    std::variant<Conv2d, ReLU, MaxPool2d, Flatten, Linear, PatchEmbed, SelfAttention, MeanPool>;

struct TrainingRecord {
  std::size_t epochs = 0;
  std::size_t batch_size = 0;
  double learning_rate = 0.0;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;

  friend bool operator==(const TrainingRecord&, const TrainingRecord&) = default;
};

class Model final : public Classifier {
 public:
  Model(Arch arch, std::size_t num_classes, Shape input_shape, std::vector<Layer> body,
        Linear head, std::uint64_t init_seed);

  /// Fresh seeded model. Weights are He-uniform, biases zero.
  static Model build(Arch arch, std::size_t num_classes, std::uint64_t seed,
                     Shape input_shape = {1, 24, 24});

  Shape input_shape() const override { return input_shape_; }
  std::size_t num_classes() const override { return num_classes_; }
  std::size_t feature_dim() const override { return head_.weight.dim(1); }
  ForwardResult forward(ad::Tape& tape, const ad::Var& input,
                        bool track_params) const override;

  Arch arch() const noexcept { return arch_; }
  std::uint64_t init_seed() const noexcept { return init_seed_; }
  const std::vector<Layer>& body() const noexcept { return body_; }
  const Linear& head() const noexcept { return head_; }

  /// Stable names ("0.kernel", ..., "head.weight") paired with the tensors.
  std::vector<std::pair<std::string, Tensor*>> parameters();
  std::vector<std::pair<std::string, const Tensor*>> parameters() const;

  const std::optional<TrainingRecord>& training() const noexcept { return training_; }
  void set_training(TrainingRecord r) { training_ = r; }

 private:
  Arch arch_;
  std::size_t num_classes_;
  Shape input_shape_;
  std::vector<Layer> body_;
  Linear head_;
  std::uint64_t init_seed_;
  std::optional<TrainingRecord> training_;
};

/// Rejects inputs whose per-sample dims differ from the classifier's.
void check_input(const Classifier& m, const Tensor& x);

struct Outputs {
  Tensor logits;    // [N,K]
  Tensor features;  // [N,d]
};

/// Inference in chunks; no gradients.
Outputs forward_with_features(const Classifier& m, const Tensor& x);

/// Index of the largest value; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);
std::vector<std::size_t> predict(const Classifier& m, const Tensor& x);

/// UAPCKPT1 container.
void save_checkpoint(const Model& m, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_checkpoint(const Model& m);
/// When `expected` is set, a checkpoint of another architecture is rejected
/// with FormatError(kArchitectureMismatch).
Model load_checkpoint(const std::filesystem::path& path,
                      std::optional<Arch> expected = std::nullopt);
Model decode_checkpoint(const std::vector<std::uint8_t>& bytes,
                        std::optional<Arch> expected = std::nullopt);

}  // namespace fguap::nn
