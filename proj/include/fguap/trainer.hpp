#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "fguap/dataset.hpp"
#include "fguap/errors.hpp"
#include "fguap/model.hpp"

namespace fguap::train {

/// Loss became NaN/Inf during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  bool shuffle = true;

  /// batch_size >= 1, learning_rate > 0, weight_decay >= 0. Zero epochs is
  /// accepted here (a no-op run); the CLI insists on at least one.
  void validate() const;
};

/// Fixed per-architecture budgets: convnet 60, mlp 80, attnnet 120 epochs.
TrainConfig default_recipe(nn::Arch arch);

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean cross-entropy over the epoch
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;  // NaN when no test split was supplied
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Mean cross-entropy with Adam (L2 weight decay folded into the gradient).
/// Deterministic in (model, data, config). On return the model carries a
/// TrainingRecord with the final accuracies.
std::vector<EpochStats> train(nn::Model& m, const data::LabeledDataset& train_set,
                              const TrainConfig& cfg,
                              const data::LabeledDataset* test_set = nullptr,
                              const EpochCallback& on_epoch = {});

/// Fraction of samples whose prediction equals the label.
double evaluate_accuracy(const nn::Classifier& m, const data::LabeledDataset& ds);

/// Header "epoch,loss,train_acc,test_acc".
void write_history_csv(const std::filesystem::path& path, const std::vector<EpochStats>& h);

}  // namespace fguap::train
