#include "fguap/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "fguap/adam.hpp"
#include "fguap/binary_io.hpp"
#include "fguap/ops.hpp"
#include "fguap/rng.hpp"

namespace fguap::train {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ArgumentError("batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw ArgumentError("learning rate must be > 0");
  if (!(weight_decay >= 0.0)) throw ArgumentError("weight decay must be >= 0");
}

TrainConfig default_recipe(nn::Arch arch) {
  TrainConfig cfg;
  switch (arch) {
    case nn::Arch::kConvNet: cfg.epochs = 60; break;
    case nn::Arch::kMlp: cfg.epochs = 80; break;
    case nn::Arch::kAttnNet: cfg.epochs = 120; break;
  }
  return cfg;
}

double evaluate_accuracy(const nn::Classifier& m, const data::LabeledDataset& ds) {
  if (ds.size() == 0) throw ArgumentError("accuracy of an empty dataset is undefined");
  const auto pred = nn::predict(m, ds.images);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == ds.labels[i];
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

std::vector<EpochStats> train(nn::Model& m, const data::LabeledDataset& train_set,
                              const TrainConfig& cfg, const data::LabeledDataset* test_set,
                              const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.size() == 0) throw ArgumentError("training set is empty");
  if (train_set.num_classes != m.num_classes()) {
    throw ArgumentError("dataset has " + std::to_string(train_set.num_classes) +
                        " classes, model has " + std::to_string(m.num_classes()));
  }
  nn::check_input(m, train_set.images);

  auto params = m.parameters();
  std::vector<AdamState> states;
  states.reserve(params.size());
  for (const auto& p : params) states.emplace_back(p.second->dims());

  const std::size_t N = train_set.size();
  std::vector<std::size_t> order(N);
  std::vector<EpochStats> history;
  ad::Tape tape;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (cfg.shuffle) {
      Rng rng(Rng::derive(cfg.seed, epoch));
      rng.shuffle(std::span<std::size_t>(order));
    }
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < N; start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, N - start);
      const std::span<const std::size_t> idx(order.data() + start, n);
      const auto labels = train_set.labels_of(idx);

      tape.clear();
      double loss_value = 0.0;
      try {
        const nn::ForwardResult r = m.forward(tape, tape.constant(train_set.batch(idx)), true);
        const ad::Var loss = ad::cross_entropy(r.logits, labels);
        loss_value = loss.value().item();
        tape.backward(loss);
        for (std::size_t i = 0; i < params.size(); ++i) {
          Tensor g = r.params[i].grad();
          const Tensor& w = *params[i].second;
          if (cfg.weight_decay > 0.0) {
            for (std::size_t j = 0; j < g.size(); ++j) g[j] += cfg.weight_decay * w[j];
          }
          *params[i].second = adam_step(w, g, states[i], cfg.learning_rate);
        }
      } catch (const NonFiniteError& e) {
        throw DivergenceError("training diverged in epoch " + std::to_string(epoch) + ": " +
                              e.what());
      }
      if (!std::isfinite(loss_value)) {
        throw DivergenceError("training loss became non-finite in epoch " +
                              std::to_string(epoch));
      }
      loss_sum += loss_value * static_cast<double>(n);
    }

    EpochStats s;
    s.epoch = epoch;
    s.loss = loss_sum / static_cast<double>(N);
    try {
      s.train_accuracy = evaluate_accuracy(m, train_set);
      s.test_accuracy = test_set ? evaluate_accuracy(m, *test_set)
                                 : std::numeric_limits<double>::quiet_NaN();
    } catch (const NonFiniteError& e) {
      // The last update pushed the weights past what a forward pass survives.
      throw DivergenceError("training diverged after epoch " + std::to_string(epoch) + ": " +
                            e.what());
    }
    history.push_back(s);
    if (on_epoch) on_epoch(s);
  }

  nn::TrainingRecord rec;
  rec.epochs = cfg.epochs;
  rec.batch_size = cfg.batch_size;
  rec.learning_rate = cfg.learning_rate;
  rec.weight_decay = cfg.weight_decay;
  rec.seed = cfg.seed;
  if (history.empty()) {
    rec.train_accuracy = evaluate_accuracy(m, train_set);
    rec.test_accuracy = test_set ? evaluate_accuracy(m, *test_set)
                                 : std::numeric_limits<double>::quiet_NaN();
  } else {
    rec.train_accuracy = history.back().train_accuracy;
    rec.test_accuracy = history.back().test_accuracy;
  }
  m.set_training(rec);
  return history;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochStats>& h) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError(FormatError::Kind::kIo, "cannot write " + path.string());
  out << "epoch,loss,train_acc,test_acc\n";
  for (const auto& s : h) {
    out << s.epoch << ',' << io::format_real(s.loss) << ',' << io::format_real(s.train_accuracy)
        << ',' << (std::isnan(s.test_accuracy) ? std::string() : io::format_real(s.test_accuracy))
        << '\n';
  }
  if (!out) throw FormatError(FormatError::Kind::kIo, "write failed for " + path.string());
}

}  // namespace fguap::train
