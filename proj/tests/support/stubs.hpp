#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "fguap/model.hpp"
#include "fguap/ops.hpp"

namespace fguap::testing {

/// Same logits and features for every input.
class ConstantStub final : public nn::Classifier {
 public:
  ConstantStub(Shape input, std::size_t num_classes, std::size_t predicted)
      : input_(std::move(input)), k_(num_classes), predicted_(predicted) {}

  Shape input_shape() const override { return input_; }
  std::size_t num_classes() const override { return k_; }
  std::size_t feature_dim() const override { return 2; }
  nn::ForwardResult forward(ad::Tape& tape, const ad::Var& input, bool) const override {
    const std::size_t n = input.dims()[0];
    Tensor logits({n, k_});
    const Tensor features = Tensor::full({n, 2}, 1.0);
    for (std::size_t i = 0; i < n; ++i) logits.at(i, predicted_) = 1.0;
    nn::ForwardResult r;
    r.logits = tape.constant(logits);
    r.features = tape.constant(features);
    return r;
  }

 private:
  Shape input_;
  std::size_t k_;
  std::size_t predicted_;
};

/// logits = flatten(x) W^T + b; the flattened input doubles as the feature.
class LinearStub final : public nn::Classifier {
 public:
  LinearStub(Shape input, Tensor weight, Tensor bias)
      : input_(std::move(input)), weight_(std::move(weight)), bias_(std::move(bias)) {}

  Shape input_shape() const override { return input_; }
  std::size_t num_classes() const override { return weight_.dim(0); }
  std::size_t feature_dim() const override { return weight_.dim(1); }
  nn::ForwardResult forward(ad::Tape& tape, const ad::Var& input, bool) const override {
    nn::ForwardResult r;
    r.features = ad::flatten(input);
    r.logits = ad::linear(r.features, tape.constant(weight_), tape.constant(bias_));
    return r;
  }

 private:
  Shape input_;
  Tensor weight_;
  Tensor bias_;
};

/// Memorizes (image -> label); unknown images go to class 0.
class TableStub final : public nn::Classifier {
 public:
  TableStub(Shape input, std::size_t num_classes) : input_(std::move(input)), k_(num_classes) {}

  void remember(const Tensor& images, const std::vector<std::size_t>& labels) {
    const std::size_t per = shape_numel(input_);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto* p = images.data().data() + i * per;
      table_[std::vector<double>(p, p + per)] = labels[i];
    }
  }

  Shape input_shape() const override { return input_; }
  std::size_t num_classes() const override { return k_; }
  std::size_t feature_dim() const override { return k_; }
  nn::ForwardResult forward(ad::Tape& tape, const ad::Var& input, bool) const override {
    const std::size_t n = input.dims()[0];
    const std::size_t per = shape_numel(input_);
    Tensor logits({n, k_});
    for (std::size_t i = 0; i < n; ++i) {
      const auto* p = input.value().data().data() + i * per;
      const auto it = table_.find(std::vector<double>(p, p + per));
      logits.at(i, it == table_.end() ? 0 : it->second) = 1.0;
    }
    nn::ForwardResult r;
    r.logits = tape.constant(logits);
    r.features = r.logits;
    return r;
  }

 private:
  Shape input_;
  std::size_t k_;
  std::map<std::vector<double>, std::size_t> table_;
};

}  // namespace fguap::testing
