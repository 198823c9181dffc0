#pragma once

#include <cstddef>
#include <vector>

#include "fguap/dataset.hpp"
#include "fguap/rng.hpp"

namespace fguap::testing {

/// Small synthetic split for tests that need real images.
inline data::LabeledDataset tiny_split(std::size_t classes, std::size_t per_class,
                                       std::size_t side, std::uint64_t seed, bool test = false) {
  data::SyntheticSpec spec;
  spec.seed = seed;
  spec.num_classes = classes;
  spec.per_class_train = per_class;
  spec.per_class_test = per_class;
  spec.side = side;
  auto [train, held_out] = data::generate_synthetic(spec);
  return test ? held_out : train;
}

/// Images with a bright pixel at the label's position on a dim background,
/// so an identity LinearStub classifies every sample correctly.
inline data::LabeledDataset one_hot_images(std::size_t classes, std::size_t per_class,
                                           std::uint64_t seed) {
  Rng rng(seed);
  data::LabeledDataset ds;
  ds.num_classes = classes;
  const std::size_t n = classes * per_class;
  ds.images = Tensor({n, 1, 1, classes});
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % classes;
    ds.labels.push_back(c);
    for (std::size_t j = 0; j < classes; ++j) {
      ds.images[i * classes + j] = j == c ? rng.uniform(0.6, 0.9) : rng.uniform(0.0, 0.2);
    }
  }
  return ds;
}

}  // namespace fguap::testing
