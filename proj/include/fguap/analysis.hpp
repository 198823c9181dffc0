#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fguap/attack.hpp"
#include "fguap/dataset.hpp"
#include "fguap/model.hpp"

namespace fguap::analysis {

/// Fraction of samples whose prediction changes under the perturbation.
/// The denominator counts every sample, correctly classified or not.
double fooling_ratio(const nn::Classifier& m, const data::LabeledDataset& ds,
                     const attack::Perturbation& p);

/// Fraction of perturbed samples predicted exactly as `target`.
double targeted_fooling_ratio(const nn::Classifier& m, const data::LabeledDataset& ds,
                              const attack::Perturbation& p, std::size_t target);

/// (class, count) pairs sorted by descending count, ties by lower class.
/// When num_classes is given, absent classes appear with count 0.
std::vector<std::pair<std::size_t, std::size_t>> class_histogram(
    std::span<const std::size_t> predictions, std::optional<std::size_t> num_classes = {});

/// Share of predictions that fall in the k most frequent classes.
double dominance_ratio(std::span<const std::size_t> predictions, std::size_t k);

struct CovarianceStats {
  std::vector<std::size_t> classes;  // class ids, ascending; row order of class_means
  std::vector<std::size_t> counts;
  Tensor class_means;  // [K,d]
  Tensor global_mean;  // [d], unweighted mean of class means
  Tensor within;       // [d,d], average over samples of (h - mu_c)(h - mu_c)^T
  Tensor between;      // [d,d], average over classes of (mu_c - mu_G)(mu_c - mu_G)^T
};

/// Every class in [0, num_classes) must occur. Sums run in a canonical order
/// (class, then feature values lexicographically, then index) so any
/// permutation of the samples gives bit-identical statistics.
CovarianceStats covariance_stats(const Tensor& features, std::span<const std::size_t> labels,
                                 std::size_t num_classes);

/// Same statistics over only the classes with at least `min_count` members.
/// Throws ArgumentError if fewer than two classes survive.
CovarianceStats covariance_stats_present(const Tensor& features,
                                         std::span<const std::size_t> labels,
                                         std::size_t min_count);

/// Tr(within * pinv(between)). The pseudoinverse comes from a symmetric
/// eigendecomposition that drops eigenvalues below d * eps * lambda_max.
double nc_metric(const CovarianceStats& stats);

struct NcReport {
  double clean = 0.0;
  std::optional<double> perturbed;  // unset when no perturbation is given
  std::size_t clean_classes = 0;
  std::size_t perturbed_classes = 0;
};

/// Clean metric groups clean features by ground truth. Perturbed metric
/// groups features of apply(p, x) by the prediction on the perturbed input.
/// Classes with fewer than two members are left out of both.
NcReport nc_report(const nn::Classifier& m, const data::LabeledDataset& ds,
                   const attack::Perturbation* p);

struct DominantClass {
  std::size_t uap_class = 0;  // prediction for clamp(0.5 + delta, 0, 1)
  std::size_t rank = 0;       // 1 = most frequent perturbed prediction
};

DominantClass dominant_class_check(const nn::Classifier& m, const data::LabeledDataset& ds,
                                   const attack::Perturbation& p);

/// entry[i][j] = fooling_ratio(models[j], ds, perturbations[i])
std::vector<std::vector<double>> transfer_matrix(
    std::span<const nn::Classifier* const> models,
    std::span<const attack::Perturbation> perturbations, const data::LabeledDataset& ds);

struct RedundancyRow {
  std::size_t per_class = 0;
  double fooling_ratio = 0.0;
  double ratio_to_full = 0.0;
};

struct RedundancyResult {
  double full_fooling_ratio = 0.0;
  std::vector<RedundancyRow> rows;
};

/// For each count n (strictly descending), crafts an FG perturbation on
/// subsample_per_class(train, n, subsample_seed) and scores it on `eval`.
/// The reference run uses the whole training set. Augmentation is forced off.
RedundancyResult redundancy_sweep(const nn::Classifier& m, const data::LabeledDataset& train,
                                  const data::LabeledDataset& eval,
                                  std::span<const std::size_t> per_class_counts,
                                  attack::AttackConfig cfg, std::uint64_t subsample_seed);

}  // namespace fguap::analysis
