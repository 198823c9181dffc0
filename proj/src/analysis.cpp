#include "fguap/analysis.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "fguap/errors.hpp"

namespace fguap::analysis {

namespace {

void require_samples(const data::LabeledDataset& ds) {
  if (ds.size() == 0) throw ArgumentError("dataset is empty");
}

}  // namespace

double fooling_ratio(const nn::Classifier& m, const data::LabeledDataset& ds,
                     const attack::Perturbation& p) {
  require_samples(ds);
  const auto clean = nn::predict(m, ds.images);
  const auto adv = nn::predict(m, attack::apply(p, ds.images));
  std::size_t flipped = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) flipped += clean[i] != adv[i];
  return static_cast<double>(flipped) / static_cast<double>(ds.size());
}

double targeted_fooling_ratio(const nn::Classifier& m, const data::LabeledDataset& ds,
                              const attack::Perturbation& p, std::size_t target) {
  require_samples(ds);
  if (target >= m.num_classes()) {
    throw ArgumentError("target class " + std::to_string(target) + " out of range for " +
                        std::to_string(m.num_classes()) + " classes");
  }
  const auto adv = nn::predict(m, attack::apply(p, ds.images));
  const auto hits = std::count(adv.begin(), adv.end(), target);
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

std::vector<std::pair<std::size_t, std::size_t>> class_histogram(
    std::span<const std::size_t> predictions, std::optional<std::size_t> num_classes) {
  std::map<std::size_t, std::size_t> counts;
  if (num_classes) {
    for (std::size_t c = 0; c < *num_classes; ++c) counts[c] = 0;
  }
  for (std::size_t p : predictions) ++counts[p];
  std::vector<std::pair<std::size_t, std::size_t>> out(counts.begin(), counts.end());
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

double dominance_ratio(std::span<const std::size_t> predictions, std::size_t k) {
  if (predictions.empty()) throw ArgumentError("dominance ratio of an empty prediction list");
  if (k < 1) throw ArgumentError("dominance ratio needs k >= 1");
  const auto hist = class_histogram(predictions);
  std::size_t top = 0;
  for (std::size_t i = 0; i < std::min(k, hist.size()); ++i) top += hist[i].second;
  return static_cast<double>(top) / static_cast<double>(predictions.size());
}

namespace {

CovarianceStats stats_over(const Tensor& features, std::span<const std::size_t> labels,
                           const std::vector<std::size_t>& classes) {
  const std::size_t N = features.dim(0), d = features.dim(1), K = classes.size();
  std::vector<std::size_t> slot(
      classes.empty() ? 0 : *std::max_element(classes.begin(), classes.end()) + 1,
      std::numeric_limits<std::size_t>::max());
  for (std::size_t k = 0; k < K; ++k) slot[classes[k]] = k;

  auto row = [&](std::size_t i) { return features.data().subspan(i * d, d); };

  // Canonical order: class slot, then feature values, then index.
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < N; ++i) {
    if (labels[i] < slot.size() && slot[labels[i]] != std::numeric_limits<std::size_t>::max()) {
      order.push_back(i);
    }
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (slot[labels[a]] != slot[labels[b]]) return slot[labels[a]] < slot[labels[b]];
    const auto ra = row(a), rb = row(b);
    if (std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end())) return true;
    if (std::lexicographical_compare(rb.begin(), rb.end(), ra.begin(), ra.end())) return false;
    return a < b;
  });

  CovarianceStats s;
  s.classes = classes;
  s.counts.assign(K, 0);
  s.class_means = Tensor({K, d});
  for (std::size_t i : order) {
    const std::size_t k = slot[labels[i]];
    ++s.counts[k];
    const auto r = row(i);
    for (std::size_t j = 0; j < d; ++j) s.class_means[k * d + j] += r[j];
  }
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t j = 0; j < d; ++j)
      s.class_means[k * d + j] /= static_cast<double>(s.counts[k]);

  s.global_mean = Tensor({d});
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t j = 0; j < d; ++j) s.global_mean[j] += s.class_means[k * d + j];
  for (std::size_t j = 0; j < d; ++j) s.global_mean[j] /= static_cast<double>(K);

  // Upper triangles, mirrored afterwards so both matrices are exactly symmetric.
  s.within = Tensor({d, d});
  std::vector<double> dev(d);
  for (std::size_t i : order) {
    const std::size_t k = slot[labels[i]];
    const auto r = row(i);
    for (std::size_t j = 0; j < d; ++j) dev[j] = r[j] - s.class_means[k * d + j];
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) s.within[a * d + b] += dev[a] * dev[b];
  }
  s.between = Tensor({d, d});
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t j = 0; j < d; ++j) dev[j] = s.class_means[k * d + j] - s.global_mean[j];
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) s.between[a * d + b] += dev[a] * dev[b];
  }
  const double n_used = static_cast<double>(order.size());
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      s.within[a * d + b] /= n_used;
      s.within[b * d + a] = s.within[a * d + b];
      s.between[a * d + b] /= static_cast<double>(K);
      s.between[b * d + a] = s.between[a * d + b];
    }
  return s;
}

void check_feature_labels(const Tensor& features, std::span<const std::size_t> labels) {
  if (features.rank() != 2) {
    throw ShapeError("features must be [N,d], got " + shape_string(features.dims()));
  }
  if (features.dim(0) != labels.size()) {
    throw ShapeError("features " + shape_string(features.dims()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
}

}  // namespace

CovarianceStats covariance_stats(const Tensor& features, std::span<const std::size_t> labels,
                                 std::size_t num_classes) {
  check_feature_labels(features, labels);
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::size_t l : labels) {
    if (l >= num_classes) {
      throw ArgumentError("label " + std::to_string(l) + " out of range for " +
                          std::to_string(num_classes) + " classes");
    }
    ++counts[l];
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (counts[c] == 0) throw ArgumentError("class " + std::to_string(c) + " has no samples");
  }
  std::vector<std::size_t> classes(num_classes);
  std::iota(classes.begin(), classes.end(), std::size_t{0});
  return stats_over(features, labels, classes);
}

CovarianceStats covariance_stats_present(const Tensor& features,
                                         std::span<const std::size_t> labels,
                                         std::size_t min_count) {
  check_feature_labels(features, labels);
  std::map<std::size_t, std::size_t> counts;
  for (std::size_t l : labels) ++counts[l];
  std::vector<std::size_t> classes;
  for (const auto& [c, n] : counts) {
    if (n >= min_count) classes.push_back(c);
  }
  if (classes.size() < 2) {
    throw ArgumentError("only " + std::to_string(classes.size()) + " class(es) with at least " +
                        std::to_string(min_count) + " members; collapse metric needs 2");
  }
  return stats_over(features, labels, classes);
}

double nc_metric(const CovarianceStats& stats) {
  const std::size_t d = stats.between.dim(0);
  Eigen::MatrixXd between(d, d), within(d, d);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b) {
      between(a, b) = stats.between[a * d + b];
      within(a, b) = stats.within[a * d + b];
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(between);
  if (eig.info() != Eigen::Success) throw Error("eigendecomposition of between-class covariance failed");
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double lambda_max = lambda.cwiseAbs().maxCoeff();
  if (!(lambda_max > 0.0)) {
    throw ArgumentError("between-class covariance is zero; collapse metric undefined");
  }
  const double tol = static_cast<double>(d) * std::numeric_limits<double>::epsilon() * lambda_max;
  double trace = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) <= tol) continue;
    const Eigen::VectorXd v = eig.eigenvectors().col(i);
    trace += v.dot(within * v) / lambda(i);
  }
  return trace;
}

NcReport nc_report(const nn::Classifier& m, const data::LabeledDataset& ds,
                   const attack::Perturbation* p) {
  require_samples(ds);
  NcReport r;
  const nn::Outputs clean = nn::forward_with_features(m, ds.images);
  const CovarianceStats cs = covariance_stats_present(clean.features, ds.labels, 2);
  r.clean = nc_metric(cs);
  r.clean_classes = cs.classes.size();
  if (p) {
    const nn::Outputs adv = nn::forward_with_features(m, attack::apply(*p, ds.images));
    std::vector<std::size_t> pred(ds.size());
    const std::size_t K = adv.logits.dim(1);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pred[i] = nn::argmax(adv.logits.data().subspan(i * K, K));
    }
    const CovarianceStats ps = covariance_stats_present(adv.features, pred, 2);
    r.perturbed = nc_metric(ps);
    r.perturbed_classes = ps.classes.size();
  }
  return r;
}

DominantClass dominant_class_check(const nn::Classifier& m, const data::LabeledDataset& ds,
                                   const attack::Perturbation& p) {
  require_samples(ds);
  Tensor canvas = p.delta;
  for (double& v : canvas.data()) v = std::clamp(0.5 + v, 0.0, 1.0);
  Shape dims = canvas.dims();
  dims.insert(dims.begin(), 1);
  DominantClass out;
  out.uap_class = nn::predict(m, canvas.reshaped(dims)).front();

  const auto adv = nn::predict(m, attack::apply(p, ds.images));
  const auto hist = class_histogram(adv, m.num_classes());
  for (std::size_t i = 0; i < hist.size(); ++i) {
    if (hist[i].first == out.uap_class) {
      out.rank = i + 1;
      break;
    }
  }
  return out;
}

std::vector<std::vector<double>> transfer_matrix(
    std::span<const nn::Classifier* const> models,
    std::span<const attack::Perturbation> perturbations, const data::LabeledDataset& ds) {
  if (models.empty() || perturbations.empty()) {
    throw ArgumentError("transfer matrix needs at least one model and one perturbation");
  }
  std::vector<std::vector<double>> out(perturbations.size(),
                                       std::vector<double>(models.size(), 0.0));
  for (std::size_t i = 0; i < perturbations.size(); ++i)
    for (std::size_t j = 0; j < models.size(); ++j)
      out[i][j] = fooling_ratio(*models[j], ds, perturbations[i]);
  return out;
}

RedundancyResult redundancy_sweep(const nn::Classifier& m, const data::LabeledDataset& train,
                                  const data::LabeledDataset& eval,
                                  std::span<const std::size_t> per_class_counts,
                                  attack::AttackConfig cfg, std::uint64_t subsample_seed) {
  if (per_class_counts.empty()) throw ArgumentError("redundancy sweep needs at least one count");
  const auto available = train.class_counts();
  const std::size_t smallest = *std::min_element(available.begin(), available.end());
  for (std::size_t i = 0; i < per_class_counts.size(); ++i) {
    const std::size_t n = per_class_counts[i];
    if (n == 0 || n > smallest) {
      throw ArgumentError("per-class count " + std::to_string(n) + " outside [1, " +
                          std::to_string(smallest) + "]");
    }
    if (i > 0 && n >= per_class_counts[i - 1]) {
      throw ArgumentError("per-class counts must be strictly descending");
    }
  }
  cfg.augment = false;

  RedundancyResult res;
  const auto full = attack::craft_uap(m, train, cfg);
  res.full_fooling_ratio = fooling_ratio(m, eval, full.perturbation);
  for (std::size_t n : per_class_counts) {
    const auto subset = data::subsample_per_class(train, n, subsample_seed);
    const auto p = attack::craft_uap(m, subset, cfg).perturbation;
    RedundancyRow row;
    row.per_class = n;
    row.fooling_ratio = fooling_ratio(m, eval, p);
    row.ratio_to_full = res.full_fooling_ratio > 0.0 ? row.fooling_ratio / res.full_fooling_ratio
                                                     : 0.0;
    res.rows.push_back(row);
  }
  return res;
}

}  // namespace fguap::analysis
