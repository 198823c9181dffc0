#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fguap/analysis.hpp"

namespace fguap::report {

/// Identifies the three inputs of an evaluation (usually file names).
struct Provenance {
  std::string model;
  std::string perturbation;
  std::string dataset;
};

struct EvalReport {
  Provenance source;
  std::size_t num_samples = 0;
  attack::Method method = attack::Method::kFeatureGathering;
  double xi = 0.0;

  double clean_accuracy = 0.0;
  double perturbed_accuracy = 0.0;
  double fooling_ratio = 0.0;
  std::optional<std::size_t> target;
  std::optional<double> targeted_fooling_ratio;

  double d1 = 0.0;
  double d3 = 0.0;
  double d5 = 0.0;
  std::size_t dominant_class = 0;  // most frequent perturbed prediction
  std::size_t uap_class = 0;       // prediction for the rendered perturbation
  std::size_t uap_class_rank = 0;

  /// Unset when fewer than two classes keep two members; nc_note says why.
  std::optional<double> nc_clean;
  std::optional<double> nc_perturbed;
  std::size_t nc_clean_classes = 0;
  std::size_t nc_perturbed_classes = 0;
  std::string nc_note;
};

EvalReport evaluate(const nn::Classifier& m, const data::LabeledDataset& ds,
                    const attack::Perturbation& p, Provenance source = {});

inline constexpr const char* kSchemaTag = "fguap.eval/1";

nlohmann::json to_json(const EvalReport& r);
/// Pretty-printed document with a trailing newline.
std::string to_json_text(const EvalReport& r);

/// Checks required keys, value types, ratio ranges and D1 <= D3 <= D5.
/// Throws FormatError(kValidation) naming the first problem.
void validate_report_json(const nlohmann::json& doc);

/// "surrogate,victim,fr" with one row per (surrogate, victim) pair,
/// surrogate-major. fr[i][j] is perturbation i against model j.
std::string transfer_csv(const std::vector<std::string>& surrogates,
                         const std::vector<std::string>& victims,
                         const std::vector<std::vector<double>>& fr);

/// "count,fr,ratio_to_full" with one row per requested count.
std::string redundancy_csv(const analysis::RedundancyResult& r);

}  // namespace fguap::report
