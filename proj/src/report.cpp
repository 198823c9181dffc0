#include "fguap/report.hpp"

#include <algorithm>
#include <sstream>

#include "fguap/binary_io.hpp"
#include "fguap/errors.hpp"

namespace fguap::report {

namespace {

double fraction(std::size_t hits, std::size_t total) {
  return static_cast<double>(hits) / static_cast<double>(total);
}

double accuracy(std::span<const std::size_t> pred, std::span<const std::size_t> labels) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i];
  return fraction(hits, pred.size());
}

template <typename T>
nlohmann::json optional_json(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

[[noreturn]] void invalid(const std::string& what) {
  throw FormatError(FormatError::Kind::kValidation, "eval report: " + what);
}

const nlohmann::json& field(const nlohmann::json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end()) invalid(std::string("missing key \"") + key + "\"");
  return *it;
}

double ratio_field(const nlohmann::json& doc, const char* key) {
  const auto& v = field(doc, key);
  if (!v.is_number()) invalid(std::string(key) + " must be a number");
  const double x = v.get<double>();
  if (!(x >= 0.0 && x <= 1.0)) invalid(std::string(key) + " outside [0,1]");
  return x;
}

void count_field(const nlohmann::json& doc, const char* key) {
  if (!field(doc, key).is_number_unsigned()) {
    invalid(std::string(key) + " must be a non-negative integer");
  }
}

void nullable(const nlohmann::json& doc, const char* key, bool (nlohmann::json::*is)() const) {
  const auto& v = field(doc, key);
  if (!v.is_null() && !(v.*is)()) invalid(std::string(key) + " has the wrong type");
}

}  // namespace

EvalReport evaluate(const nn::Classifier& m, const data::LabeledDataset& ds,
                    const attack::Perturbation& p, Provenance source) {
  if (ds.size() == 0) throw ArgumentError("cannot evaluate on an empty dataset");
  p.validate();
  if (p.delta.dims() != m.input_shape()) {
    throw ShapeError("perturbation " + shape_string(p.delta.dims()) + " does not fit model input " +
                     shape_string(m.input_shape()));
  }

  EvalReport r;
  r.source = std::move(source);
  r.num_samples = ds.size();
  r.method = p.method;
  r.xi = p.xi;

  const auto clean = nn::predict(m, ds.images);
  const auto adv = nn::predict(m, attack::apply(p, ds.images));
  r.clean_accuracy = accuracy(clean, ds.labels);
  r.perturbed_accuracy = accuracy(adv, ds.labels);
  std::size_t flipped = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) flipped += clean[i] != adv[i];
  r.fooling_ratio = fraction(flipped, clean.size());

  if (p.target) {
    r.target = p.target;
    r.targeted_fooling_ratio = analysis::targeted_fooling_ratio(m, ds, p, *p.target);
  }

  r.d1 = analysis::dominance_ratio(adv, 1);
  r.d3 = analysis::dominance_ratio(adv, 3);
  r.d5 = analysis::dominance_ratio(adv, 5);
  r.dominant_class = analysis::class_histogram(adv, m.num_classes()).front().first;
  const analysis::DominantClass dc = analysis::dominant_class_check(m, ds, p);
  r.uap_class = dc.uap_class;
  r.uap_class_rank = dc.rank;

  try {
    const analysis::NcReport clean_only = analysis::nc_report(m, ds, nullptr);
    r.nc_clean = clean_only.clean;
    r.nc_clean_classes = clean_only.clean_classes;
    const analysis::NcReport both = analysis::nc_report(m, ds, &p);
    r.nc_perturbed = both.perturbed;
    r.nc_perturbed_classes = both.perturbed_classes;
  } catch (const ArgumentError& e) {
    r.nc_note = e.what();
  }
  return r;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["schema"] = kSchemaTag;
  j["model"] = r.source.model;
  j["perturbation"] = r.source.perturbation;
  j["dataset"] = r.source.dataset;
  j["num_samples"] = r.num_samples;
  j["method"] = std::string(attack::method_name(r.method));
  j["mode"] = r.target ? "targeted" : "untargeted";
  j["xi"] = r.xi;
  j["clean_accuracy"] = r.clean_accuracy;
  j["perturbed_accuracy"] = r.perturbed_accuracy;
  j["fooling_ratio"] = r.fooling_ratio;
  j["target_class"] = optional_json(r.target);
  j["targeted_fooling_ratio"] = optional_json(r.targeted_fooling_ratio);
  j["d1"] = r.d1;
  j["d3"] = r.d3;
  j["d5"] = r.d5;
  j["dominant_class"] = r.dominant_class;
  j["uap_class"] = r.uap_class;
  j["uap_class_rank"] = r.uap_class_rank;
  j["nc_clean"] = optional_json(r.nc_clean);
  j["nc_perturbed"] = optional_json(r.nc_perturbed);
  j["nc_clean_classes"] = r.nc_clean_classes;
  j["nc_perturbed_classes"] = r.nc_perturbed_classes;
  j["nc_note"] = r.nc_note.empty() ? nlohmann::json(nullptr) : nlohmann::json(r.nc_note);
  return j;
}

std::string to_json_text(const EvalReport& r) { return to_json(r).dump(2) + "\n"; }

void validate_report_json(const nlohmann::json& doc) {
  if (!doc.is_object()) invalid("document is not an object");
  const auto& schema = field(doc, "schema");
  if (!schema.is_string() || schema.get<std::string>() != kSchemaTag) {
    invalid(std::string("schema must be \"") + kSchemaTag + "\"");
  }
  for (const char* key : {"model", "perturbation", "dataset", "method", "mode"}) {
    if (!field(doc, key).is_string()) invalid(std::string(key) + " must be a string");
  }
  const std::string mode = doc["mode"].get<std::string>();
  if (mode != "targeted" && mode != "untargeted") invalid("mode must be targeted or untargeted");
  if (!field(doc, "xi").is_number() || doc["xi"].get<double>() < 0.0) {
    invalid("xi must be a non-negative number");
  }
  for (const char* key : {"num_samples", "dominant_class", "uap_class", "uap_class_rank",
                          "nc_clean_classes", "nc_perturbed_classes"}) {
    count_field(doc, key);
  }
  for (const char* key : {"clean_accuracy", "perturbed_accuracy", "fooling_ratio"}) {
    ratio_field(doc, key);
  }
  const double d1 = ratio_field(doc, "d1");
  const double d3 = ratio_field(doc, "d3");
  const double d5 = ratio_field(doc, "d5");
  if (!(d1 <= d3 && d3 <= d5)) invalid("dominance ratios must satisfy d1 <= d3 <= d5");

  nullable(doc, "target_class", &nlohmann::json::is_number_unsigned);
  nullable(doc, "targeted_fooling_ratio", &nlohmann::json::is_number);
  nullable(doc, "nc_clean", &nlohmann::json::is_number);
  nullable(doc, "nc_perturbed", &nlohmann::json::is_number);
  nullable(doc, "nc_note", &nlohmann::json::is_string);
  if (!doc["targeted_fooling_ratio"].is_null()) ratio_field(doc, "targeted_fooling_ratio");
  if ((mode == "targeted") == doc["target_class"].is_null()) {
    invalid("target_class must be set exactly when mode is targeted");
  }
}

std::string transfer_csv(const std::vector<std::string>& surrogates,
                         const std::vector<std::string>& victims,
                         const std::vector<std::vector<double>>& fr) {
  if (fr.size() != surrogates.size()) throw ArgumentError("transfer rows do not match surrogates");
  std::ostringstream out;
  out << "surrogate,victim,fr\n";
  for (std::size_t i = 0; i < surrogates.size(); ++i) {
    if (fr[i].size() != victims.size()) {
      throw ArgumentError("transfer columns do not match victims");
    }
    for (std::size_t j = 0; j < victims.size(); ++j) {
      out << surrogates[i] << ',' << victims[j] << ',' << io::format_real(fr[i][j]) << '\n';
    }
  }
  return out.str();
}

std::string redundancy_csv(const analysis::RedundancyResult& r) {
  std::ostringstream out;
  out << "count,fr,ratio_to_full\n";
  for (const auto& row : r.rows) {
    out << row.per_class << ',' << io::format_real(row.fooling_ratio) << ','
        << io::format_real(row.ratio_to_full) << '\n';
  }
  return out.str();
}

}  // namespace fguap::report
