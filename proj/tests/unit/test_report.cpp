#include <gtest/gtest.h>

#include "fguap/errors.hpp"
#include "fguap/report.hpp"
#include "fixtures.hpp"
#include "stubs.hpp"

namespace fguap {
namespace {

testing::LinearStub identity_stub(std::size_t k) {
  Tensor w({k, k});
  for (std::size_t i = 0; i < k; ++i) w.at(i, i) = 1.0;
  return testing::LinearStub({1, 1, k}, w, Tensor({k}));
}

report::EvalReport sample_report(bool targeted) {
  const auto ds = testing::one_hot_images(4, 5, 1);
  attack::Perturbation p;
  p.xi = 0.9;
  p.delta = Tensor({1, 1, 4}, {0.0, -0.9, 0.0, 0.0});
  if (targeted) p.target = 3;
  return report::evaluate(identity_stub(4), ds, p, {"m.uapckpt", "p.uappert", "test.uapdata"});
}

TEST(EvalReport, FieldsFollowTheDefinitions) {
  const auto r = sample_report(false);
  EXPECT_EQ(r.num_samples, 20u);
  EXPECT_EQ(r.clean_accuracy, 1.0);
  // Every class-1 sample moves elsewhere and nothing else changes.
  EXPECT_EQ(r.fooling_ratio, 0.25);
  EXPECT_EQ(r.perturbed_accuracy, 0.75);
  EXPECT_LE(r.d1, r.d3);
  EXPECT_LE(r.d3, r.d5);
  EXPECT_EQ(r.d5, 1.0);
  EXPECT_FALSE(r.target.has_value());
  ASSERT_TRUE(r.nc_clean.has_value());
  ASSERT_TRUE(r.nc_perturbed.has_value());
  EXPECT_EQ(r.nc_perturbed_classes, 3u);
  EXPECT_TRUE(r.nc_note.empty());
}

TEST(EvalReport, JsonValidatesAndCarriesSchema) {
  for (bool targeted : {false, true}) {
    const auto j = report::to_json(sample_report(targeted));
    EXPECT_NO_THROW(report::validate_report_json(j));
    EXPECT_EQ(j["schema"], report::kSchemaTag);
    EXPECT_EQ(j["mode"], targeted ? "targeted" : "untargeted");
    EXPECT_EQ(j["target_class"].is_null(), !targeted);
    const auto text = report::to_json_text(sample_report(targeted));
    EXPECT_EQ(text.back(), '\n');
    EXPECT_EQ(nlohmann::json::parse(text), j);
  }
}

TEST(EvalReport, ValidationCatchesBrokenDocuments) {
  const auto good = report::to_json(sample_report(true));
  auto expect_invalid = [](nlohmann::json doc) {
    try {
      report::validate_report_json(doc);
      ADD_FAILURE() << "accepted " << doc.dump();
    } catch (const FormatError& e) {
      EXPECT_EQ(e.kind(), FormatError::Kind::kValidation);
    }
  };
  auto j = good;
  j.erase("fooling_ratio");
  expect_invalid(j);
  j = good;
  j["d1"] = 0.9;
  j["d3"] = 0.5;
  expect_invalid(j);
  j = good;
  j["clean_accuracy"] = 1.5;
  expect_invalid(j);
  j = good;
  j["target_class"] = nullptr;
  expect_invalid(j);
  j = good;
  j["schema"] = "other/1";
  expect_invalid(j);
  j = good;
  j["num_samples"] = -3;
  expect_invalid(j);
  expect_invalid(nlohmann::json::array());
}

TEST(EvalReport, TooFewClassesLeaveCollapseEmptyWithANote) {
  data::LabeledDataset ds;
  ds.num_classes = 2;
  ds.images = Tensor({3, 1, 1, 2}, {0.9, 0.1, 0.8, 0.2, 0.1, 0.9});
  ds.labels = {0, 0, 1};
  const auto r = report::evaluate(identity_stub(2), ds, attack::zero_perturbation({1, 1, 2}, 0.1));
  EXPECT_FALSE(r.nc_clean.has_value());
  EXPECT_FALSE(r.nc_note.empty());
  EXPECT_NO_THROW(report::validate_report_json(report::to_json(r)));
}

TEST(EvalReport, ShapeMismatchThrows) {
  const auto ds = testing::one_hot_images(3, 2, 1);
  EXPECT_THROW(report::evaluate(identity_stub(3), ds, attack::zero_perturbation({1, 2, 3}, 0.1)),
               ShapeError);
}

TEST(Csv, TransferAndRedundancyLayouts) {
  EXPECT_EQ(report::transfer_csv({"a", "b"}, {"x", "y"}, {{0.5, 0.25}, {0, 1}}),
            "surrogate,victim,fr\na,x,0.5\na,y,0.25\nb,x,0\nb,y,1\n");
  analysis::RedundancyResult r;
  r.full_fooling_ratio = 0.8;
  r.rows = {{10, 0.8, 1.0}, {1, 0.4, 0.5}};
  EXPECT_EQ(report::redundancy_csv(r), "count,fr,ratio_to_full\n10,0.8,1\n1,0.4,0.5\n");
  EXPECT_THROW(report::transfer_csv({"a"}, {"x"}, {}), ArgumentError);
}

}  // namespace
}  // namespace fguap
