#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <utility>

#include "fguap/errors.hpp"
#include "fguap/model.hpp"
#include "fguap/trainer.hpp"
#include "fixtures.hpp"
#include "stubs.hpp"

namespace fguap {
namespace {

TEST(Model, SameSeedGivesIdenticalWeights) {
  for (auto arch : {nn::Arch::kConvNet, nn::Arch::kMlp, nn::Arch::kAttnNet}) {
    const auto a = nn::Model::build(arch, 8, 3);
    const auto b = nn::Model::build(arch, 8, 3);
    const auto c = nn::Model::build(arch, 8, 4);
    const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(*pa[i].second, *pb[i].second);
    EXPECT_NE(*pa[0].second, *pc[0].second);
    EXPECT_EQ(a.feature_dim(), nn::kFeatureDim);
  }
}

TEST(Model, OutputShapesAndIdenticalRows) {
  for (auto arch : {nn::Arch::kConvNet, nn::Arch::kMlp, nn::Arch::kAttnNet}) {
    const auto m = nn::Model::build(arch, 8, 1);
    Tensor x({2, 1, 24, 24});
    for (std::size_t i = 0; i < 576; ++i) x[i] = x[576 + i] = (i % 13) / 13.0;
    const auto out = nn::forward_with_features(m, x);
    ASSERT_EQ(out.logits.dims(), (Shape{2, 8}));
    ASSERT_EQ(out.features.dims(), (Shape{2, nn::kFeatureDim}));
    for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(out.logits.at(0, j), out.logits.at(1, j));
  }
}

TEST(Model, InputShapeIsChecked) {
  const auto m = nn::Model::build(nn::Arch::kConvNet, 8, 1);
  EXPECT_THROW(nn::predict(m, Tensor({1, 1, 20, 20})), ShapeError);
}

TEST(Model, ArchTags) {
  EXPECT_EQ(nn::parse_arch("attnnet"), nn::Arch::kAttnNet);
  EXPECT_EQ(nn::arch_name(nn::Arch::kMlp), "mlp");
  EXPECT_THROW(nn::parse_arch("resnet"), ArgumentError);
}

TEST(Argmax, FirstMaximumWins) {
  EXPECT_EQ(nn::argmax(std::vector<double>{0.1, 0.9, 0.3}), 1u);
  EXPECT_EQ(nn::argmax(std::vector<double>{0.5, 0.5}), 0u);
}

TEST(Accuracy, UntrainedModelIsNearChance) {
  const auto [train, test] = data::generate_synthetic({});
  const auto m = nn::Model::build(nn::Arch::kConvNet, 8, 0);
  EXPECT_NEAR(train::evaluate_accuracy(m, train), 1.0 / 8.0, 0.05);
}

TEST(Accuracy, MemorizerIsPerfect) {
  const auto ds = testing::tiny_split(4, 5, 8, 2);
  testing::TableStub m(ds.sample_shape(), 4);
  m.remember(ds.images, ds.labels);
  EXPECT_EQ(train::evaluate_accuracy(m, ds), 1.0);
  EXPECT_THROW(train::evaluate_accuracy(m, data::LabeledDataset{}), ArgumentError);
}

TEST(Trainer, ZeroEpochsLeavesWeightsUnchanged) {
  const auto ds = testing::tiny_split(3, 4, 8, 5);
  auto m = nn::Model::build(nn::Arch::kMlp, 3, 2, {1, 8, 8});
  const auto before = m;
  train::TrainConfig cfg;
  cfg.epochs = 0;
  EXPECT_TRUE(train::train(m, ds, cfg).empty());
  const auto a = before.parameters();
  const auto b = std::as_const(m).parameters();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i].second, *b[i].second);
}

TEST(Trainer, DeterministicAndLearnsATinySet) {
  const auto ds = testing::tiny_split(3, 8, 8, 6);
  train::TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 8;
  cfg.learning_rate = 3e-3;
  auto a = nn::Model::build(nn::Arch::kMlp, 3, 1, {1, 8, 8});
  auto b = a;
  const auto ha = train::train(a, ds, cfg, &ds);
  const auto hb = train::train(b, ds, cfg, &ds);
  ASSERT_EQ(ha.size(), 30u);
  for (std::size_t i = 0; i < ha.size(); ++i) EXPECT_EQ(ha[i].loss, hb[i].loss);
  EXPECT_EQ(nn::encode_checkpoint(a), nn::encode_checkpoint(b));
  EXPECT_LT(ha.back().loss, ha.front().loss);
  EXPECT_GE(ha.back().train_accuracy, 0.9);
  ASSERT_TRUE(a.training().has_value());
  EXPECT_EQ(a.training()->epochs, 30u);
}

TEST(Trainer, InvalidConfigThrows) {
  const auto ds = testing::tiny_split(3, 2, 8, 7);
  auto m = nn::Model::build(nn::Arch::kMlp, 3, 1, {1, 8, 8});
  train::TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(train::train(m, ds, cfg), ArgumentError);
  cfg = {};
  cfg.learning_rate = 0;
  EXPECT_THROW(train::train(m, ds, cfg), ArgumentError);
}

TEST(Trainer, DivergenceIsReported) {
  const auto ds = testing::tiny_split(3, 4, 8, 8);
  auto m = nn::Model::build(nn::Arch::kMlp, 3, 1, {1, 8, 8});
  train::TrainConfig cfg;
  cfg.epochs = 5;
  cfg.learning_rate = 1e300;
  EXPECT_THROW(train::train(m, ds, cfg), train::DivergenceError);
}

TEST(Trainer, HistoryCsvHeader) {
  const auto path = std::filesystem::temp_directory_path() / "fguap_history_test.csv";
  train::write_history_csv(path, {{1, 0.5, 0.25, 0.125}});
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "epoch,loss,train_acc,test_acc");
  EXPECT_EQ(row, "1,0.5,0.25,0.125");
  std::filesystem::remove(path);
}

TEST(Recipes, FixedBudgets) {
  EXPECT_EQ(train::default_recipe(nn::Arch::kConvNet).epochs, 60u);
  EXPECT_EQ(train::default_recipe(nn::Arch::kMlp).epochs, 80u);
  EXPECT_EQ(train::default_recipe(nn::Arch::kAttnNet).epochs, 120u);
}

}  // namespace
}  // namespace fguap
