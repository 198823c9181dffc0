#include <gtest/gtest.h>

#include <bit>
#include <cmath>

#include "fguap/analysis.hpp"
#include "fguap/attack.hpp"
#include "fguap/errors.hpp"
#include "fguap/ops.hpp"
#include "fixtures.hpp"
#include "stubs.hpp"

namespace fguap {
namespace {

double fg(Tensor h, Tensor h_adv) {
  ad::Tape t;
  return attack::fg_loss(t.constant(std::move(h)), t.constant(std::move(h_adv))).value().item();
}

TEST(FgLoss, HandCases) {
  EXPECT_DOUBLE_EQ(fg(Tensor::vector({0.3, -2, 5}), Tensor::vector({0.3, -2, 5})), 1.0);
  EXPECT_DOUBLE_EQ(fg(Tensor::vector({1, 0, 0}), Tensor::vector({0, 1, 0})), 0.0);
  EXPECT_NEAR(fg(Tensor::vector({3, 4}), Tensor::vector({4, 3})), 0.96, 1e-15);
  // Batch form averages the row cosines.
  EXPECT_NEAR(fg(Tensor::matrix({{3, 4}, {1, 0}}), Tensor::matrix({{4, 3}, {0, 1}})), 0.48, 1e-15);
  EXPECT_THROW(fg(Tensor::vector({0, 0}), Tensor::vector({1, 1})), DegenerateFeatureError);
}

TEST(TargetedLoss, HandCases) {
  ad::Tape t;
  const double same = attack::targeted_fg_loss(t.constant(Tensor::vector({1, 2})),
                                               t.constant(Tensor::vector({1, 2})),
                                               t.constant(Tensor::vector({5, 0, 7})), 1)
                          .value()
                          .item();
  EXPECT_DOUBLE_EQ(same, 1.0);
  const double hand = attack::targeted_fg_loss(t.constant(Tensor::vector({3, 4})),
                                               t.constant(Tensor::vector({4, 3})),
                                               t.constant(Tensor::vector({0, 2, 0})), 1)
                          .value()
                          .item();
  EXPECT_NEAR(hand, -1.04, 1e-15);
}

TEST(Apply, ZeroIsIdentityAndResultIsClamped) {
  const auto ds = testing::tiny_split(3, 2, 8, 1);
  EXPECT_EQ(attack::apply(attack::zero_perturbation({1, 8, 8}, 0.1), ds.images), ds.images);
  attack::Perturbation p;
  p.xi = 0.1;
  p.delta = Tensor::full({1, 8, 8}, 0.1);
  EXPECT_EQ(attack::apply(p, Tensor::full({2, 1, 8, 8}, 1.0)), Tensor::full({2, 1, 8, 8}, 1.0));
  EXPECT_THROW(attack::apply(p, Tensor({1, 1, 6, 6})), ShapeError);
}

TEST(RandomPerturbation, WithinBudgetAndSeeded) {
  const auto p = attack::uniform_random_perturbation({1, 24, 24}, 0.04, 7);
  EXPECT_LE(p.delta.max_abs(), 0.04);
  EXPECT_GT(p.delta.max_abs(), 0.03);
  EXPECT_EQ(p, attack::uniform_random_perturbation({1, 24, 24}, 0.04, 7));
  EXPECT_NE(p.delta, attack::uniform_random_perturbation({1, 24, 24}, 0.04, 8).delta);
}

TEST(Perturbation, ValidateRejectsBudgetViolation) {
  attack::Perturbation p = attack::zero_perturbation({1, 4, 4}, 0.1);
  p.delta[3] = 0.11;
  EXPECT_THROW(p.validate(), ArgumentError);
  p.delta[3] = -0.1;
  EXPECT_NO_THROW(p.validate());
}

TEST(Method, Tags) {
  EXPECT_EQ(attack::parse_method("fg"), attack::Method::kFeatureGathering);
  EXPECT_EQ(attack::method_name(attack::Method::kLogitCosine), "logit-cosine");
  EXPECT_THROW(attack::parse_method("pgd"), ArgumentError);
}

class Craft : public ::testing::Test {
 protected:
  data::LabeledDataset ds = testing::tiny_split(3, 6, 8, 3);
  nn::Model model = nn::Model::build(nn::Arch::kConvNet, 3, 2, {1, 8, 8});

  attack::AttackConfig config() const {
    attack::AttackConfig cfg;
    cfg.batch_size = 4;
    cfg.epochs = 3;
    cfg.seed = 5;
    return cfg;
  }
};

TEST_F(Craft, BudgetHoldsAfterEveryStep) {
  for (bool augment : {false, true}) {
    auto cfg = config();
    cfg.augment = augment;
    std::size_t seen = 0;
    const auto r = attack::craft_uap(model, ds, cfg, "convnet", [&](std::size_t step, const Tensor& d) {
      EXPECT_EQ(step, ++seen);
      EXPECT_LE(d.max_abs(), cfg.xi);
    });
    // 18 samples in batches of 4: five steps per epoch, remainder included.
    EXPECT_EQ(r.steps, 15u);
    EXPECT_EQ(seen, 15u);
    EXPECT_EQ(r.epoch_loss.size(), 3u);
    EXPECT_GT(r.perturbation.delta.max_abs(), 0.0);
    EXPECT_NO_THROW(r.perturbation.validate());
  }
}

TEST_F(Craft, ZeroEpochsGiveZeroDelta) {
  auto cfg = config();
  cfg.epochs = 0;
  const auto r = attack::craft_uap(model, ds, cfg);
  EXPECT_EQ(r.perturbation.delta, Tensor({1, 8, 8}));
  EXPECT_EQ(r.steps, 0u);
  EXPECT_EQ(attack::craft_logit_cosine_baseline(model, ds, cfg).perturbation.delta,
            Tensor({1, 8, 8}));
}

TEST_F(Craft, ZeroBudgetGivesZeroDelta) {
  auto cfg = config();
  cfg.xi = 0.0;
  const auto r = attack::craft_uap(model, ds, cfg);
  for (double v : r.perturbation.delta.data()) EXPECT_EQ(std::bit_cast<std::uint64_t>(v), 0u);
}

TEST_F(Craft, BitDeterministicAcrossRuns) {
  auto cfg = config();
  cfg.augment = true;
  const auto a = attack::craft_uap(model, ds, cfg, "x");
  const auto b = attack::craft_uap(model, ds, cfg, "x");
  EXPECT_EQ(a.perturbation, b.perturbation);
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
  cfg.seed = 6;
  EXPECT_NE(attack::craft_uap(model, ds, cfg, "x").perturbation.delta, a.perturbation.delta);
}

TEST_F(Craft, LeavesZeroOnTheFirstStep) {
  auto cfg = config();
  cfg.epochs = 1;
  cfg.batch_size = ds.size();
  EXPECT_GT(attack::craft_uap(model, ds, cfg).perturbation.delta.max_abs(), 0.0);
}

TEST_F(Craft, MetadataAndTargetedMode) {
  auto cfg = config();
  cfg.target = 2;
  const auto r = attack::craft_uap(model, ds, cfg, "convnet");
  EXPECT_EQ(r.perturbation.target, std::optional<std::size_t>(2));
  EXPECT_EQ(r.perturbation.surrogate, "convnet");
  EXPECT_EQ(r.perturbation.seed, 5u);
  EXPECT_EQ(r.perturbation.method, attack::Method::kFeatureGathering);
  cfg.target = 3;
  EXPECT_THROW(attack::craft_uap(model, ds, cfg), ArgumentError);
}

TEST_F(Craft, RejectsBadInputs) {
  auto cfg = config();
  cfg.batch_size = 0;
  EXPECT_THROW(attack::craft_uap(model, ds, cfg), ArgumentError);
  cfg = config();
  cfg.xi = -1;
  EXPECT_THROW(attack::craft_uap(model, ds, cfg), ArgumentError);
  const auto wide = testing::tiny_split(3, 2, 12, 3);
  EXPECT_THROW(attack::craft_uap(model, wide, config()), ShapeError);
}

TEST_F(Craft, FoolsALinearModelAlongItsWeights) {
  // On a linear feature map the loss is smooth, so a few steps must lower it.
  Rng rng(4);
  Tensor w({3, 64});
  for (auto& v : w.storage()) v = rng.uniform(-1, 1);
  const testing::LinearStub m({1, 8, 8}, w, Tensor({3}));
  auto cfg = config();
  cfg.xi = 0.3;
  cfg.epochs = 10;
  const auto r = attack::craft_uap(m, ds, cfg);
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
  EXPECT_EQ(analysis::fooling_ratio(m, ds, attack::zero_perturbation({1, 8, 8}, 0.3)), 0.0);
}

}  // namespace
}  // namespace fguap
