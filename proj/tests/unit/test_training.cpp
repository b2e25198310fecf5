#include <gtest/gtest.h>

#include <cmath>

#include "semtest/error.hpp"
#include "semtest/image.hpp"
#include "semtest/random.hpp"
#include "semtest/training.hpp"
#include "helpers.hpp"

using namespace semtest;
using semtest::testing::small_classifier_spec;

namespace {

bool same_weights(const ClassifierModel& a, const ClassifierModel& b) {
  const NamedTensors ta = a.to_named(), tb = b.to_named();
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].first != tb[i].first || !bitwise_equal(ta[i].second, tb[i].second)) return false;
  }
  return true;
}

TrainConfig quick_config() {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 16;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST(Optimizer, SgdMomentumByHand) {
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.momentum = 0.9;
  auto w = std::make_shared<Tensor>(Tensor::vector({1.0, -1.0}));
  Optimizer opt(cfg, {w});
  opt.step({Tensor::vector({2.0, 0.0})});
  EXPECT_NEAR((*w)[0], 0.8, 1e-15);
  opt.step({Tensor::vector({2.0, 0.0})});
  EXPECT_NEAR((*w)[0], 0.8 - 0.1 * 3.8, 1e-15);
  EXPECT_EQ((*w)[1], -1.0);
}

TEST(Optimizer, AdamFirstStepIsSignedLearningRate) {
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::Adam;
  cfg.learning_rate = 0.01;
  auto w = std::make_shared<Tensor>(Tensor::vector({0.0, 0.0, 0.0}));
  Optimizer opt(cfg, {w});
  opt.step({Tensor::vector({5.0, -0.5, 0.0})});
  EXPECT_NEAR((*w)[0], -0.01, 1e-9);
  EXPECT_NEAR((*w)[1], 0.01, 1e-9);
  EXPECT_EQ((*w)[2], 0.0);
}

TEST(Optimizer, RejectsGradientCountMismatch) {
  auto w = std::make_shared<Tensor>(Tensor::vector({0.0}));
  Optimizer opt(TrainConfig{}, {w});
  EXPECT_THROW(opt.step({}), InvalidArgument);
}

TEST(TrainConfig, NamesAndValidation) {
  EXPECT_EQ(parse_loss(loss_name(LossKind::MeanSquared)), LossKind::MeanSquared);
  EXPECT_EQ(parse_loss("cross-entropy"), LossKind::CrossEntropy);
  EXPECT_EQ(parse_optimizer("adam"), OptimizerKind::Adam);
  EXPECT_THROW(parse_loss("hinge"), InvalidArgument);
  TrainConfig cfg;
  cfg.learning_rate = 0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = TrainConfig{};
  cfg.momentum = 1.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
}

TEST(Classifier, ZeroEpochsReturnsInitialization) {
  const LabeledDataset data = build_unbiased_dataset(2, 20, 1);
  TrainConfig cfg = quick_config();
  cfg.epochs = 0;
  const ClassifierModel f = train_classifier(data, cfg, small_classifier_spec());
  EXPECT_TRUE(same_weights(f, ClassifierModel::initialize(small_classifier_spec(), derive_seed(cfg.seed, "classifier-init"))));
}

TEST(Classifier, TrainingIsDeterministic) {
  const LabeledDataset data = build_unbiased_dataset(2, 30, 2);
  const ClassifierModel a = train_classifier(data, quick_config(), small_classifier_spec());
  const ClassifierModel b = train_classifier(data, quick_config(), small_classifier_spec());
  EXPECT_TRUE(same_weights(a, b));
  TrainConfig other = quick_config();
  other.seed = 4;
  EXPECT_FALSE(same_weights(a, train_classifier(data, other, small_classifier_spec())));
}

TEST(Classifier, SmallStepsNeverIncreaseBatchLoss) {
  const LabeledDataset data = build_unbiased_dataset(2, 160, 3);
  for (LossKind loss : {LossKind::CrossEntropy, LossKind::MeanSquared}) {
    ClassifierModel f = ClassifierModel::initialize(small_classifier_spec(), 5);
    for (std::size_t b = 0; b < 20; ++b) {
      std::vector<Tensor> rows;
      std::vector<std::size_t> labels;
      for (std::size_t i = 0; i < 16; ++i) {
        rows.push_back(data.images[b * 16 + i]);
        labels.push_back(data.labels[b * 16 + i]);
      }
      const Tensor batch = stack_rows(rows);
      const double before = classifier_loss(f, batch, labels, loss);
      f = classifier_sgd_step(f, batch, labels, loss, 1e-4);
      EXPECT_LE(classifier_loss(f, batch, labels, loss), before) << "batch " << b;
    }
  }
}

TEST(Classifier, LossesAtZeroWeights) {
  const ClassifierModel f = ClassifierModel::zeros(ClassifierSpec{});
  const Tensor x(Shape{2, kImageNumel}, 0.3);
  EXPECT_NEAR(classifier_loss(f, x, {0, 1}, LossKind::CrossEntropy), std::log(2.0), 1e-12);
  // Squared error of (0.5, 0.5) against a one-hot target, averaged over every entry.
  EXPECT_NEAR(classifier_loss(f, x, {0, 1}, LossKind::MeanSquared), 0.25, 1e-12);
}

TEST(Classifier, ZeroBudgetAdversarialTrainingEqualsPlainTraining) {
  const LabeledDataset data = build_unbiased_dataset(2, 24, 6);
  TrainConfig cfg = quick_config();
  cfg.epochs = 1;
  const ClassifierModel plain = train_classifier(data, cfg, small_classifier_spec());
  const ClassifierModel adv =
      adversarial_train(data, AttackConfig::with_budget(Norm::Linf, 0.0, 3), cfg, small_classifier_spec());
  EXPECT_TRUE(same_weights(plain, adv));
}

TEST(Classifier, AdversarialTrainingRequiresUntargetedAttack) {
  const LabeledDataset data = build_unbiased_dataset(2, 4, 6);
  AttackConfig attack;
  attack.mode = TestMode::Targeted;
  EXPECT_THROW(adversarial_train(data, attack, quick_config(), small_classifier_spec()), InvalidArgument);
}

TEST(Classifier, RejectsBadData) {
  LabeledDataset data = build_unbiased_dataset(2, 4, 7);
  data.labels[0] = 5;
  EXPECT_THROW(train_classifier(data, quick_config(), small_classifier_spec()), InvalidArgument);
  EXPECT_THROW(train_classifier(LabeledDataset{}, quick_config(), small_classifier_spec()), InvalidArgument);
}

TEST(Bias, Verdict) {
  EXPECT_TRUE(bias_verdict(0.9, 0.3));
  EXPECT_FALSE(bias_verdict(0.89, 0.1));
  EXPECT_FALSE(bias_verdict(1.0, 0.31));
}

TEST(Embedding, BlocksAndDirections) {
  const LatentEmbedding e(16);
  std::size_t covered = 0;
  for (Feature f : {Feature::BackgroundHue, Feature::ObjectHue, Feature::CenterX, Feature::CenterY, Feature::Size}) {
    const auto b = e.block(f);
    EXPECT_EQ(b.offset, covered);
    covered += b.length;
    const Tensor d = e.direction(f);
    EXPECT_NEAR(l2_norm(d), 1.0, 1e-12);
    for (std::size_t i = 0; i < 16; ++i) {
      if (i < b.offset || i >= b.offset + b.length) EXPECT_EQ(d[i], 0.0);
    }
  }
  EXPECT_EQ(covered, 16u);
  EXPECT_THROW(LatentEmbedding(4), InvalidArgument);
}

TEST(Embedding, ScenesAreValidAndMonotone) {
  const LatentEmbedding e(16);
  const Tensor step = e.direction(Feature::Size);
  Rng rng(8);
  for (int i = 0; i < 500; ++i) {
    Tensor z(Shape{16});
    for (double& v : z.data()) v = rng.normal();
    const SceneParams p = e.scene(z, i % kShapeCount);
    EXPECT_NO_THROW(validate(p));
    EXPECT_GE(hue_distance(p.object_hue, p.background_hue), kMinHueSeparation - 1e-12);
    Tensor moved = z;
    for (std::size_t j = 0; j < 16; ++j) moved[j] += step[j];
    EXPECT_GT(e.scene(moved, 0).size, e.scene(z, 0).size);
  }
}

TEST(Distillation, ErrorIsDeterministicAndPositive) {
  const GeneratorModel g = GeneratorModel::initialize(GeneratorSpec{}, 9);
  const double a = distillation_error(g, 20, 1);
  EXPECT_GT(a, 0.0);
  EXPECT_EQ(a, distillation_error(g, 20, 1));
  EXPECT_THROW(distillation_error(g, 0, 1), InvalidArgument);
}

TEST(Distillation, ShortRunIsDeterministicAndReducesError) {
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::Adam;
  cfg.learning_rate = 1e-3;
  cfg.epochs = 2;
  cfg.samples_per_epoch = 256;
  cfg.seed = 10;
  const GeneratorSpec spec = semtest::testing::small_generator_spec(2);
  const GeneratorModel a = train_generator_distilled(cfg, spec);
  const GeneratorModel b = train_generator_distilled(cfg, spec);
  EXPECT_TRUE(bitwise_equal(a.forward(Tensor(Shape{spec.latent_dim}, 0.2), 1).image,
                            b.forward(Tensor(Shape{spec.latent_dim}, 0.2), 1).image));
  const GeneratorModel init = GeneratorModel::initialize(spec, derive_seed(cfg.seed, "generator-init"));
  EXPECT_LT(distillation_error(a, 100, 2), distillation_error(init, 100, 2));
}
