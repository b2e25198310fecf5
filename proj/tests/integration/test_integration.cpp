#include <gtest/gtest.h>

#include <algorithm>
#include <optional>

#include "semtest/analysis.hpp"
#include "semtest/baseline.hpp"
#include "semtest/random.hpp"
#include "semtest/run_config.hpp"
#include "semtest/testgen.hpp"
#include "semtest/training.hpp"

using namespace semtest;

namespace {

// Models shared across tests; each is trained on first use.
struct Trained {
  static const ClassifierModel& unbiased() {
    static const ClassifierModel f = [] {
      TrainConfig cfg;
      cfg.seed = 101;
      return train_classifier(build_unbiased_dataset(2, 500, 102), cfg);
    }();
    return f;
  }

  static const GeneratorModel& generator() {
    static const GeneratorModel g = [] {
      TrainConfig cfg = RunConfig().generator_train;
      cfg.seed = 103;
      return train_generator_distilled(cfg);
    }();
    return g;
  }

  static const BiasedDatasets& biased_data() {
    static const BiasedDatasets d = build_biased_dataset(BiasSpec{}, 2, 1000, 104);
    return d;
  }

  static const FaultInjection& fault() {
    static const FaultInjection fi = [] {
      TrainConfig cfg = RunConfig().classifier_train;
      cfg.seed = 105;
      return inject_fault(biased_data(), cfg);
    }();
    return fi;
  }
};

LabeledDataset correctly_classified(const ClassifierModel& f, const LabeledDataset& data, std::size_t limit) {
  LabeledDataset out;
  out.classes = data.classes;
  const auto predictions = f.predict_batch(data.images);
  for (std::size_t i = 0; i < data.size() && out.size() < limit; ++i) {
    if (predictions[i].predicted != data.labels[i]) continue;
    out.images.push_back(data.images[i]);
    out.labels.push_back(data.labels[i]);
    out.params.push_back(data.params[i]);
  }
  return out;
}

}  // namespace

TEST(Training, UnbiasedClassifierGeneralizes) {
  const LabeledDataset held_out = build_unbiased_dataset(2, 250, 106, Split::Test);
  ASSERT_EQ(held_out.size(), 500u);
  EXPECT_GE(accuracy(Trained::unbiased(), held_out), 0.95);
}

TEST(Training, ControlClassifierIgnoresTheBiasedFeature) {
  const ClassifierModel& f = Trained::unbiased();
  const double aligned = accuracy(f, Trained::biased_data().holdout_aligned);
  const double counter = accuracy(f, Trained::biased_data().holdout_counter);
  EXPECT_LE(std::abs(aligned - counter), 0.10) << "aligned " << aligned << " counter " << counter;
}

TEST(Training, FaultIsAcquired) {
  const BiasVerificationReport& r = Trained::fault().report;
  EXPECT_TRUE(r.fault_acquired);
  EXPECT_GE(r.aligned_accuracy, kAlignedThreshold);
  EXPECT_LE(r.counter_accuracy, kCounterThreshold);
}

TEST(Training, FaultIsAcquiredWithCrossEntropy) {
  TrainConfig cfg;
  cfg.seed = 107;
  EXPECT_TRUE(inject_fault(Trained::biased_data(), cfg).report.fault_acquired);
}

TEST(Baseline, PgdDefeatsUndefendedClassifier) {
  const ClassifierModel& f = Trained::unbiased();
  const LabeledDataset images = correctly_classified(f, build_unbiased_dataset(2, 500, 108), 200);
  ASSERT_EQ(images.size(), 200u);
  std::size_t successes = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    successes += pgd_attack(f, images.images[i], images.labels[i], AttackConfig{}).success;
  }
  EXPECT_GE(static_cast<double>(successes) / 200.0, 0.8) << successes << " of 200";
}

TEST(Training, AdversarialTrainingBuysRobustness) {
  const RunConfig defaults;
  const LabeledDataset train = build_unbiased_dataset(2, 500, 109);
  const LabeledDataset test = build_unbiased_dataset(2, 100, 110, Split::Test);
  TrainConfig cfg = defaults.adv_train;
  cfg.seed = 111;
  AttackConfig attack = defaults.adv_attack;
  attack.seed = 112;
  const ClassifierModel robust = adversarial_train(train, attack, cfg);
  const ClassifierModel& clean = Trained::unbiased();
  const double robust_of_robust = robust_accuracy(robust, test, defaults.attack);
  const double robust_of_clean = robust_accuracy(clean, test, defaults.attack);
  EXPECT_GE(robust_of_robust, robust_of_clean + 0.20) << robust_of_robust << " vs " << robust_of_clean;
  EXPECT_LE(accuracy(clean, test) - accuracy(robust, test), 0.15);
}

TEST(Training, CganWarmupAndGeneratorLoss) {
  const LabeledDataset data = build_unbiased_dataset(3, 100, 113);
  TrainConfig cfg = RunConfig().generator_train;
  cfg.epochs = 10;
  GanConfig gan;
  gan.auxiliary_train.epochs = 10;
  std::vector<double> changes;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    cfg.seed = 200 + seed;
    const GanResult r = train_generator_cgan(data, cfg, gan);
    EXPECT_GT(r.history.warmup_accuracy, 0.6) << "seed " << seed;
    ASSERT_EQ(r.history.generator_loss.size(), 10u);
    changes.push_back(r.history.generator_loss.back() - r.history.generator_loss.front());
  }
  std::nth_element(changes.begin(), changes.begin() + 2, changes.end());
  EXPECT_LT(changes[2], 0.0);
}

TEST(Training, CganIsDeterministic) {
  const LabeledDataset data = build_unbiased_dataset(2, 40, 114);
  TrainConfig cfg = RunConfig().generator_train;
  cfg.epochs = 2;
  cfg.seed = 9;
  GanConfig gan;
  gan.warmup_steps = 5;
  gan.auxiliary_train.epochs = 1;
  const GanResult a = train_generator_cgan(data, cfg, gan);
  const GanResult b = train_generator_cgan(data, cfg, gan);
  EXPECT_EQ(a.history.generator_loss, b.history.generator_loss);
  const Tensor z = sample_seed_latent(16, 1);
  EXPECT_TRUE(bitwise_equal(a.generator.forward(z, 1).image, b.generator.forward(z, 1).image));
}

TEST(Generator, DistilledReconstructionAndControl) {
  const GeneratorQuality q = evaluate_generator(Trained::generator(), 200, 115);
  EXPECT_LE(q.mse, 0.01);
  EXPECT_GE(q.monotone_fraction, 0.9);
}

TEST(Generator, OracleRecognisesGeneratedShapes) {
  const GeneratorModel& g = Trained::generator();
  for (std::size_t y = 0; y < g.classes(); ++y) {
    std::size_t correct = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
      const Tensor z = sample_seed_latent(g.latent_dim(), derive_seed(116 + y, s));
      correct += extract_features(g.forward(z, y).image, g.classes()).params.class_id == y;
    }
    EXPECT_GE(correct, 90u) << "class " << y;
  }
}

TEST(Analysis, SemanticTestsMoveFarInPixelSpace) {
  TestGenConfig cfg;
  cfg.seed = 117;
  BatchConfig batch;
  batch.count = 40;
  std::vector<TestCase> ok;
  for (auto [y0, y1] : {std::pair<std::size_t, std::size_t>{0, 1}, {1, 0}}) {
    const auto tests = generate_batch(Trained::generator(), Trained::fault().model, y0, y1, cfg, batch);
    for (const TestCase& t : successes(tests)) ok.push_back(t);
  }
  ASSERT_GE(ok.size(), 20u);
  const DistanceReport r = distance_distribution(ok, kDefaultL2Epsilon, kDefaultLinfEpsilon);
  EXPECT_GE(r.linf.median, 0.5);
  EXPECT_GE(r.l2.exceed_fraction, 0.95);
}
