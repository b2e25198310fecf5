#pragma once

// Training for classifiers and generators.
//
// Every run is bit-deterministic given its data, config and seed: batches are
// evaluated sequentially and gradients reduce in sample order.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "semtest/baseline.hpp"
#include "semtest/models.hpp"
#include "semtest/synthdata.hpp"

namespace semtest {

enum class LossKind { CrossEntropy, MeanSquared };
enum class OptimizerKind { SgdMomentum, Adam };

std::string_view loss_name(LossKind kind);
LossKind parse_loss(std::string_view name);
std::string_view optimizer_name(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::CrossEntropy;
  OptimizerKind optimizer = OptimizerKind::SgdMomentum;
  /// Fresh (z, y) samples drawn per epoch by generator distillation.
  std::size_t samples_per_epoch = 2048;

  void validate() const;
};

/// In-place first-order optimiser over a fixed list of parameter tensors.
/// SGD: v = mu v + g, w -= lr v. Adam uses beta1 0.9, beta2 0.999, eps 1e-8.
class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, const std::vector<std::shared_ptr<Tensor>>& params);

  void step(const std::vector<Tensor>& grads);

 private:
  TrainConfig cfg_;
  std::vector<std::shared_ptr<Tensor>> params_;
  std::vector<Tensor> first_;
  std::vector<Tensor> second_;
  std::size_t steps_ = 0;
};

/// Mutable copies of a model's weights, laid out weight, bias per layer.
std::vector<std::shared_ptr<Tensor>> clone_parameters(const std::vector<DenseLayer>& layers);
/// Layers that alias the given parameters.
std::vector<DenseLayer> alias_layers(const std::vector<DenseLayer>& layers,
                                     const std::vector<std::shared_ptr<Tensor>>& params);
/// Layers holding their own copies of the given parameters.
std::vector<DenseLayer> snapshot_layers(const std::vector<DenseLayer>& layers,
                                        const std::vector<std::shared_ptr<Tensor>>& params);

/// Mean loss of the classifier on a batch [B, input_dim].
double classifier_loss(const ClassifierModel& f, const Tensor& inputs, const std::vector<std::size_t>& labels,
                       LossKind loss);

/// One plain gradient step (no momentum) on a batch; returns the updated model.
ClassifierModel classifier_sgd_step(const ClassifierModel& f, const Tensor& inputs,
                                    const std::vector<std::size_t>& labels, LossKind loss, double learning_rate);

/// Replaces a minibatch before its gradient step.
using BatchTransform = std::function<Tensor(const ClassifierModel& current, const Tensor& inputs,
                                            const std::vector<std::size_t>& labels)>;

ClassifierModel train_classifier(const LabeledDataset& data, const TrainConfig& cfg,
                                 const ClassifierSpec& architecture = {}, const BatchTransform& transform = {});

/// Each minibatch is replaced by its PGD counterpart against the current model.
ClassifierModel adversarial_train(const LabeledDataset& data, const AttackConfig& attack, const TrainConfig& cfg,
                                  const ClassifierSpec& architecture = {});

double accuracy(const ClassifierModel& f, const LabeledDataset& data);
/// Fraction of images still classified correctly after an attack.
double robust_accuracy(const ClassifierModel& f, const LabeledDataset& data, const AttackConfig& attack);

struct BiasVerificationReport {
  double aligned_accuracy = 0.0;
  double counter_accuracy = 0.0;
  bool fault_acquired = false;
};

inline constexpr double kAlignedThreshold = 0.9;
inline constexpr double kCounterThreshold = 0.3;

/// aligned >= 0.9 and counter <= 0.3.
bool bias_verdict(double aligned_accuracy, double counter_accuracy);
BiasVerificationReport verify_bias(const ClassifierModel& f, const BiasedDatasets& data);

struct FaultInjection {
  ClassifierModel model;
  BiasVerificationReport report;
};

/// Trains on the biased train split and reports on the two holdouts.
FaultInjection inject_fault(const BiasedDatasets& data, const TrainConfig& cfg, const ClassifierSpec& architecture = {});
FaultInjection inject_fault(const BiasSpec& bias, std::size_t classes, std::size_t n_per_class,
                            std::uint64_t data_seed, const TrainConfig& cfg);

/// Fixed latent-to-scene map used to distil the renderer into a generator.
///
/// Disjoint blocks of z drive background hue, object hue offset, cx, cy and
/// size; each field is lo + (hi - lo) * sigmoid(gain * sum(block) / sqrt(len)).
struct LatentEmbedding {
  struct Block {
    std::size_t offset;
    std::size_t length;
  };

  static constexpr double kGain = 1.5;

  explicit LatentEmbedding(std::size_t latent_dim = 16);

  std::size_t latent_dim() const noexcept { return latent_dim_; }
  Block block(Feature feature) const;
  SceneParams scene(const Tensor& z, std::size_t class_id) const;
  /// Unit vector that moves only the block of the given feature.
  Tensor direction(Feature feature) const;

 private:
  std::size_t latent_dim_;
  Block blocks_[5];
};

GeneratorModel train_generator_distilled(const TrainConfig& cfg, const GeneratorSpec& spec = {});

/// Mean squared error per pixel channel between g(z, y) and the rendered scene
/// over n fresh samples.
double distillation_error(const GeneratorModel& g, std::size_t samples, std::uint64_t seed);

struct GanConfig {
  /// Discriminator-only updates before alternating training.
  std::size_t warmup_steps = 50;
  /// Weight of the conditional log-likelihood term in the generator loss.
  double label_weight = 1.0;
  ClassifierSpec auxiliary{};
  TrainConfig auxiliary_train{};
};

struct GanHistory {
  std::vector<double> discriminator_loss;  // per epoch means
  std::vector<double> generator_loss;
  /// Real-vs-generated accuracy measured right after the warm-up.
  double warmup_accuracy = 0.0;
};

struct GanResult {
  GeneratorModel generator;
  DiscriminatorModel discriminator;
  GanHistory history;
};

/// Alternating discriminator/generator updates with the non-saturating loss
/// plus a conditional log-likelihood term from a frozen auxiliary classifier
/// trained on the same data.
GanResult train_generator_cgan(const LabeledDataset& data, const TrainConfig& cfg, const GanConfig& gan = {},
                               const GeneratorSpec& spec = {});

/// Fraction of (real, generated) samples the discriminator places on the right
/// side of zero.
double discriminator_accuracy(const DiscriminatorModel& d, const GeneratorModel& g, const LabeledDataset& real,
                              std::uint64_t seed);

}  // namespace semtest
