#include "semtest/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "semtest/error.hpp"
#include "semtest/image.hpp"
#include "semtest/random.hpp"

namespace semtest {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-8;

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  return order;
}

Tensor gather_rows(const std::vector<Tensor>& images, std::span<const std::size_t> indices) {
  std::vector<Tensor> rows;
  rows.reserve(indices.size());
  for (std::size_t i : indices) rows.push_back(images[i]);
  return stack_rows(rows);
}

ad::Var classifier_objective(ad::Graph& graph, ad::Var logits, const std::vector<std::size_t>& labels,
                             std::size_t classes, LossKind loss) {
  if (loss == LossKind::CrossEntropy) return graph.softmax_cross_entropy(logits, labels);
  const ad::Var diff = graph.sub(graph.softmax(logits), graph.leaf(one_hot_rows(labels, classes)));
  return graph.mean(graph.mul(diff, diff));
}

void check_labels(const LabeledDataset& data, std::size_t classes) {
  if (data.empty()) throw InvalidArgument("training: empty dataset");
  if (data.labels.size() != data.images.size()) throw InvalidArgument("training: label count differs from image count");
  for (std::size_t y : data.labels) {
    if (y >= classes) throw InvalidArgument("training: label " + std::to_string(y) + " out of range");
  }
}

std::vector<Tensor> collect_gradients(ad::Graph& graph, ad::Var loss, const ParameterLeaves& leaves) {
  return graph.backward(loss, leaves);
}

Tensor sample_latent(Rng& rng, std::size_t dim) {
  Tensor z({dim});
  for (double& v : z.data()) v = rng.normal();
  return z;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::string_view loss_name(LossKind kind) { return kind == LossKind::CrossEntropy ? "cross-entropy" : "mse"; }

LossKind parse_loss(std::string_view name) {
  if (name == "cross-entropy") return LossKind::CrossEntropy;
  if (name == "mse") return LossKind::MeanSquared;
  throw InvalidArgument("unknown loss '" + std::string(name) + "' (expected cross-entropy or mse)");
}

std::string_view optimizer_name(OptimizerKind kind) { return kind == OptimizerKind::Adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::SgdMomentum;
  if (name == "adam") return OptimizerKind::Adam;
  throw InvalidArgument("unknown optimizer '" + std::string(name) + "' (expected sgd or adam)");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw InvalidArgument("learning rate must be > 0");
  if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if (!(momentum >= 0 && momentum < 1)) throw InvalidArgument("momentum must be in [0, 1)");
  if (samples_per_epoch < 1) throw InvalidArgument("samples per epoch must be >= 1");
}

Optimizer::Optimizer(const TrainConfig& cfg, const std::vector<std::shared_ptr<Tensor>>& params)
    : cfg_(cfg), params_(params) {
  cfg_.validate();
  for (const auto& p : params_) {
    first_.emplace_back(p->shape());
    if (cfg_.optimizer == OptimizerKind::Adam) second_.emplace_back(p->shape());
  }
}

void Optimizer::step(const std::vector<Tensor>& grads) {
  if (grads.size() != params_.size()) throw InvalidArgument("optimizer: gradient count mismatch");
  ++steps_;
  const double lr = cfg_.learning_rate;
  if (cfg_.optimizer == OptimizerKind::SgdMomentum) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto w = params_[i]->data();
      auto v = first_[i].data();
      auto g = grads[i].data();
      for (std::size_t j = 0; j < w.size(); ++j) {
        v[j] = cfg_.momentum * v[j] + g[j];
        w[j] -= lr * v[j];
      }
    }
    return;
  }
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(kAdamBeta1, t);
  const double c2 = 1.0 - std::pow(kAdamBeta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto w = params_[i]->data();
    auto m = first_[i].data();
    auto v = second_[i].data();
    auto g = grads[i].data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = kAdamBeta1 * m[j] + (1 - kAdamBeta1) * g[j];
      v[j] = kAdamBeta2 * v[j] + (1 - kAdamBeta2) * g[j] * g[j];
      w[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + kAdamEpsilon);
    }
  }
}

std::vector<std::shared_ptr<Tensor>> clone_parameters(const std::vector<DenseLayer>& layers) {
  std::vector<std::shared_ptr<Tensor>> params;
  for (const DenseLayer& layer : layers) {
    params.push_back(std::make_shared<Tensor>(*layer.weight));
    params.push_back(std::make_shared<Tensor>(*layer.bias));
  }
  return params;
}

std::vector<DenseLayer> alias_layers(const std::vector<DenseLayer>& layers,
                                     const std::vector<std::shared_ptr<Tensor>>& params) {
  if (params.size() != 2 * layers.size()) throw InvalidArgument("alias_layers: parameter count mismatch");
  std::vector<DenseLayer> out;
  for (std::size_t i = 0; i < layers.size(); ++i) out.push_back({params[2 * i], params[2 * i + 1], layers[i].activation});
  return out;
}

std::vector<DenseLayer> snapshot_layers(const std::vector<DenseLayer>& layers,
                                        const std::vector<std::shared_ptr<Tensor>>& params) {
  if (params.size() != 2 * layers.size()) throw InvalidArgument("snapshot_layers: parameter count mismatch");
  std::vector<DenseLayer> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    out.push_back({std::make_shared<const Tensor>(*params[2 * i]), std::make_shared<const Tensor>(*params[2 * i + 1]),
                   layers[i].activation});
  }
  return out;
}

double classifier_loss(const ClassifierModel& f, const Tensor& inputs, const std::vector<std::size_t>& labels,
                       LossKind loss) {
  ad::Graph graph;
  return classifier_objective(graph, f.logits(graph, graph.leaf(inputs)), labels, f.classes(), loss).value().item();
}

ClassifierModel classifier_sgd_step(const ClassifierModel& f, const Tensor& inputs,
                                    const std::vector<std::size_t>& labels, LossKind loss, double learning_rate) {
  ad::Graph graph;
  ParameterLeaves leaves;
  const ad::Var objective =
      classifier_objective(graph, f.logits(graph, graph.leaf(inputs), &leaves), labels, f.classes(), loss);
  const std::vector<Tensor> grads = graph.backward(objective, leaves);
  auto params = clone_parameters(f.layers());
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i]->data();
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= learning_rate * grads[i][j];
  }
  return ClassifierModel(f.spec(), snapshot_layers(f.layers(), params));
}

ClassifierModel train_classifier(const LabeledDataset& data, const TrainConfig& cfg,
                                 const ClassifierSpec& architecture, const BatchTransform& transform) {
  cfg.validate();
  ClassifierSpec spec = architecture;
  spec.classes = data.classes;
  check_labels(data, spec.classes);

  const ClassifierModel initial = ClassifierModel::initialize(spec, derive_seed(cfg.seed, "classifier-init"));
  auto params = clone_parameters(initial.layers());
  const ClassifierModel current(spec, alias_layers(initial.layers(), params));
  Optimizer optimizer(cfg, params);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = shuffled_indices(data.size(), derive_seed(derive_seed(cfg.seed, "shuffle"), epoch));
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      const std::span<const std::size_t> batch(order.data() + start, count);
      std::vector<std::size_t> labels;
      for (std::size_t i : batch) labels.push_back(data.labels[i]);
      Tensor inputs = gather_rows(data.images, batch);
      if (transform) inputs = transform(current, inputs, labels);

      ad::Graph graph;
      ParameterLeaves leaves;
      const ad::Var objective =
          classifier_objective(graph, current.logits(graph, graph.leaf(std::move(inputs)), &leaves), labels,
                               spec.classes, cfg.loss);
      optimizer.step(collect_gradients(graph, objective, leaves));
    }
  }
  return ClassifierModel(spec, snapshot_layers(initial.layers(), params));
}

ClassifierModel adversarial_train(const LabeledDataset& data, const AttackConfig& attack, const TrainConfig& cfg,
                                  const ClassifierSpec& architecture) {
  attack.validate();
  if (attack.mode != TestMode::Untargeted) throw InvalidArgument("adversarial training uses untargeted attacks");
  std::uint64_t batch_index = 0;
  const BatchTransform transform = [&](const ClassifierModel& current, const Tensor& inputs,
                                       const std::vector<std::size_t>& labels) {
    AttackConfig step = attack;
    step.seed = derive_seed(attack.seed, batch_index++);
    return pgd_attack_batch(current, inputs, labels, step);
  };
  return train_classifier(data, cfg, architecture, transform);
}

double accuracy(const ClassifierModel& f, const LabeledDataset& data) {
  if (data.empty()) throw InvalidArgument("accuracy: empty dataset");
  const auto predictions = f.predict_batch(data.images);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) correct += predictions[i].predicted == data.labels[i];
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double robust_accuracy(const ClassifierModel& f, const LabeledDataset& data, const AttackConfig& attack) {
  if (data.empty()) throw InvalidArgument("robust_accuracy: empty dataset");
  constexpr std::size_t kChunk = 64;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    const std::size_t count = std::min(kChunk, data.size() - start);
    std::vector<std::size_t> idx(count), labels(count);
    std::iota(idx.begin(), idx.end(), start);
    for (std::size_t i = 0; i < count; ++i) labels[i] = data.labels[start + i];
    AttackConfig cfg = attack;
    cfg.seed = derive_seed(attack.seed, start);
    const Tensor adv = pgd_attack_batch(f, gather_rows(data.images, idx), labels, cfg);
    ad::Graph graph;
    const Tensor& probs = f.confidences(graph, graph.leaf(adv)).value();
    const std::size_t k = f.classes();
    for (std::size_t i = 0; i < count; ++i) {
      correct += argmax(probs.data().subspan(i * k, k)) == labels[i];
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

bool bias_verdict(double aligned_accuracy, double counter_accuracy) {
  return aligned_accuracy >= kAlignedThreshold && counter_accuracy <= kCounterThreshold;
}

BiasVerificationReport verify_bias(const ClassifierModel& f, const BiasedDatasets& data) {
  BiasVerificationReport report;
  report.aligned_accuracy = accuracy(f, data.holdout_aligned);
  report.counter_accuracy = accuracy(f, data.holdout_counter);
  report.fault_acquired = bias_verdict(report.aligned_accuracy, report.counter_accuracy);
  return report;
}

FaultInjection inject_fault(const BiasedDatasets& data, const TrainConfig& cfg, const ClassifierSpec& architecture) {
  ClassifierModel model = train_classifier(data.train, cfg, architecture);
  BiasVerificationReport report = verify_bias(model, data);
  return {std::move(model), report};
}

FaultInjection inject_fault(const BiasSpec& bias, std::size_t classes, std::size_t n_per_class,
                            std::uint64_t data_seed, const TrainConfig& cfg) {
  return inject_fault(build_biased_dataset(bias, classes, n_per_class, data_seed), cfg);
}

LatentEmbedding::LatentEmbedding(std::size_t latent_dim) : latent_dim_(latent_dim) {
  if (latent_dim < 5) throw InvalidArgument("latent embedding needs at least 5 latent dimensions");
  const std::size_t base = latent_dim / 5;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    const std::size_t length = i < 4 ? base : latent_dim - offset;
    blocks_[i] = {offset, length};
    offset += length;
  }
}

LatentEmbedding::Block LatentEmbedding::block(Feature feature) const {
  return blocks_[static_cast<std::size_t>(feature)];
}

SceneParams LatentEmbedding::scene(const Tensor& z, std::size_t class_id) const {
  if (z.numel() != latent_dim_) {
    throw ShapeError("latent embedding", shape_string(z.shape()), "[" + std::to_string(latent_dim_) + "]");
  }
  auto unit = [&](Feature f) {
    const Block b = block(f);
    double s = 0.0;
    for (std::size_t i = 0; i < b.length; ++i) s += z[b.offset + i];
    return sigmoid(kGain * s / std::sqrt(static_cast<double>(b.length)));
  };
  SceneParams p;
  p.class_id = class_id;
  p.background_hue = wrap_hue(unit(Feature::BackgroundHue));
  const double offset = kMinHueSeparation + (1.0 - 2 * kMinHueSeparation) * unit(Feature::ObjectHue);
  p.object_hue = wrap_hue(p.background_hue + offset);
  p.cx = kCenterMin + (kCenterMax - kCenterMin) * unit(Feature::CenterX);
  p.cy = kCenterMin + (kCenterMax - kCenterMin) * unit(Feature::CenterY);
  p.size = kSizeMin + (kSizeMax - kSizeMin) * unit(Feature::Size);
  return p;
}

Tensor LatentEmbedding::direction(Feature feature) const {
  Tensor d({latent_dim_});
  const Block b = block(feature);
  for (std::size_t i = 0; i < b.length; ++i) d[b.offset + i] = 1.0 / std::sqrt(static_cast<double>(b.length));
  return d;
}

GeneratorModel train_generator_distilled(const TrainConfig& cfg, const GeneratorSpec& spec) {
  cfg.validate();
  if (spec.classes < 1 || spec.classes > kShapeCount) throw InvalidArgument("distillation: unsupported class count");
  if (spec.image_shape != image_shape()) throw InvalidArgument("distillation: renderer produces 3x16x16 images");
  const LatentEmbedding embedding(spec.latent_dim);
  const GeneratorModel initial = GeneratorModel::initialize(spec, derive_seed(cfg.seed, "generator-init"));
  auto params = clone_parameters(initial.layers());
  const GeneratorModel current(spec, alias_layers(initial.layers(), params));
  Optimizer optimizer(cfg, params);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_seed(derive_seed(cfg.seed, "distill-samples"), epoch));
    std::vector<Tensor> latents, targets;
    std::vector<std::size_t> classes;
    for (std::size_t i = 0; i < cfg.samples_per_epoch; ++i) {
      Tensor z = sample_latent(rng, spec.latent_dim);
      const std::size_t y = rng.below(spec.classes);
      targets.push_back(render(embedding.scene(z, y)));
      latents.push_back(std::move(z));
      classes.push_back(y);
    }
    for (std::size_t start = 0; start < latents.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, latents.size() - start);
      const std::span<const Tensor> z(latents.data() + start, count);
      const std::span<const Tensor> t(targets.data() + start, count);
      const std::vector<std::size_t> labels(classes.begin() + static_cast<std::ptrdiff_t>(start),
                                            classes.begin() + static_cast<std::ptrdiff_t>(start + count));
      ad::Graph graph;
      ParameterLeaves leaves;
      const auto trace = current.build(graph, graph.leaf(stack_rows(z)), labels, {}, &leaves);
      const ad::Var diff = graph.sub(trace.image, graph.leaf(stack_rows(t)));
      const ad::Var loss = graph.mean(graph.mul(diff, diff));
      optimizer.step(collect_gradients(graph, loss, leaves));
    }
  }
  return GeneratorModel(spec, snapshot_layers(initial.layers(), params));
}

double distillation_error(const GeneratorModel& g, std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw InvalidArgument("distillation_error: no samples");
  const LatentEmbedding embedding(g.latent_dim());
  Rng rng(seed);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const Tensor z = sample_latent(rng, g.latent_dim());
    const std::size_t y = rng.below(g.classes());
    const Tensor image = g.forward(z, y).image;
    const Tensor target = render(embedding.scene(z, y));
    for (std::size_t j = 0; j < image.numel(); ++j) total += (image[j] - target[j]) * (image[j] - target[j]);
    count += image.numel();
  }
  return total / static_cast<double>(count);
}

namespace {

struct GanBatch {
  Tensor latents;
  std::vector<std::size_t> labels;
};

GanBatch sample_gan_batch(Rng& rng, const std::vector<std::size_t>& labels, std::size_t latent_dim) {
  std::vector<Tensor> z;
  for (std::size_t i = 0; i < labels.size(); ++i) z.push_back(sample_latent(rng, latent_dim));
  return {stack_rows(z), labels};
}

// Mean of softplus(-s) over real scores plus softplus(s) over generated ones.
double discriminator_step(const DiscriminatorModel& d, Optimizer& optimizer, const GeneratorModel& g,
                          const Tensor& real, const std::vector<std::size_t>& labels, Rng& rng) {
  const GanBatch fake = sample_gan_batch(rng, labels, g.latent_dim());
  Tensor generated;
  {
    ad::Graph graph;
    generated = g.build(graph, graph.leaf(fake.latents), fake.labels).image.value();
  }
  // Real and generated rows share one pass so both halves reach the same parameter leaves.
  const std::size_t n = labels.size(), width = real.shape()[1];
  Tensor rows({2 * n, width});
  Tensor signs({2 * n});
  std::copy(real.data().begin(), real.data().end(), rows.data().begin());
  std::copy(generated.data().begin(), generated.data().end(), rows.data().begin() + static_cast<std::ptrdiff_t>(n * width));
  std::vector<std::size_t> all_labels = labels;
  all_labels.insert(all_labels.end(), fake.labels.begin(), fake.labels.end());
  for (std::size_t i = 0; i < 2 * n; ++i) signs[i] = i < n ? -1.0 : 1.0;

  ad::Graph graph;
  ParameterLeaves leaves;
  const ad::Var scores = d.score(graph, graph.leaf(std::move(rows)), all_labels, &leaves);
  const ad::Var loss = graph.scale(graph.mean(graph.softplus(graph.mul(scores, graph.leaf(std::move(signs))))), 2.0);
  optimizer.step(collect_gradients(graph, loss, leaves));
  return loss.value().item();
}

double generator_step(const GeneratorModel& g, Optimizer& optimizer, const DiscriminatorModel& d,
                      const ClassifierModel& auxiliary, const std::vector<std::size_t>& labels, double label_weight,
                      Rng& rng) {
  const GanBatch fake = sample_gan_batch(rng, labels, g.latent_dim());
  ad::Graph graph;
  ParameterLeaves leaves;
  const auto trace = g.build(graph, graph.leaf(fake.latents), fake.labels, {}, &leaves);
  const ad::Var adversarial = graph.mean(graph.softplus(graph.scale(d.score(graph, trace.image, fake.labels), -1.0)));
  const ad::Var likelihood = graph.softmax_cross_entropy(auxiliary.logits(graph, trace.image), fake.labels);
  const ad::Var loss = graph.add(adversarial, graph.scale(likelihood, label_weight));
  optimizer.step(collect_gradients(graph, loss, leaves));
  return loss.value().item();
}

}  // namespace

GanResult train_generator_cgan(const LabeledDataset& data, const TrainConfig& cfg, const GanConfig& gan,
                               const GeneratorSpec& spec_in) {
  cfg.validate();
  GeneratorSpec spec = spec_in;
  spec.classes = data.classes;
  check_labels(data, spec.classes);
  std::vector<bool> seen(spec.classes, false);
  for (std::size_t y : data.labels) seen[y] = true;
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw InvalidArgument("cgan: the dataset must cover every class");
  }

  TrainConfig aux_cfg = gan.auxiliary_train;
  aux_cfg.seed = derive_seed(cfg.seed, "cgan-auxiliary");
  const ClassifierModel auxiliary = train_classifier(data, aux_cfg, gan.auxiliary);

  const GeneratorModel g0 = GeneratorModel::initialize(spec, derive_seed(cfg.seed, "cgan-generator-init"));
  const DiscriminatorModel d0 = DiscriminatorModel::initialize(
      DiscriminatorSpec{shape_numel(spec.image_shape), spec.classes, {256, 64}},
      derive_seed(cfg.seed, "cgan-discriminator-init"));
  auto g_params = clone_parameters(g0.layers());
  auto d_params = clone_parameters(d0.layers());
  const GeneratorModel g(spec, alias_layers(g0.layers(), g_params));
  const DiscriminatorModel d(d0.spec(), alias_layers(d0.layers(), d_params));
  Optimizer g_opt(cfg, g_params);
  Optimizer d_opt(cfg, d_params);
  Rng rng(derive_seed(cfg.seed, "cgan-noise"));

  GanResult result{g0, d0, {}};
  {
    Rng pick(derive_seed(cfg.seed, "cgan-warmup"));
    for (std::size_t s = 0; s < gan.warmup_steps; ++s) {
      std::vector<std::size_t> idx(std::min(cfg.batch_size, data.size()));
      for (std::size_t& i : idx) i = pick.below(data.size());
      std::vector<std::size_t> labels;
      for (std::size_t i : idx) labels.push_back(data.labels[i]);
      discriminator_step(d, d_opt, g, gather_rows(data.images, idx), labels, rng);
    }
    result.history.warmup_accuracy = discriminator_accuracy(d, g, data, derive_seed(cfg.seed, "cgan-warmup-eval"));
  }

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = shuffled_indices(data.size(), derive_seed(derive_seed(cfg.seed, "cgan-shuffle"), epoch));
    double d_total = 0.0, g_total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - start);
      const std::span<const std::size_t> batch(order.data() + start, count);
      std::vector<std::size_t> labels;
      for (std::size_t i : batch) labels.push_back(data.labels[i]);
      d_total += discriminator_step(d, d_opt, g, gather_rows(data.images, batch), labels, rng);
      g_total += generator_step(g, g_opt, d, auxiliary, labels, gan.label_weight, rng);
      ++batches;
    }
    result.history.discriminator_loss.push_back(d_total / static_cast<double>(batches));
    result.history.generator_loss.push_back(g_total / static_cast<double>(batches));
  }
  result.generator = GeneratorModel(spec, snapshot_layers(g0.layers(), g_params));
  result.discriminator = DiscriminatorModel(d0.spec(), snapshot_layers(d0.layers(), d_params));
  return result;
}

double discriminator_accuracy(const DiscriminatorModel& d, const GeneratorModel& g, const LabeledDataset& real,
                              std::uint64_t seed) {
  if (real.empty()) throw InvalidArgument("discriminator_accuracy: empty dataset");
  Rng rng(seed);
  const GanBatch fake = sample_gan_batch(rng, real.labels, g.latent_dim());
  ad::Graph graph;
  const Tensor generated = g.build(graph, graph.leaf(fake.latents), fake.labels).image.value();
  const Tensor& real_scores = d.score(graph, graph.leaf(stack_rows(real.images)), real.labels).value();
  const Tensor& fake_scores = d.score(graph, graph.leaf(generated), fake.labels).value();
  std::size_t correct = 0;
  for (double s : real_scores.data()) correct += s > 0;
  for (double s : fake_scores.data()) correct += s < 0;
  return static_cast<double>(correct) / static_cast<double>(2 * real.size());
}

}  // namespace semtest
