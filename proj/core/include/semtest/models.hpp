#pragma once

// Dense generator, classifier and discriminator networks.
//
// Models are immutable once constructed: every weight is held through a
// shared_ptr<const Tensor>, so evaluations on any number of threads can share
// a model and graphs alias the weights instead of copying them.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "semtest/autodiff.hpp"
#include "semtest/tensor.hpp"

namespace semtest {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

inline constexpr std::size_t kImageChannels = 3;
inline constexpr std::size_t kImageSize = 16;
inline constexpr std::size_t kImageNumel = kImageChannels * kImageSize * kImageSize;

inline Shape image_shape() { return {kImageChannels, kImageSize, kImageSize}; }

enum class Activation { Identity, Relu, Tanh, Sigmoid };

struct DenseLayer {
  std::shared_ptr<const Tensor> weight;  // [inputs, outputs]
  std::shared_ptr<const Tensor> bias;    // [outputs]
  Activation activation = Activation::Identity;

  std::size_t inputs() const { return weight->shape()[0]; }
  std::size_t outputs() const { return weight->shape()[1]; }
};

/// Weight leaves created while building a model graph, in layer order
/// (weight, bias per layer). Training differentiates with respect to these.
using ParameterLeaves = std::vector<ad::Var>;

/// x[B, in] -> x W + b, without the activation.
ad::Var dense_affine(ad::Graph& graph, const DenseLayer& layer, ad::Var x, ParameterLeaves* leaves = nullptr);
ad::Var activate(Activation activation, ad::Var x);

/// Index of the largest element; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

Tensor one_hot(std::size_t label, std::size_t classes);

struct GeneratorSpec {
  std::size_t latent_dim = 16;
  std::size_t classes = 2;
  std::vector<std::size_t> hidden{64, 128, 256, 512};
  Shape image_shape = semtest::image_shape();
};

struct GeneratorOutput {
  Tensor image;                     // [c, h, w], values in (0, 1)
  std::vector<Tensor> activations;  // O_1 .. O_n; O_n holds the pre-sigmoid output logits
};

/// Conditional generator g(z, y) = g_n o ... o g_1.
///
/// Layer 1 consumes [z, one_hot(y)]. Hidden layers use tanh. The output layer
/// is affine and the image is sigmoid(O_n), so O_n is the logit map and an
/// additive change to it keeps the image inside [0, 1].
class GeneratorModel {
 public:
  struct Trace {
    std::vector<ad::Var> outputs;  // O_0 (latent, after its perturbation) .. O_n
    ad::Var image;                 // [1, c*h*w]
  };

  GeneratorModel(GeneratorSpec spec, std::vector<DenseLayer> layers);

  static GeneratorModel initialize(const GeneratorSpec& spec, std::uint64_t seed);
  static GeneratorModel zeros(const GeneratorSpec& spec);

  const GeneratorSpec& spec() const noexcept { return spec_; }
  std::size_t latent_dim() const noexcept { return spec_.latent_dim; }
  std::size_t classes() const noexcept { return spec_.classes; }
  const Shape& image_shape() const noexcept { return spec_.image_shape; }
  /// n, the number of layers.
  std::size_t depth() const noexcept { return layers_.size(); }
  /// Layer g_{i+1}.
  const DenseLayer& layer(std::size_t i) const { return layers_.at(i); }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  /// Width of O_i for i in [0, n]; O_0 is the latent.
  std::size_t output_width(std::size_t i) const;

  GeneratorOutput forward(const Tensor& z, std::size_t y) const;

  /// O_{i+1} from O_i for a single sample. Layer 0 additionally takes y.
  Tensor layer_forward(std::size_t i, const Tensor& input, std::size_t y) const;
  /// sigmoid(O_n) reshaped to the image shape.
  Tensor image_from_logits(const Tensor& logits) const;

  /// Builds g on a graph for latents [B, Z]. additions, when non-empty, holds
  /// n + 1 entries; a valid entry i is added to O_i (shape [B, width_i]).
  Trace build(ad::Graph& graph, ad::Var latent, const std::vector<std::size_t>& labels,
              std::span<const ad::Var> additions = {}, ParameterLeaves* leaves = nullptr) const;

  NamedTensors to_named() const;
  static GeneratorModel from_named(const NamedTensors& tensors);

 private:
  void check_label(std::size_t y) const;

  GeneratorSpec spec_;
  std::vector<DenseLayer> layers_;
};

struct ClassifierSpec {
  std::size_t input_dim = kImageNumel;
  std::vector<std::size_t> hidden{256, 128};
  std::size_t classes = 2;
};

struct Prediction {
  Tensor confidences;  // [k], sums to 1
  std::size_t predicted = 0;
};

/// Dense relu classifier f with a softmax head.
class ClassifierModel {
 public:
  ClassifierModel(ClassifierSpec spec, std::vector<DenseLayer> layers);

  static ClassifierModel initialize(const ClassifierSpec& spec, std::uint64_t seed);
  static ClassifierModel zeros(const ClassifierSpec& spec);

  const ClassifierSpec& spec() const noexcept { return spec_; }
  std::size_t classes() const noexcept { return spec_.classes; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

  /// Pre-softmax logits for inputs [B, input_dim].
  ad::Var logits(ad::Graph& graph, ad::Var inputs, ParameterLeaves* leaves = nullptr) const;
  ad::Var confidences(ad::Graph& graph, ad::Var inputs, ParameterLeaves* leaves = nullptr) const;

  /// f(x) for one image of shape [c, h, w].
  Prediction predict(const Tensor& image) const;
  /// Predictions for many images, evaluated as one batch.
  std::vector<Prediction> predict_batch(std::span<const Tensor> images) const;

  NamedTensors to_named() const;
  static ClassifierModel from_named(const NamedTensors& tensors);

 private:
  ClassifierSpec spec_;
  std::vector<DenseLayer> layers_;
};

struct DiscriminatorSpec {
  std::size_t input_dim = kImageNumel;
  std::size_t classes = 2;
  std::vector<std::size_t> hidden{256, 64};
};

/// Conditional discriminator: (flattened image, one-hot label) -> real-vs-generated logit.
class DiscriminatorModel {
 public:
  DiscriminatorModel(DiscriminatorSpec spec, std::vector<DenseLayer> layers);

  static DiscriminatorModel initialize(const DiscriminatorSpec& spec, std::uint64_t seed);

  const DiscriminatorSpec& spec() const noexcept { return spec_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

  /// Scores [B] for images [B, input_dim].
  ad::Var score(ad::Graph& graph, ad::Var images, const std::vector<std::size_t>& labels,
                ParameterLeaves* leaves = nullptr) const;
  double score(const Tensor& image, std::size_t label) const;

  NamedTensors to_named() const;
  static DiscriminatorModel from_named(const NamedTensors& tensors);

 private:
  DiscriminatorSpec spec_;
  std::vector<DenseLayer> layers_;
};

/// Stacks single-sample tensors into a [B, numel] matrix.
Tensor stack_rows(std::span<const Tensor> rows);
/// One-hot matrix [B, classes].
Tensor one_hot_rows(const std::vector<std::size_t>& labels, std::size_t classes);

}  // namespace semtest
