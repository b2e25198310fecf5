#include "semtest/models.hpp"

#include <cmath>
#include <map>

#include "semtest/error.hpp"
#include "semtest/random.hpp"
#include "semtest/weights_io.hpp"

namespace semtest {

namespace {

enum class ModelKind { Generator = 1, Classifier = 2, Discriminator = 3 };

DenseLayer make_layer(std::size_t in, std::size_t out, Activation activation, Rng* rng) {
  Tensor w({in, out});
  if (rng) {
    const double gain = activation == Activation::Relu ? 2.0 : 1.0;
    const double stddev = std::sqrt(gain / static_cast<double>(in));
    for (double& v : w.data()) v = rng->normal() * stddev;
  }
  return DenseLayer{std::make_shared<const Tensor>(std::move(w)), std::make_shared<const Tensor>(Tensor({out})),
                    activation};
}

void check_chain(const std::vector<DenseLayer>& layers, std::size_t input_dim, std::size_t output_dim,
                 const char* model) {
  if (layers.empty()) throw InvalidArgument(std::string(model) + ": no layers");
  std::size_t width = input_dim;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const DenseLayer& l = layers[i];
    if (!l.weight || !l.bias || l.weight->rank() != 2 || l.bias->rank() != 1 ||
        l.weight->shape()[1] != l.bias->numel()) {
      throw InvalidArgument(std::string(model) + ": malformed layer " + std::to_string(i));
    }
    if (l.inputs() != width) {
      throw ShapeError(std::string(model) + " layer " + std::to_string(i), "[" + std::to_string(width) + "]",
                       shape_string(l.weight->shape()));
    }
    width = l.outputs();
  }
  if (width != output_dim) {
    throw ShapeError(std::string(model) + " output", "[" + std::to_string(width) + "]",
                     "[" + std::to_string(output_dim) + "]");
  }
}

void append_layers(NamedTensors& out, const std::vector<DenseLayer>& layers) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    out.emplace_back("layer" + std::to_string(i) + ".weight", *layers[i].weight);
    out.emplace_back("layer" + std::to_string(i) + ".bias", *layers[i].bias);
  }
}

class NamedLookup {
 public:
  explicit NamedLookup(const NamedTensors& tensors) {
    for (const auto& [name, t] : tensors) map_.emplace(name, &t);
  }

  const Tensor& get(const std::string& name) const {
    auto it = map_.find(name);
    if (it == map_.end()) {
      throw WeightsError(WeightsError::Kind::MissingTensor, name, "weights file is missing tensor '" + name + "'");
    }
    return *it->second;
  }

  bool has(const std::string& name) const { return map_.count(name) != 0; }

  std::size_t scalar(const std::string& name) const { return static_cast<std::size_t>(get(name)[0]); }

  void expect_kind(ModelKind kind) const {
    if (static_cast<int>(get("meta.kind")[0]) != static_cast<int>(kind)) {
      throw WeightsError(WeightsError::Kind::WrongModelKind, "meta.kind", "weights file holds a different model kind");
    }
  }

  std::vector<DenseLayer> layers(Activation hidden, Activation last) const {
    std::vector<DenseLayer> out;
    for (std::size_t i = 0; has("layer" + std::to_string(i) + ".weight"); ++i) {
      const std::string prefix = "layer" + std::to_string(i);
      const Tensor& w = get(prefix + ".weight");
      const Tensor& b = get(prefix + ".bias");
      if (w.rank() != 2 || b.rank() != 1 || w.shape()[1] != b.numel()) {
        throw WeightsError(WeightsError::Kind::InconsistentShape, prefix,
                           "layer '" + prefix + "' has inconsistent weight/bias shapes");
      }
      out.push_back({std::make_shared<const Tensor>(w), std::make_shared<const Tensor>(b), hidden});
    }
    if (!out.empty()) out.back().activation = last;
    return out;
  }

 private:
  std::map<std::string, const Tensor*> map_;
};

Tensor meta(double v) { return Tensor::scalar(v); }

std::vector<std::size_t> widths_of(const std::vector<DenseLayer>& layers) {
  std::vector<std::size_t> w;
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) w.push_back(layers[i].outputs());
  return w;
}

template <typename Fn>
auto rethrow_as_weights_error(Fn&& fn) {
  try {
    return fn();
  } catch (const WeightsError&) {
    throw;
  } catch (const Error& e) {
    throw WeightsError(WeightsError::Kind::InconsistentShape, "", e.what());
  }
}

}  // namespace

ad::Var dense_affine(ad::Graph& graph, const DenseLayer& layer, ad::Var x, ParameterLeaves* leaves) {
  const ad::Var w = graph.leaf(layer.weight);
  const ad::Var b = graph.leaf(layer.bias);
  if (leaves) {
    leaves->push_back(w);
    leaves->push_back(b);
  }
  return graph.add_bias(graph.matmul(x, w), b);
}

ad::Var activate(Activation activation, ad::Var x) {
  switch (activation) {
    case Activation::Identity: return x;
    case Activation::Relu: return ad::relu(x);
    case Activation::Tanh: return ad::tanh(x);
    case Activation::Sigmoid: return ad::sigmoid(x);
  }
  return x;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

Tensor one_hot(std::size_t label, std::size_t classes) {
  if (label >= classes) throw InvalidArgument("one_hot: label " + std::to_string(label) + " out of range");
  Tensor t({classes});
  t[label] = 1.0;
  return t;
}

Tensor one_hot_rows(const std::vector<std::size_t>& labels, std::size_t classes) {
  Tensor t({labels.size(), classes});
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] >= classes) throw InvalidArgument("one_hot: label " + std::to_string(labels[r]) + " out of range");
    t[r * classes + labels[r]] = 1.0;
  }
  return t;
}

Tensor stack_rows(std::span<const Tensor> rows) {
  if (rows.empty()) throw InvalidArgument("stack_rows: no rows");
  const std::size_t width = rows[0].numel();
  Tensor out({rows.size(), width});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].numel() != width) throw ShapeError("stack_rows", shape_string(rows[0].shape()), shape_string(rows[r].shape()));
    std::copy(rows[r].data().begin(), rows[r].data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(r * width));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generator

GeneratorModel::GeneratorModel(GeneratorSpec spec, std::vector<DenseLayer> layers)
    : spec_(std::move(spec)), layers_(std::move(layers)) {
  if (spec_.latent_dim == 0 || spec_.classes == 0) throw InvalidArgument("generator: empty latent or class space");
  if (layers_.size() < 2) throw InvalidArgument("generator: at least two layers are required");
  check_chain(layers_, spec_.latent_dim + spec_.classes, shape_numel(spec_.image_shape), "generator");
  spec_.hidden = widths_of(layers_);
}

GeneratorModel GeneratorModel::initialize(const GeneratorSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  std::size_t width = spec.latent_dim + spec.classes;
  for (std::size_t h : spec.hidden) {
    layers.push_back(make_layer(width, h, Activation::Tanh, &rng));
    width = h;
  }
  layers.push_back(make_layer(width, shape_numel(spec.image_shape), Activation::Sigmoid, &rng));
  return GeneratorModel(spec, std::move(layers));
}

GeneratorModel GeneratorModel::zeros(const GeneratorSpec& spec) {
  std::vector<DenseLayer> layers;
  std::size_t width = spec.latent_dim + spec.classes;
  for (std::size_t h : spec.hidden) {
    layers.push_back(make_layer(width, h, Activation::Tanh, nullptr));
    width = h;
  }
  layers.push_back(make_layer(width, shape_numel(spec.image_shape), Activation::Sigmoid, nullptr));
  return GeneratorModel(spec, std::move(layers));
}

std::size_t GeneratorModel::output_width(std::size_t i) const {
  if (i == 0) return spec_.latent_dim;
  return layers_.at(i - 1).outputs();
}

void GeneratorModel::check_label(std::size_t y) const {
  if (y >= spec_.classes) {
    throw InvalidArgument("generator: class " + std::to_string(y) + " out of range for " +
                          std::to_string(spec_.classes) + " classes");
  }
}

GeneratorModel::Trace GeneratorModel::build(ad::Graph& graph, ad::Var latent, const std::vector<std::size_t>& labels,
                                            std::span<const ad::Var> additions, ParameterLeaves* leaves) const {
  const Shape& ls = latent.shape();
  if (ls.size() != 2 || ls[1] != spec_.latent_dim || ls[0] != labels.size()) {
    throw ShapeError("generator latent", shape_string(ls),
                     "[" + std::to_string(labels.size()) + "," + std::to_string(spec_.latent_dim) + "]");
  }
  if (!additions.empty() && additions.size() != depth() + 1) {
    throw InvalidArgument("generator: expected " + std::to_string(depth() + 1) + " perturbation slots");
  }
  for (std::size_t y : labels) check_label(y);
  auto addition = [&](std::size_t i) -> ad::Var { return additions.empty() ? ad::Var() : additions[i]; };

  Trace trace;
  ad::Var o = latent;
  if (addition(0).valid()) o = graph.add(o, addition(0));
  trace.outputs.push_back(o);
  const ad::Var parts[] = {o, graph.leaf(one_hot_rows(labels, spec_.classes))};
  ad::Var x = graph.concat(parts);
  for (std::size_t i = 0; i < depth(); ++i) {
    ad::Var a = dense_affine(graph, layers_[i], x, leaves);
    if (i + 1 < depth()) a = activate(layers_[i].activation, a);
    if (addition(i + 1).valid()) a = graph.add(a, addition(i + 1));
    trace.outputs.push_back(a);
    x = a;
  }
  trace.image = graph.sigmoid(x);
  return trace;
}

GeneratorOutput GeneratorModel::forward(const Tensor& z, std::size_t y) const {
  if (z.numel() != spec_.latent_dim) {
    throw ShapeError("generator_forward latent", shape_string(z.shape()), "[" + std::to_string(spec_.latent_dim) + "]");
  }
  ad::Graph graph;
  const Trace trace = build(graph, graph.leaf(z.reshaped({1, spec_.latent_dim})), {y});
  GeneratorOutput out;
  for (std::size_t i = 1; i < trace.outputs.size(); ++i) {
    out.activations.push_back(trace.outputs[i].value().reshaped({output_width(i)}));
  }
  out.image = trace.image.value().reshaped(spec_.image_shape);
  return out;
}

Tensor GeneratorModel::layer_forward(std::size_t i, const Tensor& input, std::size_t y) const {
  if (i >= depth()) throw InvalidArgument("generator: layer index out of range");
  if (input.numel() != output_width(i)) {
    throw ShapeError("generator layer " + std::to_string(i + 1), shape_string(input.shape()),
                     "[" + std::to_string(output_width(i)) + "]");
  }
  ad::Graph graph;
  ad::Var x = graph.leaf(input.reshaped({1, input.numel()}));
  if (i == 0) {
    check_label(y);
    const ad::Var parts[] = {x, graph.leaf(one_hot_rows({y}, spec_.classes))};
    x = graph.concat(parts);
  }
  ad::Var a = dense_affine(graph, layers_[i], x);
  if (i + 1 < depth()) a = activate(layers_[i].activation, a);
  return a.value().reshaped({output_width(i + 1)});
}

Tensor GeneratorModel::image_from_logits(const Tensor& logits) const {
  ad::Graph graph;
  return graph.sigmoid(graph.leaf(logits)).value().reshaped(spec_.image_shape);
}

NamedTensors GeneratorModel::to_named() const {
  NamedTensors out;
  out.emplace_back("meta.kind", meta(static_cast<double>(ModelKind::Generator)));
  out.emplace_back("meta.latent_dim", meta(static_cast<double>(spec_.latent_dim)));
  out.emplace_back("meta.classes", meta(static_cast<double>(spec_.classes)));
  Tensor shape({spec_.image_shape.size()});
  for (std::size_t i = 0; i < spec_.image_shape.size(); ++i) shape[i] = static_cast<double>(spec_.image_shape[i]);
  out.emplace_back("meta.image_shape", shape);
  append_layers(out, layers_);
  return out;
}

GeneratorModel GeneratorModel::from_named(const NamedTensors& tensors) {
  const NamedLookup lookup(tensors);
  lookup.expect_kind(ModelKind::Generator);
  GeneratorSpec spec;
  spec.latent_dim = lookup.scalar("meta.latent_dim");
  spec.classes = lookup.scalar("meta.classes");
  const Tensor& shape = lookup.get("meta.image_shape");
  spec.image_shape.clear();
  for (double d : shape.data()) spec.image_shape.push_back(static_cast<std::size_t>(d));
  auto layers = lookup.layers(Activation::Tanh, Activation::Sigmoid);
  return rethrow_as_weights_error([&] { return GeneratorModel(spec, std::move(layers)); });
}

// ---------------------------------------------------------------------------
// Classifier

ClassifierModel::ClassifierModel(ClassifierSpec spec, std::vector<DenseLayer> layers)
    : spec_(std::move(spec)), layers_(std::move(layers)) {
  if (spec_.classes < 2) throw InvalidArgument("classifier: at least two classes are required");
  check_chain(layers_, spec_.input_dim, spec_.classes, "classifier");
  spec_.hidden = widths_of(layers_);
}

ClassifierModel ClassifierModel::initialize(const ClassifierSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  std::size_t width = spec.input_dim;
  for (std::size_t h : spec.hidden) {
    layers.push_back(make_layer(width, h, Activation::Relu, &rng));
    width = h;
  }
  layers.push_back(make_layer(width, spec.classes, Activation::Identity, &rng));
  return ClassifierModel(spec, std::move(layers));
}

ClassifierModel ClassifierModel::zeros(const ClassifierSpec& spec) {
  std::vector<DenseLayer> layers;
  std::size_t width = spec.input_dim;
  for (std::size_t h : spec.hidden) {
    layers.push_back(make_layer(width, h, Activation::Relu, nullptr));
    width = h;
  }
  layers.push_back(make_layer(width, spec.classes, Activation::Identity, nullptr));
  return ClassifierModel(spec, std::move(layers));
}

ad::Var ClassifierModel::logits(ad::Graph& graph, ad::Var inputs, ParameterLeaves* leaves) const {
  const Shape& s = inputs.shape();
  if (s.size() != 2 || s[1] != spec_.input_dim) {
    throw ShapeError("classifier input", shape_string(s), "[B," + std::to_string(spec_.input_dim) + "]");
  }
  ad::Var x = inputs;
  for (const DenseLayer& layer : layers_) x = activate(layer.activation, dense_affine(graph, layer, x, leaves));
  return x;
}

ad::Var ClassifierModel::confidences(ad::Graph& graph, ad::Var inputs, ParameterLeaves* leaves) const {
  return graph.softmax(logits(graph, inputs, leaves));
}

Prediction ClassifierModel::predict(const Tensor& image) const {
  const bool image_input = spec_.input_dim == kImageNumel && image.shape() == semtest::image_shape();
  if (!image_input && image.shape() != Shape{spec_.input_dim}) {
    throw ShapeError("classifier_predict", shape_string(image.shape()), shape_string(semtest::image_shape()));
  }
  const Tensor one[] = {image};
  return predict_batch(one).front();
}

std::vector<Prediction> ClassifierModel::predict_batch(std::span<const Tensor> images) const {
  for (const Tensor& image : images) {
    if (image.numel() != spec_.input_dim) {
      throw ShapeError("classifier_predict", shape_string(image.shape()), "[" + std::to_string(spec_.input_dim) + "]");
    }
  }
  std::vector<Prediction> out;
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < images.size(); start += kChunk) {
    const auto chunk = images.subspan(start, std::min(kChunk, images.size() - start));
    ad::Graph graph;
    const Tensor& probs = confidences(graph, graph.leaf(stack_rows(chunk))).value();
    const std::size_t k = spec_.classes;
    for (std::size_t r = 0; r < chunk.size(); ++r) {
      Prediction p;
      p.confidences = Tensor({k}, std::vector<double>(probs.data().begin() + static_cast<std::ptrdiff_t>(r * k),
                                                      probs.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * k)));
      p.predicted = argmax(p.confidences.data());
      out.push_back(std::move(p));
    }
  }
  return out;
}

NamedTensors ClassifierModel::to_named() const {
  NamedTensors out;
  out.emplace_back("meta.kind", meta(static_cast<double>(ModelKind::Classifier)));
  out.emplace_back("meta.classes", meta(static_cast<double>(spec_.classes)));
  append_layers(out, layers_);
  return out;
}

ClassifierModel ClassifierModel::from_named(const NamedTensors& tensors) {
  const NamedLookup lookup(tensors);
  lookup.expect_kind(ModelKind::Classifier);
  ClassifierSpec spec;
  spec.classes = lookup.scalar("meta.classes");
  auto layers = lookup.layers(Activation::Relu, Activation::Identity);
  if (layers.empty()) throw WeightsError(WeightsError::Kind::MissingTensor, "layer0.weight", "classifier has no layers");
  spec.input_dim = layers.front().inputs();
  return rethrow_as_weights_error([&] { return ClassifierModel(spec, std::move(layers)); });
}

// ---------------------------------------------------------------------------
// Discriminator

DiscriminatorModel::DiscriminatorModel(DiscriminatorSpec spec, std::vector<DenseLayer> layers)
    : spec_(std::move(spec)), layers_(std::move(layers)) {
  check_chain(layers_, spec_.input_dim + spec_.classes, 1, "discriminator");
  spec_.hidden = widths_of(layers_);
}

DiscriminatorModel DiscriminatorModel::initialize(const DiscriminatorSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  std::size_t width = spec.input_dim + spec.classes;
  for (std::size_t h : spec.hidden) {
    layers.push_back(make_layer(width, h, Activation::Relu, &rng));
    width = h;
  }
  layers.push_back(make_layer(width, 1, Activation::Identity, &rng));
  return DiscriminatorModel(spec, std::move(layers));
}

ad::Var DiscriminatorModel::score(ad::Graph& graph, ad::Var images, const std::vector<std::size_t>& labels,
                                  ParameterLeaves* leaves) const {
  const Shape& s = images.shape();
  if (s.size() != 2 || s[1] != spec_.input_dim || s[0] != labels.size()) {
    throw ShapeError("discriminator input", shape_string(s), "[B," + std::to_string(spec_.input_dim) + "]");
  }
  const ad::Var parts[] = {images, graph.leaf(one_hot_rows(labels, spec_.classes))};
  ad::Var x = graph.concat(parts);
  for (const DenseLayer& layer : layers_) x = activate(layer.activation, dense_affine(graph, layer, x, leaves));
  return graph.reshape(x, {labels.size()});
}

double DiscriminatorModel::score(const Tensor& image, std::size_t label) const {
  ad::Graph graph;
  return score(graph, graph.leaf(image.reshaped({1, image.numel()})), {label}).value()[0];
}

NamedTensors DiscriminatorModel::to_named() const {
  NamedTensors out;
  out.emplace_back("meta.kind", meta(static_cast<double>(ModelKind::Discriminator)));
  out.emplace_back("meta.classes", meta(static_cast<double>(spec_.classes)));
  append_layers(out, layers_);
  return out;
}

DiscriminatorModel DiscriminatorModel::from_named(const NamedTensors& tensors) {
  const NamedLookup lookup(tensors);
  lookup.expect_kind(ModelKind::Discriminator);
  DiscriminatorSpec spec;
  spec.classes = lookup.scalar("meta.classes");
  auto layers = lookup.layers(Activation::Relu, Activation::Identity);
  if (layers.empty()) throw WeightsError(WeightsError::Kind::MissingTensor, "layer0.weight", "discriminator has no layers");
  spec.input_dim = layers.front().inputs() - spec.classes;
  return rethrow_as_weights_error([&] { return DiscriminatorModel(spec, std::move(layers)); });
}

}  // namespace semtest
