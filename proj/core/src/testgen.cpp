#include "semtest/testgen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "semtest/error.hpp"
#include "semtest/image.hpp"
#include "semtest/random.hpp"
#include "semtest/weights_io.hpp"

namespace semtest {

namespace {

std::string make_seed_id(std::size_t y0, std::size_t y1, std::size_t index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%zu-%zu-%04zu", y0, y1, index);
  return buf;
}

void check_perturbation(const GeneratorModel& g, const Perturbation& p) {
  if (p.layers.size() != g.depth() + 1) {
    throw InvalidArgument("perturbation has " + std::to_string(p.layers.size()) + " layers, generator needs " +
                          std::to_string(g.depth() + 1));
  }
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    if (p.layers[i].numel() != g.output_width(i)) {
      throw ShapeError("perturbation layer " + std::to_string(i), shape_string(p.layers[i].shape()),
                       "[" + std::to_string(g.output_width(i)) + "]");
    }
  }
}

}  // namespace

Perturbation Perturbation::zeros(const GeneratorModel& g) {
  Perturbation p;
  for (std::size_t i = 0; i <= g.depth(); ++i) p.layers.emplace_back(Shape{g.output_width(i)});
  return p;
}

double Perturbation::flattened_norm() const {
  double s = 0.0;
  for (const Tensor& t : layers) {
    for (double v : t.data()) s += v * v;
  }
  return std::sqrt(s);
}

std::size_t Perturbation::element_count() const {
  std::size_t n = 0;
  for (const Tensor& t : layers) n += t.numel();
  return n;
}

Tensor perturbed_forward(const GeneratorModel& g, const Tensor& z, std::size_t y, const Perturbation& p) {
  if (z.numel() != g.latent_dim()) {
    throw ShapeError("perturbed_forward latent", shape_string(z.shape()), "[" + std::to_string(g.latent_dim()) + "]");
  }
  check_perturbation(g, p);
  ad::Graph graph;
  std::vector<ad::Var> additions;
  for (const Tensor& t : p.layers) additions.push_back(graph.leaf(t.reshaped({1, t.numel()})));
  const auto trace = g.build(graph, graph.leaf(z.reshaped({1, z.numel()})), {y}, additions);
  return trace.image.value().reshaped(g.image_shape());
}

bool similarity_holds(const Perturbation& p, double epsilon) { return p.flattened_norm() < epsilon; }

double default_epsilon(const GeneratorModel& g, const std::vector<std::size_t>& layers) {
  std::size_t count = 0;
  for (std::size_t i : layers) count += g.output_width(i);
  return 2.0 * std::sqrt(static_cast<double>(count)) * 0.05;
}

void TestGenConfig::validate(const GeneratorModel& g) const {
  if (!std::isfinite(epsilon)) throw InvalidArgument("testgen: epsilon must be finite");
  if (!(c >= 0) || !std::isfinite(c)) throw InvalidArgument("testgen: confidence margin c must be >= 0");
  if (!(step_size > 0) || !std::isfinite(step_size)) throw InvalidArgument("testgen: step size must be > 0");
  if (layers.empty()) throw InvalidArgument("testgen: no perturbable layers");
  std::set<std::size_t> seen;
  for (std::size_t i : layers) {
    if (i > g.depth()) {
      throw InvalidArgument("testgen: layer " + std::to_string(i) + " out of range [0, " + std::to_string(g.depth()) +
                            "]");
    }
    if (!seen.insert(i).second) throw InvalidArgument("testgen: layer " + std::to_string(i) + " listed twice");
  }
}

double TestGenConfig::resolved_epsilon(const GeneratorModel& g) const {
  return epsilon > 0 ? epsilon : default_epsilon(g, layers);
}

std::string_view status_name(TestStatus status) {
  switch (status) {
    case TestStatus::Success: return "success";
    case TestStatus::SeedMisclassified: return "seed-misclassified";
    case TestStatus::IterationCap: return "iteration-cap";
    case TestStatus::EpsilonExceeded: return "epsilon-exceeded";
  }
  return "unknown";
}

TestStatus parse_status(std::string_view name) {
  for (TestStatus s : {TestStatus::Success, TestStatus::SeedMisclassified, TestStatus::IterationCap,
                       TestStatus::EpsilonExceeded}) {
    if (status_name(s) == name) return s;
  }
  throw InvalidArgument("unknown test status '" + std::string(name) + "'");
}

std::string_view method_name(TestMethod method) { return method == TestMethod::Pixel ? "pixel" : "semantic"; }

Tensor sample_seed_latent(std::size_t latent_dim, std::uint64_t seed) {
  Rng rng(seed);
  Tensor z({latent_dim});
  for (double& v : z.data()) v = rng.normal();
  return z;
}

TestCase generate_test(const GeneratorModel& g, const ClassifierModel& f, std::size_t y0, std::size_t y1,
                       const TestGenConfig& cfg) {
  return generate_test_from(g, f, sample_seed_latent(g.latent_dim(), cfg.seed), y0, y1, cfg);
}

TestCase generate_test_from(const GeneratorModel& g, const ClassifierModel& f, const Tensor& z, std::size_t y0,
                            std::size_t y1, const TestGenConfig& cfg) {
  cfg.validate(g);
  if (y0 == y1) throw InvalidArgument("generate_test: y0 and y1 must differ");
  if (y0 >= f.classes() || y1 >= f.classes()) throw InvalidArgument("generate_test: class out of range");
  if (f.spec().input_dim != shape_numel(g.image_shape())) {
    throw ShapeError("generate_test", shape_string(g.image_shape()), "[" + std::to_string(f.spec().input_dim) + "]");
  }
  const double eps = cfg.resolved_epsilon(g);
  const double margin_c = cfg.mode == TestMode::Targeted ? 0.0 : cfg.c;

  TestCase t;
  t.seed_id = make_seed_id(y0, y1, 0);
  t.mode = cfg.mode;
  t.latent = z.reshaped({g.latent_dim()});
  t.y0 = y0;
  t.y1 = y1;
  t.epsilon = eps;
  t.c = cfg.c;
  t.perturbation = Perturbation::zeros(g);

  ad::Graph graph;
  std::vector<ad::Var> additions(g.depth() + 1);
  std::vector<ad::Var> active;
  for (std::size_t i : cfg.layers) {
    additions[i] = graph.leaf(Tensor(Shape{1, g.output_width(i)}));
    active.push_back(additions[i]);
  }
  const auto trace = g.build(graph, graph.leaf(t.latent.reshaped({1, g.latent_dim()})), {y0}, additions);
  const ad::Var conf = f.confidences(graph, trace.image);
  const ad::Var loss =
      cfg.mode == TestMode::Untargeted ? untargeted_loss(conf) : targeted_margin_loss(conf, y1, margin_c);

  t.seed_image = trace.image.value().reshaped(g.image_shape());
  t.seed_confidences = conf.value().reshaped({f.classes()});
  if (argmax(t.seed_confidences.data()) != y0) {
    t.status = TestStatus::SeedMisclassified;
    t.test_image = t.seed_image;
    t.test_confidences = t.seed_confidences;
    t.margin = achieved_margin(cfg.mode, t.test_confidences.data(), y0, y1);
    return t;
  }

  std::vector<Tensor> p;
  for (const ad::Var& v : active) p.push_back(v.value());
  auto norm = [&] {
    double s = 0.0;
    for (const Tensor& x : p) {
      for (double v : x.data()) s += v * v;
    }
    return std::sqrt(s);
  };

  std::size_t iteration = 0;
  for (;;) {
    const double n = norm();
    const bool ok = mode_succeeds(cfg.mode, conf.value().data(), y0, y1, cfg.c);
    if (ok && n < eps) {
      t.status = TestStatus::Success;
      break;
    }
    if (n >= eps) {
      t.status = TestStatus::EpsilonExceeded;
      break;
    }
    if (iteration == cfg.max_iterations) {
      t.status = TestStatus::IterationCap;
      break;
    }
    const std::vector<Tensor> grads = graph.backward(loss, active);
    for (std::size_t a = 0; a < p.size(); ++a) {
      auto pv = p[a].data();
      auto gv = grads[a].data();
      for (std::size_t j = 0; j < pv.size(); ++j) pv[j] -= cfg.step_size * gv[j];
      graph.set_value(active[a], p[a]);
    }
    graph.forward(loss);
    ++iteration;
  }

  for (std::size_t a = 0; a < cfg.layers.size(); ++a) {
    t.perturbation.layers[cfg.layers[a]] = p[a].reshaped({g.output_width(cfg.layers[a])});
  }
  t.iterations = iteration;
  t.perturbation_norm = t.perturbation.flattened_norm();
  t.test_image = trace.image.value().reshaped(g.image_shape());
  t.test_confidences = conf.value().reshaped({f.classes()});
  const Tensor delta = difference(t.test_image, t.seed_image);
  t.pixel_l2 = l2_norm(delta);
  t.pixel_linf = linf_norm(delta);
  t.margin = achieved_margin(cfg.mode, t.test_confidences.data(), y0, y1);
  return t;
}

std::vector<TestCase> generate_batch(const GeneratorModel& g, const ClassifierModel& f, std::size_t y0, std::size_t y1,
                                     const TestGenConfig& cfg, const BatchConfig& batch) {
  cfg.validate(g);
  std::vector<TestCase> results(batch.count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= batch.count) return;
      try {
        const std::uint64_t base = derive_seed(cfg.seed, i);
        TestCase t;
        for (std::size_t attempt = 0; attempt <= batch.resample_limit; ++attempt) {
          TestGenConfig c = cfg;
          c.seed = derive_seed(base, attempt);
          t = generate_test(g, f, y0, y1, c);
          if (t.status != TestStatus::SeedMisclassified) break;
        }
        t.seed_index = i;
        t.seed_id = make_seed_id(y0, y1, i);
        results[i] = std::move(t);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(batch.count);
      }
    }
  };

  const std::size_t jobs = std::max<std::size_t>(1, std::min(batch.jobs, batch.count));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (auto& th : threads) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

std::string certify(const TestCase& test, const GeneratorModel& g, const ClassifierModel& f,
                    const std::vector<std::size_t>& layers) {
  if (!test.success()) return "";
  if (test.method == TestMethod::Semantic) {
    if (!(test.perturbation.flattened_norm() < test.epsilon)) return "similarity bound violated";
    for (std::size_t i = 0; i < test.perturbation.layers.size(); ++i) {
      if (std::find(layers.begin(), layers.end(), i) != layers.end()) continue;
      for (double v : test.perturbation.layers[i].data()) {
        if (v != 0.0) return "layer " + std::to_string(i) + " is outside the perturbable set but nonzero";
      }
    }
    const Tensor image = perturbed_forward(g, test.latent, test.y0, test.perturbation);
    if (!bitwise_equal(image, test.test_image)) return "stored test image differs from g(z, y0, p)";
  }
  const Prediction pred = f.predict(test.test_image);
  switch (test.mode) {
    case TestMode::Untargeted:
      if (!is_failing(pred.confidences.data(), test.y0)) return "test image is classified as its seed class";
      break;
    case TestMode::Targeted:
      if (!is_targeted_failing(pred.confidences.data(), test.y0, test.y1)) return "test image not classified as target";
      break;
    case TestMode::ConfidentTargeted:
      if (!is_confident_targeted_failing(pred.confidences.data(), test.y1, test.c)) {
        return "target margin not above c";
      }
      break;
  }
  return "";
}

void export_test_cases(const std::vector<TestCase>& tests, const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  std::ofstream out(directory / "tests.tsv", std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + (directory / "tests.tsv").string());
  for (const TestCase& t : tests) {
    char line[512];
    std::snprintf(line, sizeof line, "%s\t%zu\t%zu\t%s\t%zu\t%.6f\t%.6f\t%.6f\t%.6f\n", t.seed_id.c_str(), t.y0, t.y1,
                  std::string(status_name(t.status)).c_str(), t.iterations, t.perturbation_norm, t.pixel_l2,
                  t.pixel_linf, t.margin);
    out << line;
    write_ppm(t.seed_image, directory / (t.seed_id + "_seed.ppm"));
    write_ppm(t.test_image, directory / (t.seed_id + "_test.ppm"));
  }
  if (!out) throw Error("failed writing " + (directory / "tests.tsv").string());
}

void save_test_cases(const std::vector<TestCase>& tests, const std::filesystem::path& path) {
  NamedTensors named;
  named.emplace_back("count", Tensor::scalar(static_cast<double>(tests.size())));
  for (std::size_t i = 0; i < tests.size(); ++i) {
    const TestCase& t = tests[i];
    const std::string prefix = "case" + std::to_string(i) + ".";
    named.emplace_back(prefix + "meta",
                       Tensor({13}, {static_cast<double>(t.seed_index), static_cast<double>(t.method),
                                     static_cast<double>(t.mode), static_cast<double>(t.y0), static_cast<double>(t.y1),
                                     static_cast<double>(t.status), static_cast<double>(t.iterations), t.epsilon, t.c,
                                     t.perturbation_norm, t.pixel_l2, t.pixel_linf, t.margin}));
    named.emplace_back(prefix + "latent", t.latent);
    named.emplace_back(prefix + "seed_image", t.seed_image);
    named.emplace_back(prefix + "test_image", t.test_image);
    named.emplace_back(prefix + "seed_confidences", t.seed_confidences);
    named.emplace_back(prefix + "test_confidences", t.test_confidences);
    for (std::size_t l = 0; l < t.perturbation.layers.size(); ++l) {
      named.emplace_back(prefix + "p" + std::to_string(l), t.perturbation.layers[l]);
    }
  }
  save_weights(named, path);
}

std::vector<TestCase> load_test_cases(const std::filesystem::path& path) {
  const NamedTensors named = load_weights(path);
  std::map<std::string, const Tensor*> index;
  for (const auto& [name, tensor] : named) index[name] = &tensor;
  auto get = [&](const std::string& name) -> const Tensor& {
    auto it = index.find(name);
    if (it == index.end()) {
      throw WeightsError(WeightsError::Kind::MissingTensor, name, "test record " + path.string() + " lacks " + name);
    }
    return *it->second;
  };
  const auto count = static_cast<std::size_t>(get("count").item());
  std::vector<TestCase> tests(count);
  for (std::size_t i = 0; i < count; ++i) {
    TestCase& t = tests[i];
    const std::string prefix = "case" + std::to_string(i) + ".";
    const Tensor& m = get(prefix + "meta");
    if (m.numel() != 13) {
      throw WeightsError(WeightsError::Kind::InconsistentShape, prefix + "meta", "malformed test record metadata");
    }
    t.seed_index = static_cast<std::size_t>(m[0]);
    t.method = static_cast<TestMethod>(static_cast<int>(m[1]));
    t.mode = static_cast<TestMode>(static_cast<int>(m[2]));
    t.y0 = static_cast<std::size_t>(m[3]);
    t.y1 = static_cast<std::size_t>(m[4]);
    t.status = static_cast<TestStatus>(static_cast<int>(m[5]));
    t.iterations = static_cast<std::size_t>(m[6]);
    t.epsilon = m[7];
    t.c = m[8];
    t.perturbation_norm = m[9];
    t.pixel_l2 = m[10];
    t.pixel_linf = m[11];
    t.margin = m[12];
    t.seed_id = make_seed_id(t.y0, t.y1, t.seed_index);
    t.latent = get(prefix + "latent");
    t.seed_image = get(prefix + "seed_image");
    t.test_image = get(prefix + "test_image");
    t.seed_confidences = get(prefix + "seed_confidences");
    t.test_confidences = get(prefix + "test_confidences");
    for (std::size_t l = 0; index.count(prefix + "p" + std::to_string(l)); ++l) {
      t.perturbation.layers.push_back(get(prefix + "p" + std::to_string(l)));
    }
  }
  return tests;
}

}  // namespace semtest
