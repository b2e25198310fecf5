#include "semtest/baseline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>
#include <string>

#include "semtest/error.hpp"
#include "semtest/random.hpp"

namespace semtest {

namespace {

void clip_unit(Tensor& x) {
  for (double& v : x.data()) v = std::clamp(v, 0.0, 1.0);
}

// x_adv = clip(x + project(x_adv - x)), row by row.
void project_rows(Tensor& adv, const Tensor& x, std::size_t rows, Norm norm, double eps) {
  const std::size_t width = x.numel() / rows;
  for (std::size_t r = 0; r < rows; ++r) {
    Tensor delta({width});
    for (std::size_t j = 0; j < width; ++j) delta[j] = adv[r * width + j] - x[r * width + j];
    delta = project(delta, norm, eps);
    for (std::size_t j = 0; j < width; ++j) adv[r * width + j] = x[r * width + j] + delta[j];
  }
  clip_unit(adv);
}

void random_start(Tensor& adv, std::size_t rows, const AttackConfig& cfg) {
  Rng rng(cfg.seed);
  const std::size_t width = adv.numel() / rows;
  for (std::size_t r = 0; r < rows; ++r) {
    if (cfg.norm == Norm::Linf) {
      for (std::size_t j = 0; j < width; ++j) adv[r * width + j] += rng.uniform(-cfg.epsilon, cfg.epsilon);
    } else {
      std::vector<double> dir(width);
      for (double& v : dir) v = rng.normal();
      const double n = l2_norm(dir);
      const double radius = cfg.epsilon * std::pow(rng.uniform(), 1.0 / static_cast<double>(width));
      for (std::size_t j = 0; j < width; ++j) adv[r * width + j] += n > 0 ? radius * dir[j] / n : 0.0;
    }
  }
}

Tensor run_attack(const ClassifierModel& f, const Tensor& inputs, const std::vector<std::size_t>& labels,
                  const AttackConfig& cfg, const AttackObserver& observer, Tensor* confidences) {
  cfg.validate();
  const std::size_t rows = labels.size();
  const std::size_t width = inputs.numel() / rows;
  Tensor adv = inputs;
  if (cfg.random_start && cfg.epsilon > 0) {
    random_start(adv, rows, cfg);
    project_rows(adv, inputs, rows, cfg.norm, cfg.epsilon);
  }

  ad::Graph graph;
  const ad::Var x = graph.leaf(adv);
  const ad::Var conf = f.confidences(graph, x);
  ad::Var loss;
  if (cfg.mode == TestMode::Untargeted) {
    loss = graph.sum(graph.gather(conf, labels));
  } else {
    if (rows != 1) throw InvalidArgument("pgd: targeted modes attack one image at a time");
    loss = targeted_margin_loss(conf, cfg.target, cfg.c);
  }

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    graph.forward(loss);
    const Tensor grad = graph.backward(loss, {x})[0];
    for (std::size_t r = 0; r < rows; ++r) {
      const std::span<const double> g = grad.data().subspan(r * width, width);
      if (cfg.norm == Norm::Linf) {
        for (std::size_t j = 0; j < width; ++j) {
          const double s = g[j] > 0 ? 1.0 : (g[j] < 0 ? -1.0 : 0.0);
          adv[r * width + j] -= cfg.step_size * s;
        }
      } else {
        const double n = l2_norm(g);
        if (n > 0) {
          for (std::size_t j = 0; j < width; ++j) adv[r * width + j] -= cfg.step_size * g[j] / n;
        }
      }
    }
    project_rows(adv, inputs, rows, cfg.norm, cfg.epsilon);
    graph.set_value(x, adv);
    if (observer) observer(step, adv);
  }
  if (confidences) *confidences = graph.forward(conf);
  return adv;
}

}  // namespace

std::string_view norm_name(Norm norm) { return norm == Norm::L2 ? "l2" : "linf"; }

Norm parse_norm(std::string_view name) {
  if (name == "l2") return Norm::L2;
  if (name == "linf") return Norm::Linf;
  throw InvalidArgument("unknown norm '" + std::string(name) + "' (expected l2 or linf)");
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0) || !std::isfinite(epsilon)) throw InvalidArgument("attack epsilon must be >= 0");
  if (!(step_size >= 0) || !std::isfinite(step_size)) throw InvalidArgument("attack step size must be >= 0");
}

AttackConfig AttackConfig::with_budget(Norm norm, double epsilon, std::size_t steps) {
  AttackConfig cfg;
  cfg.norm = norm;
  cfg.epsilon = epsilon;
  cfg.steps = steps;
  cfg.step_size = steps == 0 ? 0.0 : 2.5 * epsilon / static_cast<double>(steps);
  return cfg;
}

Tensor project(const Tensor& delta, Norm norm, double epsilon) {
  if (!(epsilon >= 0)) throw InvalidArgument("project: epsilon must be >= 0");
  Tensor out = delta;
  if (norm == Norm::Linf) {
    for (double& v : out.data()) v = std::clamp(v, -epsilon, epsilon);
    return out;
  }
  const double n = l2_norm(delta);
  if (n > epsilon) {
    const double factor = epsilon / n;
    for (double& v : out.data()) v *= factor;
    // Rounding can leave the scaled norm a few ulps above epsilon.
    while (l2_norm(out) > epsilon) {
      for (double& v : out.data()) v = std::nextafter(v, 0.0);
    }
  }
  return out;
}

AttackResult pgd_attack(const ClassifierModel& f, const Tensor& x, std::size_t y_true, const AttackConfig& cfg,
                        const AttackObserver& observer) {
  if (x.numel() != f.spec().input_dim) {
    throw ShapeError("pgd_attack", shape_string(x.shape()), "[" + std::to_string(f.spec().input_dim) + "]");
  }
  if (y_true >= f.classes()) throw InvalidArgument("pgd_attack: label out of range");
  AttackResult result;
  const Tensor flat = x.reshaped({1, x.numel()});
  AttackObserver reshaped_observer;
  if (observer) {
    reshaped_observer = [&](std::size_t step, const Tensor& adv) { observer(step, adv.reshaped(x.shape())); };
  }
  Tensor conf;
  result.adversarial = run_attack(f, flat, {y_true}, cfg, reshaped_observer, &conf).reshaped(x.shape());
  result.confidences = conf.reshaped({f.classes()});
  result.success = mode_succeeds(cfg.mode, result.confidences.data(), y_true, cfg.target, cfg.c);
  return result;
}

Tensor pgd_attack_batch(const ClassifierModel& f, const Tensor& inputs, const std::vector<std::size_t>& labels,
                        const AttackConfig& cfg) {
  if (inputs.rank() != 2 || inputs.shape()[0] != labels.size() || inputs.shape()[1] != f.spec().input_dim) {
    throw ShapeError("pgd_attack_batch", shape_string(inputs.shape()),
                     "[" + std::to_string(labels.size()) + "," + std::to_string(f.spec().input_dim) + "]");
  }
  if (cfg.mode != TestMode::Untargeted) throw InvalidArgument("pgd_attack_batch: only untargeted attacks");
  return run_attack(f, inputs, labels, cfg, {}, nullptr);
}

TestCase pixel_test(const ClassifierModel& f, const TestCase& semantic, const AttackConfig& attack) {
  TestCase t;
  t.seed_id = semantic.seed_id;
  t.seed_index = semantic.seed_index;
  t.method = TestMethod::Pixel;
  t.mode = semantic.mode;
  t.latent = semantic.latent;
  t.y0 = semantic.y0;
  t.y1 = semantic.y1;
  t.epsilon = attack.epsilon;
  t.c = semantic.c;
  t.seed_image = semantic.seed_image;
  t.seed_confidences = semantic.seed_confidences;
  if (semantic.status == TestStatus::SeedMisclassified) {
    t.status = TestStatus::SeedMisclassified;
    t.test_image = t.seed_image;
    t.test_confidences = t.seed_confidences;
    t.margin = achieved_margin(t.mode, t.test_confidences.data(), t.y0, t.y1);
    return t;
  }
  AttackConfig cfg = attack;
  cfg.mode = semantic.mode;
  cfg.target = semantic.y1;
  cfg.c = semantic.mode == TestMode::Targeted ? 0.0 : semantic.c;
  cfg.seed = derive_seed(attack.seed, semantic.seed_id);
  const AttackResult r = pgd_attack(f, semantic.seed_image, semantic.y0, cfg);
  t.test_image = r.adversarial;
  t.test_confidences = r.confidences;
  t.status = mode_succeeds(t.mode, r.confidences.data(), t.y0, t.y1, t.c) ? TestStatus::Success
                                                                          : TestStatus::IterationCap;
  t.iterations = cfg.steps;
  const Tensor delta = difference(t.test_image, t.seed_image);
  t.pixel_l2 = l2_norm(delta);
  t.pixel_linf = linf_norm(delta);
  t.perturbation_norm = cfg.norm == Norm::L2 ? t.pixel_l2 : t.pixel_linf;
  t.margin = achieved_margin(t.mode, t.test_confidences.data(), t.y0, t.y1);
  return t;
}

std::vector<TestCase> pixel_batch(const ClassifierModel& f, const std::vector<TestCase>& semantic,
                                  const AttackConfig& attack, std::size_t jobs) {
  std::vector<TestCase> results(semantic.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= semantic.size()) return;
      try {
        results[i] = pixel_test(f, semantic[i], attack);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(semantic.size());
      }
    }
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, semantic.size()));
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

}  // namespace semtest
