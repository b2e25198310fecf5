#pragma once

// Test generation by perturbing generator activations.
//
// A perturbation p = (p_0, ..., p_n) adds p_i to the output O_i of layer g_i
// (p_0 to the latent). The similarity constraint is ||p_flat||_2 < eps and the
// search is a fixed-step gradient walk from p = 0.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "semtest/criteria.hpp"
#include "semtest/models.hpp"
#include "semtest/tensor.hpp"

namespace semtest {

struct Perturbation {
  /// One entry per layer output O_0 .. O_n, each of shape [width_i].
  std::vector<Tensor> layers;

  static Perturbation zeros(const GeneratorModel& g);
  /// l2 norm of all elements flattened into one vector.
  double flattened_norm() const;
  std::size_t element_count() const;
};

/// g'_n(... g'_1(z + p_0) ...) with g'_i(o) = g_i(o) + p_i.
Tensor perturbed_forward(const GeneratorModel& g, const Tensor& z, std::size_t y, const Perturbation& p);

/// ||p_flat||_2 < eps.
bool similarity_holds(const Perturbation& p, double epsilon);

/// 2 * sqrt(number of perturbable activations) * 0.05.
double default_epsilon(const GeneratorModel& g, const std::vector<std::size_t>& layers);

inline const std::vector<std::size_t> kDefaultPerturbableLayers{0, 1, 2};

struct TestGenConfig {
  /// Similarity bound; values <= 0 select default_epsilon for the layer set.
  double epsilon = 0.0;
  double c = 0.1;
  TestMode mode = TestMode::ConfidentTargeted;
  /// Target class; generate_test takes it from y1.
  std::size_t target = 1;
  double step_size = 0.05;
  std::size_t max_iterations = 500;
  std::vector<std::size_t> layers = kDefaultPerturbableLayers;
  std::uint64_t seed = 0;

  void validate(const GeneratorModel& g) const;
  double resolved_epsilon(const GeneratorModel& g) const;
};

enum class TestStatus { Success, SeedMisclassified, IterationCap, EpsilonExceeded };
enum class TestMethod { Semantic, Pixel };

std::string_view status_name(TestStatus status);
TestStatus parse_status(std::string_view name);
std::string_view method_name(TestMethod method);

struct TestCase {
  std::string seed_id;
  std::size_t seed_index = 0;
  TestMethod method = TestMethod::Semantic;
  TestMode mode = TestMode::ConfidentTargeted;
  Tensor latent;
  std::size_t y0 = 0;
  std::size_t y1 = 0;
  double epsilon = 0.0;
  double c = 0.0;
  /// Empty for pixel tests.
  Perturbation perturbation;
  Tensor seed_image;
  Tensor test_image;
  Tensor seed_confidences;
  Tensor test_confidences;
  TestStatus status = TestStatus::IterationCap;
  std::size_t iterations = 0;
  double perturbation_norm = 0.0;
  double pixel_l2 = 0.0;
  double pixel_linf = 0.0;
  /// Failure margin reached on the test image (see achieved_margin).
  double margin = 0.0;

  bool success() const noexcept { return status == TestStatus::Success; }
};

/// Samples z from cfg.seed, checks the seed is classified y0, then walks
/// p <- p - eta * grad L(p) until the mode's predicate holds, the iteration
/// cap is reached, or ||p|| >= eps.
TestCase generate_test(const GeneratorModel& g, const ClassifierModel& f, std::size_t y0, std::size_t y1,
                       const TestGenConfig& cfg);

/// Same walk from a given latent.
TestCase generate_test_from(const GeneratorModel& g, const ClassifierModel& f, const Tensor& z, std::size_t y0,
                            std::size_t y1, const TestGenConfig& cfg);

/// Latent drawn by generate_test for the given seed.
Tensor sample_seed_latent(std::size_t latent_dim, std::uint64_t seed);

struct BatchConfig {
  std::size_t count = 100;
  /// Extra latents tried when a seed is misclassified.
  std::size_t resample_limit = 20;
  std::size_t jobs = 1;
};

/// count tests in direction y0 -> y1. Test i draws its seeds from
/// derive_seed(derive_seed(cfg.seed, i), attempt). Results are ordered by i
/// regardless of jobs.
std::vector<TestCase> generate_batch(const GeneratorModel& g, const ClassifierModel& f, std::size_t y0, std::size_t y1,
                                     const TestGenConfig& cfg, const BatchConfig& batch);

/// Recomputes the mode's failure predicate with an independent
/// classifier_predict pass, the similarity bound from the stored p, and the
/// sparsity of layers outside the set. Returns an empty string when the
/// test holds, otherwise a description of the first violation.
std::string certify(const TestCase& test, const GeneratorModel& g, const ClassifierModel& f,
                    const std::vector<std::size_t>& layers);

/// tests.tsv (seed-id, y0, y1, status, iterations, ||p||, pixel l2, pixel
/// l-inf, margin) plus <seed-id>_seed.ppm / <seed-id>_test.ppm per test.
void export_test_cases(const std::vector<TestCase>& tests, const std::filesystem::path& directory);

/// Full-precision record of test cases in the weights container format.
void save_test_cases(const std::vector<TestCase>& tests, const std::filesystem::path& path);
std::vector<TestCase> load_test_cases(const std::filesystem::path& path);

}  // namespace semtest
