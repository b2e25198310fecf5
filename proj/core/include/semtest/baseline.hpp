#pragma once

// Pixel-space projected gradient descent, t(x, p) = x + p with ||p|| <= eps.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string_view>

#include "semtest/criteria.hpp"
#include "semtest/models.hpp"
#include "semtest/tensor.hpp"
#include "semtest/testgen.hpp"

namespace semtest {

enum class Norm { L2, Linf };

std::string_view norm_name(Norm norm);
Norm parse_norm(std::string_view name);

/// 16/255, the commonly used l-inf budget.
inline constexpr double kDefaultLinfEpsilon = 16.0 / 255.0;
/// An l2 budget of 3 at 3x512x512 rescaled to 3x16x16: 3 * sqrt(768 / 786432).
inline constexpr double kDefaultL2Epsilon = 0.09375;

struct AttackConfig {
  Norm norm = Norm::Linf;
  double epsilon = kDefaultLinfEpsilon;
  double step_size = 2.5 * kDefaultLinfEpsilon / 40;
  std::size_t steps = 40;
  TestMode mode = TestMode::Untargeted;
  std::size_t target = 0;  // used by the targeted modes
  double c = 0.1;
  bool random_start = false;
  std::uint64_t seed = 0;

  void validate() const;

  /// Budget eps with step size 2.5 eps / steps.
  static AttackConfig with_budget(Norm norm, double epsilon, std::size_t steps);
};

/// l-inf: clamp to [-eps, eps]. l2: rescale by eps / ||delta|| when ||delta|| > eps.
Tensor project(const Tensor& delta, Norm norm, double epsilon);

struct AttackResult {
  Tensor adversarial;
  Tensor confidences;
  bool success = false;
};

/// Called with the current point after every projected step.
using AttackObserver = std::function<void(std::size_t step, const Tensor& adversarial)>;

/// Descends the attack loss (f_{y_true} when untargeted, the targeted margin
/// loss otherwise) with signed (l-inf) or normalised (l2) gradient steps,
/// projecting onto the eps-ball around x and clipping to [0, 1] after each
/// step.
AttackResult pgd_attack(const ClassifierModel& f, const Tensor& x, std::size_t y_true, const AttackConfig& cfg,
                        const AttackObserver& observer = {});

/// Batched form used by adversarial training: one step loop over a [B, numel]
/// matrix, each row attacked independently against its own label.
Tensor pgd_attack_batch(const ClassifierModel& f, const Tensor& inputs, const std::vector<std::size_t>& labels,
                        const AttackConfig& cfg);

/// Pixel-space counterpart of a semantic test: PGD from the same seed image
/// with the same mode, target and margin. The attack's own mode, target and c
/// are replaced by the seed test's.
TestCase pixel_test(const ClassifierModel& f, const TestCase& semantic, const AttackConfig& attack);

/// pixel_test over many seeds; results keep the input order regardless of jobs.
std::vector<TestCase> pixel_batch(const ClassifierModel& f, const std::vector<TestCase>& semantic,
                                  const AttackConfig& attack, std::size_t jobs = 1);

}  // namespace semtest
