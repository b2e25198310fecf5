#pragma once

// Failure predicates and the losses whose minimisation produces them.
//
// Every function here works on a confidence vector f(x) (softmax output). The
// graph overloads build the same quantities on an autodiff graph so that the
// optimisers in testgen and baseline descend exactly what is checked.

#include <cstddef>
#include <span>
#include <string_view>

#include "semtest/autodiff.hpp"

namespace semtest {

enum class TestMode { Untargeted, Targeted, ConfidentTargeted };

std::string_view mode_name(TestMode mode);
TestMode parse_mode(std::string_view name);

/// f_pred(x) != y_true.
bool is_failing(std::span<const double> confidences, std::size_t y_true);
/// max_y f_y(x) - f_{y_true}(x) > c.
bool is_confident_failing(std::span<const double> confidences, std::size_t y_true, double c);
/// f_pred(x) == y_target, with y_target != y_true.
bool is_targeted_failing(std::span<const double> confidences, std::size_t y_true, std::size_t y_target);
/// f_{y_target}(x) - max_{y != y_target} f_y(x) > c.
bool is_confident_targeted_failing(std::span<const double> confidences, std::size_t y_target, double c);

/// The success predicate of a mode. Targeted modes require y_target != y_true.
bool mode_succeeds(TestMode mode, std::span<const double> confidences, std::size_t y_true, std::size_t y_target,
                   double c);

/// max_y f_y(x).
double untargeted_loss(std::span<const double> confidences);
/// max_{y != y_target} f_y(x) - f_{y_target}(x) + c.
double targeted_margin_loss(std::span<const double> confidences, std::size_t y_target, double c);

/// Margin by which the mode's failure holds: f_{y_target} - max_{y != y_target} f_y
/// in targeted modes, max_{y != y_true} f_y - f_{y_true} otherwise.
double achieved_margin(TestMode mode, std::span<const double> confidences, std::size_t y_true, std::size_t y_target);

/// Graph form of the losses above for confidences [1, k]; result shape [1].
ad::Var untargeted_loss(ad::Var confidences);
ad::Var targeted_margin_loss(ad::Var confidences, std::size_t y_target, double c);

}  // namespace semtest
