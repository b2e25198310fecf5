#include "semtest/criteria.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "semtest/error.hpp"
#include "semtest/models.hpp"

namespace semtest {

namespace {

void check_class(std::span<const double> confidences, std::size_t y, const char* what) {
  if (y >= confidences.size()) {
    throw InvalidArgument(std::string(what) + " " + std::to_string(y) + " out of range for " +
                          std::to_string(confidences.size()) + " classes");
  }
}

double max_except(std::span<const double> confidences, std::size_t skip) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    if (i != skip) best = std::max(best, confidences[i]);
  }
  return best;
}

}  // namespace

std::string_view mode_name(TestMode mode) {
  switch (mode) {
    case TestMode::Untargeted: return "untargeted";
    case TestMode::Targeted: return "targeted";
    case TestMode::ConfidentTargeted: return "confident-targeted";
  }
  return "unknown";
}

TestMode parse_mode(std::string_view name) {
  for (TestMode m : {TestMode::Untargeted, TestMode::Targeted, TestMode::ConfidentTargeted}) {
    if (mode_name(m) == name) return m;
  }
  throw InvalidArgument("unknown test mode '" + std::string(name) + "'");
}

bool is_failing(std::span<const double> confidences, std::size_t y_true) {
  check_class(confidences, y_true, "true class");
  return argmax(confidences) != y_true;
}

bool is_confident_failing(std::span<const double> confidences, std::size_t y_true, double c) {
  check_class(confidences, y_true, "true class");
  return *std::max_element(confidences.begin(), confidences.end()) - confidences[y_true] > c;
}

bool is_targeted_failing(std::span<const double> confidences, std::size_t y_true, std::size_t y_target) {
  check_class(confidences, y_true, "true class");
  check_class(confidences, y_target, "target class");
  if (y_true == y_target) throw InvalidArgument("targeted test: target equals the true class");
  return argmax(confidences) == y_target;
}

bool is_confident_targeted_failing(std::span<const double> confidences, std::size_t y_target, double c) {
  check_class(confidences, y_target, "target class");
  return confidences[y_target] - max_except(confidences, y_target) > c;
}

bool mode_succeeds(TestMode mode, std::span<const double> confidences, std::size_t y_true, std::size_t y_target,
                   double c) {
  switch (mode) {
    case TestMode::Untargeted: return is_failing(confidences, y_true);
    case TestMode::Targeted: return is_targeted_failing(confidences, y_true, y_target);
    case TestMode::ConfidentTargeted:
      if (y_true == y_target) throw InvalidArgument("targeted test: target equals the true class");
      return is_confident_targeted_failing(confidences, y_target, c);
  }
  return false;
}

double untargeted_loss(std::span<const double> confidences) {
  if (confidences.empty()) throw InvalidArgument("untargeted_loss: empty confidence vector");
  return *std::max_element(confidences.begin(), confidences.end());
}

double targeted_margin_loss(std::span<const double> confidences, std::size_t y_target, double c) {
  check_class(confidences, y_target, "target class");
  return max_except(confidences, y_target) - confidences[y_target] + c;
}

double achieved_margin(TestMode mode, std::span<const double> confidences, std::size_t y_true, std::size_t y_target) {
  if (mode == TestMode::Untargeted) {
    check_class(confidences, y_true, "true class");
    return max_except(confidences, y_true) - confidences[y_true];
  }
  check_class(confidences, y_target, "target class");
  return confidences[y_target] - max_except(confidences, y_target);
}

ad::Var untargeted_loss(ad::Var confidences) { return confidences.graph()->max_last(confidences); }

ad::Var targeted_margin_loss(ad::Var confidences, std::size_t y_target, double c) {
  ad::Graph& g = *confidences.graph();
  return g.add_scalar(g.sub(g.max_except(confidences, {y_target}), g.gather(confidences, {y_target})), c);
}

}  // namespace semtest
