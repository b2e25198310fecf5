#pragma once

// Flat `key = value` run configuration.
//
//   # comment
//   seed = 7
//   dataset.n_per_class = 1000
//   testgen.layers = 0,1,2
//
// Unknown keys are rejected. Keys under run.* and result.* are accepted and
// ignored so that a run summary can be fed back as a configuration.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "semtest/baseline.hpp"
#include "semtest/error.hpp"
#include "semtest/synthdata.hpp"
#include "semtest/testgen.hpp"
#include "semtest/training.hpp"

namespace semtest {

class ConfigError : public Error {
 public:
  ConfigError(std::string key, std::size_t line, const std::string& message)
      : Error(message), key_(std::move(key)), line_(line) {}

  /// Offending key; empty for syntax errors.
  const std::string& key() const noexcept { return key_; }
  /// 1-based line number, 0 when not tied to a line.
  std::size_t line() const noexcept { return line_; }

 private:
  std::string key_;
  std::size_t line_;
};

enum class GeneratorMode { Distilled, Cgan };

struct RunConfig {
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "out";

  std::size_t classes = 2;
  std::size_t n_per_class = 1000;
  BiasSpec bias{};

  GeneratorMode generator_mode = GeneratorMode::Distilled;
  GeneratorSpec generator{};
  TrainConfig generator_train{};
  std::size_t gan_warmup_steps = 50;
  double gan_label_weight = 1.0;

  ClassifierSpec classifier{};
  TrainConfig classifier_train{};

  TrainConfig adv_train{};
  AttackConfig adv_attack{};

  TestGenConfig testgen{};
  std::size_t seeds_per_direction = 100;
  std::size_t resample_limit = 20;

  AttackConfig attack{};

  double analysis_epsilon_l2 = kDefaultL2Epsilon;
  double analysis_epsilon_linf = kDefaultLinfEpsilon;
  /// Images per class used for robustness and generator-quality summaries.
  std::size_t analysis_samples = 200;

  RunConfig();

  /// Parses text; relative paths resolve against base_dir.
  static RunConfig parse(std::string_view text, const std::filesystem::path& base_dir);
  static RunConfig load(const std::filesystem::path& path);

  /// Cross-field checks; throws ConfigError naming the key.
  void validate() const;

  /// Every key with its resolved value, one per line, in a fixed order.
  std::string to_text() const;
};

std::string_view generator_mode_name(GeneratorMode mode);

}  // namespace semtest
