#pragma once

// Experiment stages and their artifact layout under RunConfig::output_dir:
//
//   data/<split>/                      synthesized datasets (PPM + manifest)
//   models/<name>.nnw                  generator, discriminator, classifiers
//   tests/{semantic,pixel}/            records.nnw, tests.tsv, PPM pairs
//   reports/*.csv, reports/grid_*.ppm  aggregated reports
//   run_summary.txt                    resolved config, timings and results
//   FAILED                             present only after a failed stage

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "semtest/error.hpp"
#include "semtest/run_config.hpp"

namespace semtest {

enum class Stage { Synth, TrainGenerator, InjectFault, TrainClassifier, AdvTrain, GenTests, AttackPixel, Analyze };

std::string_view stage_name(Stage stage);
Stage parse_stage(std::string_view name);

/// synth, train-generator, inject-fault, adv-train, gen-tests, attack-pixel, analyze.
const std::vector<Stage>& full_experiment_stages();

class StageError : public Error {
 public:
  StageError(Stage stage, const std::string& message)
      : Error("stage " + std::string(stage_name(stage)) + ": " + message), stage_(stage) {}

  Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

struct PipelineOptions {
  std::size_t jobs = 1;
  /// Progress lines; null for silence.
  std::ostream* log = nullptr;
};

struct StageResult {
  Stage stage = Stage::Synth;
  double seconds = 0.0;
  std::vector<std::pair<std::string, std::string>> values;
};

namespace paths {
std::filesystem::path data(const RunConfig& cfg, Split split);
std::filesystem::path model(const RunConfig& cfg, std::string_view name);
std::filesystem::path tests(const RunConfig& cfg, TestMethod method);
std::filesystem::path records(const RunConfig& cfg, TestMethod method);
std::filesystem::path report(const RunConfig& cfg, std::string_view file);
std::filesystem::path summary(const RunConfig& cfg);
std::filesystem::path failed_marker(const RunConfig& cfg);
}  // namespace paths

/// Datasets every stage regenerates from the global seed.
BiasedDatasets experiment_datasets(const RunConfig& cfg);

/// Ordered (y0, y1) test directions: both ways across the bias pair.
std::vector<std::pair<std::size_t, std::size_t>> test_directions(const RunConfig& cfg);

/// Runs one stage, reading earlier stages' artifacts from disk. Failures are
/// rethrown as StageError.
StageResult run_stage(Stage stage, const RunConfig& cfg, const PipelineOptions& options);

struct PipelineRun {
  std::string command;
  std::chrono::system_clock::time_point started;
  std::chrono::system_clock::time_point finished;
  std::vector<StageResult> stages;
};

/// Runs the stages in order, writing the run summary on success and the
/// FAILED marker (before rethrowing) on the first failing stage.
PipelineRun run_pipeline(const std::string& command, const std::vector<Stage>& stages, const RunConfig& cfg,
                         const PipelineOptions& options);

void write_run_summary(const RunConfig& cfg, const PipelineRun& run, const std::filesystem::path& path);

}  // namespace semtest
