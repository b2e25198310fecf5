#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "semtest/pipeline.hpp"
#include "semtest/run_config.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitStage = 2;

const std::vector<std::string> kCommands{"synth",    "train-generator", "inject-fault", "train-classifier", "adv-train",
                                         "gen-tests", "attack-pixel",   "analyze",      "full-experiment"};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic test generation for image classifiers"};
  std::string command;
  std::string config_path;
  std::string resume;
  std::size_t jobs = 1;
  app.add_option("command", command, "Stage to run, or full-experiment")
      ->required()
      ->check(CLI::IsMember(kCommands));
  app.add_option("--config", config_path, "Run configuration file")->required();
  app.add_option("--stage", resume, "full-experiment: first stage to run");
  app.add_option("--jobs", jobs, "Worker threads for test generation and attacks")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  semtest::RunConfig cfg;
  std::vector<semtest::Stage> stages;
  try {
    cfg = semtest::RunConfig::load(config_path);
    if (command == "full-experiment") {
      stages = semtest::full_experiment_stages();
      if (!resume.empty()) {
        const semtest::Stage first = semtest::parse_stage(resume);
        auto it = std::find(stages.begin(), stages.end(), first);
        if (it == stages.end()) throw semtest::InvalidArgument("stage '" + resume + "' is not part of full-experiment");
        stages.erase(stages.begin(), it);
      }
    } else {
      if (!resume.empty()) throw semtest::InvalidArgument("--stage only applies to full-experiment");
      stages.push_back(semtest::parse_stage(command));
    }
  } catch (const semtest::ConfigError& e) {
    std::cerr << "config error";
    if (!e.key().empty()) std::cerr << " [" << e.key() << "]";
    std::cerr << ": " << e.what() << '\n';
    return kExitConfig;
  } catch (const semtest::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  semtest::PipelineOptions options;
  options.jobs = jobs;
  options.log = &std::cerr;
  try {
    semtest::run_pipeline(command, stages, cfg, options);
  } catch (const semtest::StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitStage;
  }
  return EXIT_SUCCESS;
}
