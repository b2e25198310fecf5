#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "helpers.hpp"

using semtest::testing::TempDir;

namespace {

const char* const kTinyConfig =
    "seed = 5\n"
    "io.output_dir = out\n"
    "dataset.n_per_class = 50\n"
    "generator.hidden = 16,32\n"
    "generator.train.epochs = 1\n"
    "generator.train.samples_per_epoch = 64\n"
    "classifier.hidden = 16\n"
    "classifier.train.epochs = 1\n"
    "adv.train.epochs = 1\n"
    "adv.attack.steps = 2\n"
    "testgen.layers = 0,1,3\n"
    "testgen.epsilon = 4\n"
    "testgen.step_size = 0.2\n"
    "testgen.max_iterations = 100\n"
    "testgen.seeds_per_direction = 3\n"
    "testgen.resample_limit = 2\n"
    "attack.steps = 5\n"
    "analysis.samples = 10\n";

struct Result {
  int code;
  std::string output;
};

Result run(const std::string& args, const std::filesystem::path& log) {
  const std::string cmd = std::string(SEMTEST_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream s;
  s << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, s.str()};
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Every file under root; the run summary loses its run.* lines (timestamps and
// timings) and io.output_dir, or is dropped entirely.
std::map<std::string, std::string> snapshot(const std::filesystem::path& root, bool with_summary) {
  std::map<std::string, std::string> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = std::filesystem::relative(entry.path(), root).generic_string();
    std::string content = read_file(entry.path());
    if (rel == "run_summary.txt") {
      if (!with_summary) continue;
      std::istringstream lines(content);
      std::string line, kept;
      while (std::getline(lines, line)) {
        if (line.rfind("run.", 0) == 0 || line.rfind("io.output_dir", 0) == 0) continue;
        kept += line + "\n";
      }
      content = kept;
    }
    files[rel] = content;
  }
  return files;
}

void expect_same_tree(const std::filesystem::path& a, const std::filesystem::path& b, bool with_summary = true) {
  const auto sa = snapshot(a, with_summary), sb = snapshot(b, with_summary);
  ASSERT_FALSE(sa.empty());
  ASSERT_EQ(sa.size(), sb.size());
  for (const auto& [name, content] : sa) {
    auto it = sb.find(name);
    ASSERT_NE(it, sb.end()) << name;
    EXPECT_TRUE(it->second == content) << name << " differs";
  }
}

}  // namespace

TEST(Cli, FullExperimentIsDeterministic) {
  TempDir dir("cli");
  write_file(dir / "a.cfg", kTinyConfig);
  std::string second = kTinyConfig;
  second.replace(second.find("io.output_dir = out"), 19, "io.output_dir = again");
  write_file(dir / "b.cfg", second);
  const Result a = run("full-experiment --config " + (dir / "a.cfg").string(), dir / "a.log");
  ASSERT_EQ(a.code, 0) << a.output;
  const Result b = run("full-experiment --config " + (dir / "b.cfg").string() + " --jobs 3", dir / "b.log");
  ASSERT_EQ(b.code, 0) << b.output;
  expect_same_tree(dir / "out", dir / "again");

  for (const char* report : {"bias_verification.csv", "generator_quality.csv", "robustness.csv",
                             "fault_detection.csv", "transfer.csv", "distance_summary.csv",
                             "distance_histogram.csv", "grid_semantic.ppm"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / "reports" / report)) << report;
  }
  EXPECT_FALSE(std::filesystem::exists(dir / "out" / "FAILED"));
  const std::string summary = read_file(dir / "out" / "run_summary.txt");
  EXPECT_NE(summary.find("seed = 5\n"), std::string::npos);
  EXPECT_NE(summary.find("run.command = full-experiment\n"), std::string::npos);
  EXPECT_NE(summary.find("result.inject-fault.fault_acquired"), std::string::npos);
}

TEST(Cli, SummaryReproducesTheRun) {
  TempDir dir("cli");
  write_file(dir / "a.cfg", kTinyConfig);
  ASSERT_EQ(run("full-experiment --config " + (dir / "a.cfg").string(), dir / "a.log").code, 0);
  std::filesystem::copy(dir / "out", dir / "first", std::filesystem::copy_options::recursive);
  const Result again = run("full-experiment --config " + (dir / "out" / "run_summary.txt").string(), dir / "b.log");
  ASSERT_EQ(again.code, 0) << again.output;
  expect_same_tree(dir / "first", dir / "out");
}

TEST(Cli, ResumeFromStageMatchesFullRun) {
  TempDir dir("cli");
  write_file(dir / "a.cfg", kTinyConfig);
  ASSERT_EQ(run("full-experiment --config " + (dir / "a.cfg").string(), dir / "a.log").code, 0);
  std::filesystem::copy(dir / "out", dir / "first", std::filesystem::copy_options::recursive);
  const Result resumed =
      run("full-experiment --stage gen-tests --config " + (dir / "a.cfg").string(), dir / "b.log");
  ASSERT_EQ(resumed.code, 0) << resumed.output;
  expect_same_tree(dir / "first", dir / "out", false);
  const std::string summary = read_file(dir / "out" / "run_summary.txt");
  EXPECT_EQ(summary.find("result.synth."), std::string::npos);
  EXPECT_NE(summary.find("result.gen-tests."), std::string::npos);
}

TEST(Cli, SingleStages) {
  TempDir dir("cli");
  write_file(dir / "a.cfg", kTinyConfig);
  const std::string cfg = " --config " + (dir / "a.cfg").string();
  for (const char* stage : {"synth", "train-generator", "inject-fault", "train-classifier", "gen-tests",
                            "attack-pixel", "analyze"}) {
    const Result r = run(std::string(stage) + cfg, dir / "log");
    ASSERT_EQ(r.code, 0) << stage << ": " << r.output;
  }
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "models" / "classifier_unbiased.nnw"));
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "reports" / "control.csv"));
  EXPECT_NE(read_file(dir / "out" / "reports" / "transfer.csv").find("unbiased,"), std::string::npos);
}

TEST(Cli, UnknownKeyExitsWithConfigError) {
  TempDir dir("cli");
  write_file(dir / "a.cfg", "seed = 1\ntestgen.epsilonn = 0.5\n");
  const Result r = run("gen-tests --config " + (dir / "a.cfg").string(), dir / "log");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("testgen.epsilonn"), std::string::npos) << r.output;
  EXPECT_FALSE(std::filesystem::exists(dir / "out"));
}

TEST(Cli, MissingConfigAndBadArguments) {
  TempDir dir("cli");
  EXPECT_EQ(run("synth --config " + (dir / "none.cfg").string(), dir / "log").code, 1);
  write_file(dir / "a.cfg", kTinyConfig);
  EXPECT_NE(run("sideways --config " + (dir / "a.cfg").string(), dir / "log").code, 0);
  EXPECT_NE(run("synth", dir / "log").code, 0);
  EXPECT_NE(run("synth --jobs 0 --config " + (dir / "a.cfg").string(), dir / "log").code, 0);
}

TEST(Cli, StageFailureExitsTwoAndLeavesMarker) {
  TempDir dir("cli");
  write_file(dir / "a.cfg", kTinyConfig);
  const Result r = run("gen-tests --config " + (dir / "a.cfg").string(), dir / "log");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("stage gen-tests"), std::string::npos) << r.output;
  ASSERT_TRUE(std::filesystem::exists(dir / "out" / "FAILED"));
  EXPECT_NE(read_file(dir / "out" / "FAILED").find("gen-tests"), std::string::npos);

  ASSERT_EQ(run("full-experiment --config " + (dir / "a.cfg").string(), dir / "log").code, 0);
  EXPECT_FALSE(std::filesystem::exists(dir / "out" / "FAILED"));
}
