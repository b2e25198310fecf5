#include "semtest/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <ostream>

#include "semtest/analysis.hpp"
#include "semtest/image.hpp"
#include "semtest/random.hpp"
#include "semtest/weights_io.hpp"

namespace semtest {

namespace {

constexpr std::size_t kGridPairs = 8;

struct StageName {
  Stage stage;
  std::string_view name;
};

constexpr StageName kStageNames[] = {
    {Stage::Synth, "synth"},
    {Stage::TrainGenerator, "train-generator"},
    {Stage::InjectFault, "inject-fault"},
    {Stage::TrainClassifier, "train-classifier"},
    {Stage::AdvTrain, "adv-train"},
    {Stage::GenTests, "gen-tests"},
    {Stage::AttackPixel, "attack-pixel"},
    {Stage::Analyze, "analyze"},
};

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::uint64_t stage_seed(const RunConfig& cfg, Stage stage) { return derive_seed(cfg.seed, stage_name(stage)); }

GeneratorSpec generator_spec(const RunConfig& cfg) {
  GeneratorSpec spec = cfg.generator;
  spec.classes = cfg.classes;
  return spec;
}

ClassifierSpec classifier_spec(const RunConfig& cfg) {
  ClassifierSpec spec = cfg.classifier;
  spec.classes = cfg.classes;
  return spec;
}

std::ofstream open_report(const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

void require(const std::filesystem::path& path, std::string_view producer) {
  if (!std::filesystem::exists(path)) {
    throw Error("missing " + path.string() + " (run " + std::string(producer) + " first)");
  }
}

// First `per_class` images of every class, in dataset order.
LabeledDataset per_class_subset(const LabeledDataset& data, std::size_t per_class) {
  LabeledDataset out;
  out.split = data.split;
  out.classes = data.classes;
  std::vector<std::size_t> taken(data.classes, 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t y = data.labels[i];
    if (taken[y] >= per_class) continue;
    ++taken[y];
    out.images.push_back(data.images[i]);
    out.labels.push_back(y);
    out.params.push_back(data.params[i]);
  }
  return out;
}

class StageRunner {
 public:
  StageRunner(const RunConfig& cfg, const PipelineOptions& options, StageResult& result)
      : cfg_(cfg), options_(options), result_(result) {}

  void run(Stage stage) {
    switch (stage) {
      case Stage::Synth: return synth();
      case Stage::TrainGenerator: return train_generator();
      case Stage::InjectFault: return inject();
      case Stage::TrainClassifier: return train_control();
      case Stage::AdvTrain: return adv_train();
      case Stage::GenTests: return gen_tests();
      case Stage::AttackPixel: return attack_pixel();
      case Stage::Analyze: return analyze();
    }
  }

 private:
  void log(const std::string& line) {
    if (options_.log) *options_.log << "[" << stage_name(result_.stage) << "] " << line << std::endl;
  }

  void record(std::string key, std::string value) {
    log(key + " = " + value);
    result_.values.emplace_back(std::move(key), std::move(value));
  }
  void record(std::string key, double value) { record(std::move(key), fixed6(value)); }
  void record(std::string key, std::size_t value) { record(std::move(key), std::to_string(value)); }

  ClassifierModel classifier(std::string_view name, std::string_view producer) {
    const auto path = paths::model(cfg_, name);
    require(path, producer);
    return load_classifier(path);
  }

  void synth() {
    const BiasedDatasets d = experiment_datasets(cfg_);
    for (const LabeledDataset* s : {&d.train, &d.holdout_aligned, &d.holdout_counter, &d.unbiased_test}) {
      export_dataset(*s, paths::data(cfg_, s->split));
      record(std::string(split_name(s->split)) + ".size", s->size());
    }
    record("train.feature_label_correlation", feature_label_correlation(d.train, cfg_.bias.feature));
    record("unbiased_test.feature_label_correlation", feature_label_correlation(d.unbiased_test, cfg_.bias.feature));
  }

  void train_generator() {
    TrainConfig train = cfg_.generator_train;
    train.seed = stage_seed(cfg_, Stage::TrainGenerator);
    std::filesystem::create_directories(paths::model(cfg_, "generator").parent_path());
    GeneratorModel g = GeneratorModel::zeros(generator_spec(cfg_));
    if (cfg_.generator_mode == GeneratorMode::Distilled) {
      log("distilling the renderer");
      g = train_generator_distilled(train, generator_spec(cfg_));
    } else {
      log("adversarial generator training");
      GanConfig gan;
      gan.warmup_steps = cfg_.gan_warmup_steps;
      gan.label_weight = cfg_.gan_label_weight;
      gan.auxiliary = classifier_spec(cfg_);
      gan.auxiliary_train = cfg_.classifier_train;
      gan.auxiliary_train.seed = derive_seed(train.seed, "auxiliary");
      const BiasedDatasets d = experiment_datasets(cfg_);
      GanResult r = train_generator_cgan(d.unbiased_test, train, gan, generator_spec(cfg_));
      save_weights(r.discriminator, paths::model(cfg_, "discriminator"));
      record("gan.warmup_accuracy", r.history.warmup_accuracy);
      g = std::move(r.generator);
    }
    save_weights(g, paths::model(cfg_, "generator"));

    const GeneratorQuality q = evaluate_generator(g, cfg_.analysis_samples, derive_seed(train.seed, "quality"));
    auto out = open_report(paths::report(cfg_, "generator_quality.csv"));
    out << "mode,samples,mse,monotone_fraction,class_accuracy\n"
        << generator_mode_name(cfg_.generator_mode) << ',' << q.samples << ',' << fixed6(q.mse) << ','
        << fixed6(q.monotone_fraction) << ',' << fixed6(q.class_accuracy) << '\n';
    record("mse", q.mse);
    record("monotone_fraction", q.monotone_fraction);
    record("class_accuracy", q.class_accuracy);
  }

  void inject() {
    const BiasedDatasets d = experiment_datasets(cfg_);
    TrainConfig train = cfg_.classifier_train;
    train.seed = stage_seed(cfg_, Stage::InjectFault);
    const FaultInjection fi = inject_fault(d, train, classifier_spec(cfg_));
    save_weights(fi.model, paths::model(cfg_, "classifier_biased"));
    const double unbiased = accuracy(fi.model, d.unbiased_test);
    auto out = open_report(paths::report(cfg_, "bias_verification.csv"));
    out << "feature,aligned_accuracy,counter_accuracy,unbiased_accuracy,fault_acquired\n"
        << feature_name(cfg_.bias.feature) << ',' << fixed6(fi.report.aligned_accuracy) << ','
        << fixed6(fi.report.counter_accuracy) << ',' << fixed6(unbiased) << ','
        << (fi.report.fault_acquired ? "true" : "false") << '\n';
    record("aligned_accuracy", fi.report.aligned_accuracy);
    record("counter_accuracy", fi.report.counter_accuracy);
    record("unbiased_accuracy", unbiased);
    record("fault_acquired", std::string(fi.report.fault_acquired ? "true" : "false"));
  }

  void train_control() {
    const std::uint64_t seed = stage_seed(cfg_, Stage::TrainClassifier);
    const LabeledDataset data = build_unbiased_dataset(cfg_.classes, cfg_.n_per_class, derive_seed(seed, "data"));
    TrainConfig train = cfg_.classifier_train;
    train.seed = derive_seed(seed, "train");
    const ClassifierModel f = train_classifier(data, train, classifier_spec(cfg_));
    save_weights(f, paths::model(cfg_, "classifier_unbiased"));
    const BiasedDatasets d = experiment_datasets(cfg_);
    const BiasVerificationReport r = verify_bias(f, d);
    const double unbiased = accuracy(f, d.unbiased_test);
    auto out = open_report(paths::report(cfg_, "control.csv"));
    out << "feature,aligned_accuracy,counter_accuracy,unbiased_accuracy,fault_acquired\n"
        << feature_name(cfg_.bias.feature) << ',' << fixed6(r.aligned_accuracy) << ',' << fixed6(r.counter_accuracy)
        << ',' << fixed6(unbiased) << ',' << (r.fault_acquired ? "true" : "false") << '\n';
    record("aligned_accuracy", r.aligned_accuracy);
    record("counter_accuracy", r.counter_accuracy);
    record("unbiased_accuracy", unbiased);
  }

  void adv_train() {
    const BiasedDatasets d = experiment_datasets(cfg_);
    const std::uint64_t seed = stage_seed(cfg_, Stage::AdvTrain);
    TrainConfig train = cfg_.adv_train;
    train.seed = derive_seed(seed, "train");
    AttackConfig attack = cfg_.adv_attack;
    attack.mode = TestMode::Untargeted;
    attack.seed = derive_seed(seed, "attack");
    const ClassifierModel robust = adversarial_train(d.train, attack, train, classifier_spec(cfg_));
    save_weights(robust, paths::model(cfg_, "classifier_robust"));

    AttackConfig eval = cfg_.attack;
    eval.mode = TestMode::Untargeted;
    eval.seed = derive_seed(seed, "evaluate");
    const LabeledDataset sample = per_class_subset(d.holdout_aligned, cfg_.analysis_samples);
    auto out = open_report(paths::report(cfg_, "robustness.csv"));
    out << "model,norm,epsilon,clean_accuracy,robust_accuracy\n";
    std::vector<std::pair<std::string, ClassifierModel>> models;
    const auto biased_path = paths::model(cfg_, "classifier_biased");
    if (std::filesystem::exists(biased_path)) models.emplace_back("biased", load_classifier(biased_path));
    models.emplace_back("robust", robust);
    for (const auto& [name, f] : models) {
      const double clean = accuracy(f, sample);
      const double rob = robust_accuracy(f, sample, eval);
      out << name << ',' << norm_name(eval.norm) << ',' << fixed6(eval.epsilon) << ',' << fixed6(clean) << ','
          << fixed6(rob) << '\n';
      record(name + ".clean_accuracy", clean);
      record(name + ".robust_accuracy", rob);
    }
  }

  void gen_tests() {
    const auto g_path = paths::model(cfg_, "generator");
    require(g_path, "train-generator");
    const GeneratorModel g = load_generator(g_path);
    const ClassifierModel f = classifier("classifier_biased", "inject-fault");
    TestGenConfig tg = cfg_.testgen;
    tg.validate(g);
    BatchConfig batch;
    batch.count = cfg_.seeds_per_direction;
    batch.resample_limit = cfg_.resample_limit;
    batch.jobs = options_.jobs;
    const std::uint64_t seed = stage_seed(cfg_, Stage::GenTests);
    std::vector<TestCase> all;
    for (const auto& [y0, y1] : test_directions(cfg_)) {
      tg.seed = derive_seed(seed, y0 * cfg_.classes + y1);
      std::vector<TestCase> tests = generate_batch(g, f, y0, y1, tg, batch);
      std::size_t ok = 0;
      for (const TestCase& t : tests) {
        if (!t.success()) continue;
        ++ok;
        const std::string violation = certify(t, g, f, tg.layers);
        if (!violation.empty()) throw Error("test " + t.seed_id + " failed certification: " + violation);
      }
      const std::string dir = std::to_string(y0) + "-" + std::to_string(y1);
      record(dir + ".tests", tests.size());
      record(dir + ".successes", ok);
      all.insert(all.end(), std::make_move_iterator(tests.begin()), std::make_move_iterator(tests.end()));
    }
    record("epsilon", tg.resolved_epsilon(g));
    write_tests(all, TestMethod::Semantic);
  }

  void attack_pixel() {
    const auto semantic_path = paths::records(cfg_, TestMethod::Semantic);
    require(semantic_path, "gen-tests");
    const std::vector<TestCase> semantic = load_test_cases(semantic_path);
    const ClassifierModel f = classifier("classifier_biased", "inject-fault");
    AttackConfig attack = cfg_.attack;
    attack.seed = stage_seed(cfg_, Stage::AttackPixel);
    const std::vector<TestCase> pixel = pixel_batch(f, semantic, attack, options_.jobs);
    record("tests", pixel.size());
    record("successes", successes(pixel).size());
    write_tests(pixel, TestMethod::Pixel);
  }

  void analyze() {
    std::map<TestMethod, std::vector<TestCase>> tests;
    for (TestMethod m : {TestMethod::Semantic, TestMethod::Pixel}) {
      const auto path = paths::records(cfg_, m);
      require(path, m == TestMethod::Semantic ? "gen-tests" : "attack-pixel");
      tests[m] = load_test_cases(path);
    }

    const std::vector<TestCase> semantic_ok = successes(tests[TestMethod::Semantic]);
    record("distance.tests", semantic_ok.size());
    if (!semantic_ok.empty()) {
      const DistanceReport distances =
          distance_distribution(semantic_ok, cfg_.analysis_epsilon_l2, cfg_.analysis_epsilon_linf);
      write_distance_csv(distances, paths::report(cfg_, "distance_histogram.csv"),
                         paths::report(cfg_, "distance_summary.csv"));
      record("distance.l2_exceed_fraction", distances.l2.exceed_fraction);
      record("distance.linf_exceed_fraction", distances.linf.exceed_fraction);
    }

    std::vector<FaultDetectionReport> detection;
    for (const auto& [method, all] : tests) {
      for (const auto& [y0, y1] : test_directions(cfg_)) {
        std::vector<TestCase> direction;
        for (const TestCase& t : all) {
          if (t.y0 == y0 && t.y1 == y1) direction.push_back(t);
        }
        if (direction.empty()) continue;
        detection.push_back(fault_detection_rate(direction, cfg_.bias, cfg_.classes));
        const FaultDetectionReport& r = detection.back();
        record(std::string(method_name(method)) + "." + std::to_string(y0) + "-" + std::to_string(y1) +
                   ".fault_detection_rate",
               r.rate);
      }
    }
    write_fault_detection_csv(detection, paths::report(cfg_, "fault_detection.csv"));

    std::vector<std::pair<std::string, ClassifierModel>> models;
    models.emplace_back("biased", classifier("classifier_biased", "inject-fault"));
    for (const char* name : {"robust", "unbiased"}) {
      const auto path = paths::model(cfg_, std::string("classifier_") + name);
      if (std::filesystem::exists(path)) models.emplace_back(name, load_classifier(path));
    }
    std::vector<NamedClassifier> named;
    for (const auto& [name, f] : models) named.push_back({name, &f});
    std::map<std::string, std::vector<TestCase>> by_method;
    for (const auto& [method, all] : tests) by_method[std::string(method_name(method))] = all;
    const TransferReport transfer = transfer_matrix(by_method, named);
    write_transfer_csv(transfer, paths::report(cfg_, "transfer.csv"));
    for (const auto& [key, cell] : transfer.cells) {
      record("transfer." + key.first + "." + key.second, cell.accuracy);
    }

    for (const auto& [method, all] : tests) {
      std::vector<std::pair<Tensor, Tensor>> pairs;
      for (const TestCase& t : all) {
        if (pairs.size() == kGridPairs) break;
        if (t.success()) pairs.emplace_back(t.seed_image, t.test_image);
      }
      if (pairs.empty()) continue;
      emit_image_grid(pairs, paths::report(cfg_, "grid_" + std::string(method_name(method)) + ".ppm"));
    }
  }

  void write_tests(const std::vector<TestCase>& tests, TestMethod method) {
    const auto dir = paths::tests(cfg_, method);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    save_test_cases(tests, paths::records(cfg_, method));
    export_test_cases(tests, dir);
  }

  const RunConfig& cfg_;
  const PipelineOptions& options_;
  StageResult& result_;
};

std::string timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string_view stage_name(Stage stage) {
  for (const StageName& s : kStageNames) {
    if (s.stage == stage) return s.name;
  }
  throw InvalidArgument("unknown stage");
}

Stage parse_stage(std::string_view name) {
  for (const StageName& s : kStageNames) {
    if (s.name == name) return s.stage;
  }
  throw InvalidArgument("unknown stage '" + std::string(name) + "'");
}

const std::vector<Stage>& full_experiment_stages() {
  static const std::vector<Stage> stages{Stage::Synth,    Stage::TrainGenerator, Stage::InjectFault, Stage::AdvTrain,
                                         Stage::GenTests, Stage::AttackPixel,    Stage::Analyze};
  return stages;
}

namespace paths {
std::filesystem::path data(const RunConfig& cfg, Split split) {
  return cfg.output_dir / "data" / std::string(split_name(split));
}
std::filesystem::path model(const RunConfig& cfg, std::string_view name) {
  return cfg.output_dir / "models" / (std::string(name) + ".nnw");
}
std::filesystem::path tests(const RunConfig& cfg, TestMethod method) {
  return cfg.output_dir / "tests" / std::string(method_name(method));
}
std::filesystem::path records(const RunConfig& cfg, TestMethod method) { return tests(cfg, method) / "records.nnw"; }
std::filesystem::path report(const RunConfig& cfg, std::string_view file) {
  return cfg.output_dir / "reports" / std::string(file);
}
std::filesystem::path summary(const RunConfig& cfg) { return cfg.output_dir / "run_summary.txt"; }
std::filesystem::path failed_marker(const RunConfig& cfg) { return cfg.output_dir / "FAILED"; }
}  // namespace paths

BiasedDatasets experiment_datasets(const RunConfig& cfg) {
  return build_biased_dataset(cfg.bias, cfg.classes, cfg.n_per_class, stage_seed(cfg, Stage::Synth));
}

std::vector<std::pair<std::size_t, std::size_t>> test_directions(const RunConfig& cfg) {
  return {{cfg.bias.class0, cfg.bias.class1}, {cfg.bias.class1, cfg.bias.class0}};
}

StageResult run_stage(Stage stage, const RunConfig& cfg, const PipelineOptions& options) {
  StageResult result;
  result.stage = stage;
  const auto start = std::chrono::steady_clock::now();
  try {
    std::filesystem::create_directories(cfg.output_dir);
    StageRunner(cfg, options, result).run(stage);
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

PipelineRun run_pipeline(const std::string& command, const std::vector<Stage>& stages, const RunConfig& cfg,
                         const PipelineOptions& options) {
  PipelineRun run;
  run.command = command;
  run.started = std::chrono::system_clock::now();
  std::filesystem::create_directories(cfg.output_dir);
  std::filesystem::remove(paths::failed_marker(cfg));
  for (Stage stage : stages) {
    try {
      run.stages.push_back(run_stage(stage, cfg, options));
    } catch (const StageError& e) {
      std::ofstream marker(paths::failed_marker(cfg), std::ios::binary | std::ios::trunc);
      marker << e.what() << '\n';
      throw;
    }
  }
  run.finished = std::chrono::system_clock::now();
  write_run_summary(cfg, run, paths::summary(cfg));
  return run;
}

void write_run_summary(const RunConfig& cfg, const PipelineRun& run, const std::filesystem::path& path) {
  std::ofstream out = open_report(path);
  out << cfg.to_text();
  out << "run.command = " << run.command << '\n';
  out << "run.started = " << timestamp(run.started) << '\n';
  out << "run.finished = " << timestamp(run.finished) << '\n';
  for (const StageResult& s : run.stages) {
    out << "run." << stage_name(s.stage) << ".seconds = " << fixed6(s.seconds) << '\n';
  }
  for (const StageResult& s : run.stages) {
    for (const auto& [key, value] : s.values) out << "result." << stage_name(s.stage) << '.' << key << " = " << value << '\n';
  }
}

}  // namespace semtest
