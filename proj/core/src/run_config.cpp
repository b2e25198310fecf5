#include "semtest/run_config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace semtest {

namespace {

struct BadValue {
  std::string message;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw BadValue{"expected a non-negative integer, got '" + v + "'"};
  }
  return out;
}

std::size_t to_size(const std::string& v) { return static_cast<std::size_t>(to_u64(v)); }

double to_double(const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    throw BadValue{"expected a number, got '" + v + "'"};
  }
  if (used != v.size() || !std::isfinite(out)) throw BadValue{"expected a finite number, got '" + v + "'"};
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw BadValue{"expected true or false, got '" + v + "'"};
}

std::vector<std::size_t> to_list(const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(to_size(trim(item)));
  if (out.empty()) throw BadValue{"expected a comma-separated list of integers"};
  return out;
}

std::string from_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string from_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

template <typename E>
E wrap_parse(E (*parse)(std::string_view), const std::string& v) {
  try {
    return parse(v);
  } catch (const InvalidArgument& e) {
    throw BadValue{e.what()};
  }
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename T>
Field size_field(std::string key, T RunConfig::*member) {
  return {std::move(key), [member](const RunConfig& c) { return std::to_string(c.*member); },
          [member](RunConfig& c, const std::string& v) { c.*member = static_cast<T>(to_u64(v)); }};
}

Field double_field(std::string key, double RunConfig::*member) {
  return {std::move(key), [member](const RunConfig& c) { return from_double(c.*member); },
          [member](RunConfig& c, const std::string& v) { c.*member = to_double(v); }};
}

void add_train_fields(std::vector<Field>& fields, const std::string& prefix, TrainConfig RunConfig::*member) {
  fields.push_back({prefix + ".lr", [=](const RunConfig& c) { return from_double((c.*member).learning_rate); },
                    [=](RunConfig& c, const std::string& v) { (c.*member).learning_rate = to_double(v); }});
  fields.push_back({prefix + ".momentum", [=](const RunConfig& c) { return from_double((c.*member).momentum); },
                    [=](RunConfig& c, const std::string& v) { (c.*member).momentum = to_double(v); }});
  fields.push_back({prefix + ".batch_size", [=](const RunConfig& c) { return std::to_string((c.*member).batch_size); },
                    [=](RunConfig& c, const std::string& v) { (c.*member).batch_size = to_size(v); }});
  fields.push_back({prefix + ".epochs", [=](const RunConfig& c) { return std::to_string((c.*member).epochs); },
                    [=](RunConfig& c, const std::string& v) { (c.*member).epochs = to_size(v); }});
  fields.push_back({prefix + ".optimizer",
                    [=](const RunConfig& c) { return std::string(optimizer_name((c.*member).optimizer)); },
                    [=](RunConfig& c, const std::string& v) { (c.*member).optimizer = wrap_parse(parse_optimizer, v); }});
  fields.push_back({prefix + ".loss", [=](const RunConfig& c) { return std::string(loss_name((c.*member).loss)); },
                    [=](RunConfig& c, const std::string& v) { (c.*member).loss = wrap_parse(parse_loss, v); }});
  fields.push_back({prefix + ".samples_per_epoch",
                    [=](const RunConfig& c) { return std::to_string((c.*member).samples_per_epoch); },
                    [=](RunConfig& c, const std::string& v) { (c.*member).samples_per_epoch = to_size(v); }});
}

void add_attack_fields(std::vector<Field>& fields, const std::string& prefix, AttackConfig RunConfig::*member) {
  fields.push_back({prefix + ".norm", [=](const RunConfig& c) { return std::string(norm_name((c.*member).norm)); },
                    [=](RunConfig& c, const std::string& v) { (c.*member).norm = wrap_parse(parse_norm, v); }});
  fields.push_back({prefix + ".epsilon", [=](const RunConfig& c) { return from_double((c.*member).epsilon); },
                    [=](RunConfig& c, const std::string& v) { (c.*member).epsilon = to_double(v); }});
  fields.push_back({prefix + ".step_size", [=](const RunConfig& c) { return from_double((c.*member).step_size); },
                    [=](RunConfig& c, const std::string& v) { (c.*member).step_size = to_double(v); }});
  fields.push_back({prefix + ".steps", [=](const RunConfig& c) { return std::to_string((c.*member).steps); },
                    [=](RunConfig& c, const std::string& v) { (c.*member).steps = to_size(v); }});
  fields.push_back({prefix + ".random_start",
                    [=](const RunConfig& c) { return std::string((c.*member).random_start ? "true" : "false"); },
                    [=](RunConfig& c, const std::string& v) { (c.*member).random_start = to_bool(v); }});
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(size_field("seed", &RunConfig::seed));
    f.push_back({"io.output_dir", [](const RunConfig& c) { return c.output_dir.generic_string(); },
                 [](RunConfig& c, const std::string& v) {
                   if (v.empty()) throw BadValue{"empty path"};
                   c.output_dir = v;
                 }});
    f.push_back(size_field("dataset.classes", &RunConfig::classes));
    f.push_back(size_field("dataset.n_per_class", &RunConfig::n_per_class));
    f.push_back({"dataset.bias.feature", [](const RunConfig& c) { return std::string(feature_name(c.bias.feature)); },
                 [](RunConfig& c, const std::string& v) { c.bias.feature = wrap_parse(parse_feature, v); }});
    f.push_back({"dataset.bias.class0", [](const RunConfig& c) { return std::to_string(c.bias.class0); },
                 [](RunConfig& c, const std::string& v) { c.bias.class0 = to_size(v); }});
    f.push_back({"dataset.bias.class1", [](const RunConfig& c) { return std::to_string(c.bias.class1); },
                 [](RunConfig& c, const std::string& v) { c.bias.class1 = to_size(v); }});
    f.push_back({"dataset.bias.range0_lo", [](const RunConfig& c) { return from_double(c.bias.range0.lo); },
                 [](RunConfig& c, const std::string& v) { c.bias.range0.lo = to_double(v); }});
    f.push_back({"dataset.bias.range0_hi", [](const RunConfig& c) { return from_double(c.bias.range0.hi); },
                 [](RunConfig& c, const std::string& v) { c.bias.range0.hi = to_double(v); }});
    f.push_back({"dataset.bias.range1_lo", [](const RunConfig& c) { return from_double(c.bias.range1.lo); },
                 [](RunConfig& c, const std::string& v) { c.bias.range1.lo = to_double(v); }});
    f.push_back({"dataset.bias.range1_hi", [](const RunConfig& c) { return from_double(c.bias.range1.hi); },
                 [](RunConfig& c, const std::string& v) { c.bias.range1.hi = to_double(v); }});

    f.push_back({"generator.mode", [](const RunConfig& c) { return std::string(generator_mode_name(c.generator_mode)); },
                 [](RunConfig& c, const std::string& v) {
                   if (v == "distilled") c.generator_mode = GeneratorMode::Distilled;
                   else if (v == "cgan") c.generator_mode = GeneratorMode::Cgan;
                   else throw BadValue{"expected distilled or cgan, got '" + v + "'"};
                 }});
    f.push_back({"generator.latent_dim", [](const RunConfig& c) { return std::to_string(c.generator.latent_dim); },
                 [](RunConfig& c, const std::string& v) { c.generator.latent_dim = to_size(v); }});
    f.push_back({"generator.hidden", [](const RunConfig& c) { return from_list(c.generator.hidden); },
                 [](RunConfig& c, const std::string& v) { c.generator.hidden = to_list(v); }});
    add_train_fields(f, "generator.train", &RunConfig::generator_train);
    f.push_back(size_field("generator.gan.warmup_steps", &RunConfig::gan_warmup_steps));
    f.push_back(double_field("generator.gan.label_weight", &RunConfig::gan_label_weight));

    f.push_back({"classifier.hidden", [](const RunConfig& c) { return from_list(c.classifier.hidden); },
                 [](RunConfig& c, const std::string& v) { c.classifier.hidden = to_list(v); }});
    add_train_fields(f, "classifier.train", &RunConfig::classifier_train);

    add_train_fields(f, "adv.train", &RunConfig::adv_train);
    add_attack_fields(f, "adv.attack", &RunConfig::adv_attack);

    f.push_back({"testgen.epsilon", [](const RunConfig& c) { return from_double(c.testgen.epsilon); },
                 [](RunConfig& c, const std::string& v) { c.testgen.epsilon = to_double(v); }});
    f.push_back({"testgen.c", [](const RunConfig& c) { return from_double(c.testgen.c); },
                 [](RunConfig& c, const std::string& v) { c.testgen.c = to_double(v); }});
    f.push_back({"testgen.mode", [](const RunConfig& c) { return std::string(mode_name(c.testgen.mode)); },
                 [](RunConfig& c, const std::string& v) { c.testgen.mode = wrap_parse(parse_mode, v); }});
    f.push_back({"testgen.step_size", [](const RunConfig& c) { return from_double(c.testgen.step_size); },
                 [](RunConfig& c, const std::string& v) { c.testgen.step_size = to_double(v); }});
    f.push_back({"testgen.max_iterations", [](const RunConfig& c) { return std::to_string(c.testgen.max_iterations); },
                 [](RunConfig& c, const std::string& v) { c.testgen.max_iterations = to_size(v); }});
    f.push_back({"testgen.layers", [](const RunConfig& c) { return from_list(c.testgen.layers); },
                 [](RunConfig& c, const std::string& v) { c.testgen.layers = to_list(v); }});
    f.push_back(size_field("testgen.seeds_per_direction", &RunConfig::seeds_per_direction));
    f.push_back(size_field("testgen.resample_limit", &RunConfig::resample_limit));

    add_attack_fields(f, "attack", &RunConfig::attack);

    f.push_back(double_field("analysis.epsilon_l2", &RunConfig::analysis_epsilon_l2));
    f.push_back(double_field("analysis.epsilon_linf", &RunConfig::analysis_epsilon_linf));
    f.push_back(size_field("analysis.samples", &RunConfig::analysis_samples));
    return f;
  }();
  return table;
}

bool ignored_key(const std::string& key) { return key.starts_with("run.") || key.starts_with("result."); }

}  // namespace

RunConfig::RunConfig() {
  generator_train.optimizer = OptimizerKind::Adam;
  generator_train.learning_rate = 1e-3;
  generator_train.batch_size = 32;
  generator_train.epochs = 40;
  generator_train.samples_per_epoch = 2048;
  generator_train.loss = LossKind::MeanSquared;

  classifier_train.epochs = 3;
  classifier_train.loss = LossKind::MeanSquared;

  adv_train.epochs = 15;
  adv_attack = AttackConfig::with_budget(Norm::Linf, kDefaultLinfEpsilon, 7);

  attack = AttackConfig::with_budget(Norm::Linf, kDefaultLinfEpsilon, 40);
}

std::string_view generator_mode_name(GeneratorMode mode) {
  return mode == GeneratorMode::Cgan ? "cgan" : "distilled";
}

RunConfig RunConfig::parse(std::string_view text, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string_view raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') {
      if (end == text.size()) break;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("", line_no, "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError("", line_no, "line " + std::to_string(line_no) + ": empty key");
    if (!seen.insert(key).second) {
      throw ConfigError(key, line_no, "line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    if (ignored_key(key)) continue;
    const Field* field = nullptr;
    for (const Field& f : fields()) {
      if (f.key == key) field = &f;
    }
    if (!field) throw ConfigError(key, line_no, "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    try {
      field->set(cfg, value);
    } catch (const BadValue& e) {
      throw ConfigError(key, line_no, "line " + std::to_string(line_no) + ": invalid value for '" + key + "': " +
                                          e.message);
    }
    if (end == text.size()) break;
  }
  if (cfg.output_dir.is_relative()) cfg.output_dir = (base_dir / cfg.output_dir).lexically_normal();
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", 0, "cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::filesystem::path base = std::filesystem::absolute(path).parent_path();
  return parse(buffer.str(), base);
}

void RunConfig::validate() const {
  auto check = [](bool ok, const char* key, const std::string& message) {
    if (!ok) throw ConfigError(key, 0, std::string("invalid value for '") + key + "': " + message);
  };
  check(classes >= 2 && classes <= kShapeCount, "dataset.classes", "must be in [2, 4]");
  check(n_per_class >= 50, "dataset.n_per_class", "must be >= 50");
  try {
    bias.validate(classes);
  } catch (const InvalidArgument& e) {
    throw ConfigError("dataset.bias", 0, std::string("invalid bias: ") + e.what());
  }
  check(generator.latent_dim >= 5, "generator.latent_dim", "must be >= 5");
  auto train_ok = [&](const TrainConfig& t, const std::string& prefix) {
    try {
      t.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(prefix, 0, "invalid " + prefix + " settings: " + e.what());
    }
  };
  train_ok(generator_train, "generator.train");
  train_ok(classifier_train, "classifier.train");
  train_ok(adv_train, "adv.train");
  check(adv_attack.epsilon >= 0 && adv_attack.step_size >= 0, "adv.attack.epsilon", "must be >= 0");
  check(attack.epsilon >= 0 && attack.step_size >= 0, "attack.epsilon", "must be >= 0");
  check(testgen.epsilon >= 0, "testgen.epsilon", "must be >= 0 (0 selects the default)");
  check(testgen.c >= 0, "testgen.c", "must be >= 0");
  check(testgen.step_size > 0, "testgen.step_size", "must be > 0");
  check(!testgen.layers.empty(), "testgen.layers", "must not be empty");
  for (std::size_t l : testgen.layers) {
    check(l <= generator.hidden.size() + 1, "testgen.layers", "layer index exceeds the generator depth");
  }
  check(seeds_per_direction >= 1, "testgen.seeds_per_direction", "must be >= 1");
  check(analysis_epsilon_l2 > 0, "analysis.epsilon_l2", "must be > 0");
  check(analysis_epsilon_linf > 0, "analysis.epsilon_linf", "must be > 0");
  check(analysis_samples >= 1, "analysis.samples", "must be >= 1");
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const Field& f : fields()) out += f.key + " = " + f.get(*this) + "\n";
  return out;
}

}  // namespace semtest
