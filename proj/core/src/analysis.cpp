#include "semtest/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "semtest/error.hpp"
#include "semtest/random.hpp"
#include "semtest/training.hpp"

namespace semtest {

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

NormDistances summarize(std::vector<double> distances, double epsilon) {
  NormDistances n;
  std::sort(distances.begin(), distances.end());
  n.reference_epsilon = epsilon;
  n.histogram = make_histogram(distances);
  const auto above = std::count_if(distances.begin(), distances.end(), [&](double d) { return d > epsilon; });
  n.exceed_fraction = static_cast<double>(above) / static_cast<double>(distances.size());
  const std::size_t m = distances.size();
  n.median = m % 2 == 1 ? distances[m / 2] : 0.5 * (distances[m / 2 - 1] + distances[m / 2]);
  n.distances = std::move(distances);
  return n;
}

}  // namespace

std::size_t Histogram::bin(double value) const {
  const std::size_t n = counts.size();
  if (n == 0) throw InvalidArgument("histogram has no bins");
  if (!(hi > lo)) return 0;
  const double t = (value - lo) / (hi - lo) * static_cast<double>(n);
  if (t <= 0) return 0;
  return std::min(n - 1, static_cast<std::size_t>(t));
}

std::size_t Histogram::total() const {
  std::size_t s = 0;
  for (std::size_t c : counts) s += c;
  return s;
}

Histogram make_histogram(const std::vector<double>& values, std::size_t bins) {
  if (values.empty()) throw InvalidArgument("make_histogram: no values");
  if (bins == 0) throw InvalidArgument("make_histogram: zero bins");
  Histogram h;
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  h.lo = *mn;
  h.hi = *mx;
  h.counts.assign(bins, 0);
  for (double v : values) h.counts[h.bin(v)]++;
  return h;
}

DistanceReport distance_distribution(const std::vector<TestCase>& tests, double epsilon_l2, double epsilon_linf) {
  if (tests.empty()) throw InvalidArgument("distance_distribution: no tests");
  std::vector<double> l2, linf;
  for (const TestCase& t : tests) {
    l2.push_back(t.pixel_l2);
    linf.push_back(t.pixel_linf);
  }
  DistanceReport r;
  r.tests = tests.size();
  r.l2 = summarize(std::move(l2), epsilon_l2);
  r.linf = summarize(std::move(linf), epsilon_linf);
  return r;
}

bool is_feature_flip(const FeatureEstimate& seed, const FeatureEstimate& test, const BiasSpec& bias, std::size_t y0) {
  const auto own = bias.range_for(y0);
  const auto other = bias.opposite_range(y0);
  if (!own || !other) throw InvalidArgument("is_feature_flip: class " + std::to_string(y0) + " is not biased");
  return own->contains(feature_value(seed.params, bias.feature)) &&
         other->contains(feature_value(test.params, bias.feature));
}

FaultDetectionReport fault_detection_rate(const std::vector<TestCase>& tests, const BiasSpec& bias,
                                          std::size_t classes) {
  FaultDetectionReport r;
  r.feature = bias.feature;
  if (!tests.empty()) {
    r.method = tests.front().method;
    r.y0 = tests.front().y0;
    r.y1 = tests.front().y1;
  }
  if (!bias.range_for(r.y0)) throw InvalidArgument("fault_detection_rate: seed class is not one of the bias classes");
  for (const TestCase& t : tests) {
    if (t.y0 != r.y0 || t.y1 != r.y1) throw InvalidArgument("fault_detection_rate: tests mix directions");
    if (t.method != r.method) throw InvalidArgument("fault_detection_rate: tests mix methods");
    ++r.tests;
    if (!t.success()) continue;
    const FeatureEstimate seed = extract_features(t.seed_image, classes);
    const FeatureEstimate test = extract_features(t.test_image, classes);
    if (!feature_extractable(seed, bias.feature) || !feature_extractable(test, bias.feature)) {
      ++r.excluded;
      continue;
    }
    ++r.successes;
    r.flips += is_feature_flip(seed, test, bias, t.y0);
  }
  r.rate = r.successes > 0 ? static_cast<double>(r.flips) / static_cast<double>(r.successes) : 0.0;
  return r;
}

std::optional<TransferCell> TransferReport::cell(const std::string& model, const std::string& method) const {
  auto it = cells.find({model, method});
  if (it == cells.end()) return std::nullopt;
  return it->second;
}

TransferReport transfer_matrix(const std::map<std::string, std::vector<TestCase>>& tests_by_source,
                               const std::vector<NamedClassifier>& models) {
  TransferReport report;
  for (const auto& [method, tests] : tests_by_source) report.methods.push_back(method);
  for (const NamedClassifier& m : models) {
    if (!m.model) throw InvalidArgument("transfer_matrix: null model '" + m.name + "'");
    report.models.push_back(m.name);
    for (const auto& [method, tests] : tests_by_source) {
      std::vector<Tensor> images;
      std::vector<std::size_t> labels;
      for (const TestCase& t : tests) {
        if (!t.success()) continue;
        images.push_back(t.test_image);
        labels.push_back(t.y0);
      }
      if (images.empty()) continue;
      const auto predictions = m.model->predict_batch(images);
      TransferCell cell;
      cell.total = images.size();
      for (std::size_t i = 0; i < predictions.size(); ++i) cell.correct += predictions[i].predicted == labels[i];
      cell.accuracy = static_cast<double>(cell.correct) / static_cast<double>(cell.total);
      report.cells[{m.name, method}] = cell;
    }
  }
  return report;
}

std::vector<TestCase> successes(const std::vector<TestCase>& tests) {
  std::vector<TestCase> out;
  for (const TestCase& t : tests) {
    if (t.success()) out.push_back(t);
  }
  return out;
}

double hue_delta(double a, double b) {
  double d = b - a;
  while (d > 0.5) d -= 1.0;
  while (d <= -0.5) d += 1.0;
  return d;
}

GeneratorQuality evaluate_generator(const GeneratorModel& g, std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw InvalidArgument("evaluate_generator: no samples");
  const LatentEmbedding embedding(g.latent_dim());
  const Tensor step = embedding.direction(Feature::BackgroundHue);
  GeneratorQuality q;
  q.samples = samples;
  q.mse = distillation_error(g, samples, derive_seed(seed, "mse"));

  Rng rng(derive_seed(seed, "traversal"));
  std::size_t monotone = 0, correct = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const Tensor z = sample_seed_latent(g.latent_dim(), rng.next_u64());
    const std::size_t y = rng.below(g.classes());
    Tensor moved = z;
    for (std::size_t j = 0; j < z.numel(); ++j) moved[j] += kTraversalStep * step[j];
    const FeatureEstimate a = extract_features(g.forward(z, y).image, g.classes());
    const FeatureEstimate b = extract_features(g.forward(moved, y).image, g.classes());
    monotone += hue_delta(a.params.background_hue, b.params.background_hue) > 0;
    correct += a.params.class_id == y;
  }
  q.monotone_fraction = static_cast<double>(monotone) / static_cast<double>(samples);
  q.class_accuracy = static_cast<double>(correct) / static_cast<double>(samples);
  return q;
}

void write_distance_csv(const DistanceReport& report, const std::filesystem::path& histogram_path,
                        const std::filesystem::path& summary_path) {
  auto hist = open_csv(histogram_path);
  hist << "norm,bin,lo,hi,count\n";
  auto rows = [&](const char* name, const NormDistances& n) {
    const Histogram& h = n.histogram;
    const double width = (h.hi - h.lo) / static_cast<double>(h.counts.size());
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      hist << name << ',' << b << ',' << fixed6(h.lo + width * static_cast<double>(b)) << ','
           << fixed6(b + 1 == h.counts.size() ? h.hi : h.lo + width * static_cast<double>(b + 1)) << ','
           << h.counts[b] << '\n';
    }
  };
  rows("l2", report.l2);
  rows("linf", report.linf);

  auto summary = open_csv(summary_path);
  summary << "norm,tests,reference_epsilon,exceed_fraction,median,min,max\n";
  for (const auto& [name, n] : {std::pair<const char*, const NormDistances*>{"l2", &report.l2}, {"linf", &report.linf}}) {
    summary << name << ',' << report.tests << ',' << fixed6(n->reference_epsilon) << ','
            << fixed6(n->exceed_fraction) << ',' << fixed6(n->median) << ',' << fixed6(n->histogram.lo) << ','
            << fixed6(n->histogram.hi) << '\n';
  }
}

void write_fault_detection_csv(const std::vector<FaultDetectionReport>& reports, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "method,y0,y1,feature,tests,successes,excluded,flips,rate\n";
  for (const FaultDetectionReport& r : reports) {
    out << method_name(r.method) << ',' << r.y0 << ',' << r.y1 << ',' << feature_name(r.feature) << ',' << r.tests << ',' << r.successes << ','
        << r.excluded << ',' << r.flips << ',' << fixed6(r.rate) << '\n';
  }
}

void write_transfer_csv(const TransferReport& report, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "model,method,correct,total,accuracy\n";
  for (const std::string& model : report.models) {
    for (const std::string& method : report.methods) {
      if (auto c = report.cell(model, method)) {
        out << model << ',' << method << ',' << c->correct << ',' << c->total << ',' << fixed6(c->accuracy) << '\n';
      }
    }
  }
}

}  // namespace semtest
