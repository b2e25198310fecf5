#pragma once

// Aggregations over generated tests. Every report is a pure function of the
// per-test records, so it can be recomputed from the exported TSV/record files.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "semtest/models.hpp"
#include "semtest/synthdata.hpp"
#include "semtest/testgen.hpp"

namespace semtest {

inline constexpr std::size_t kHistogramBins = 32;

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> counts;

  /// Bin of a value; the top edge belongs to the last bin.
  std::size_t bin(double value) const;
  std::size_t total() const;
};

/// kHistogramBins uniform bins spanning [min, max] of the values.
Histogram make_histogram(const std::vector<double>& values, std::size_t bins = kHistogramBins);

struct NormDistances {
  std::vector<double> distances;  // sorted ascending
  Histogram histogram;
  double reference_epsilon = 0.0;
  /// Fraction of distances strictly greater than the reference epsilon.
  double exceed_fraction = 0.0;
  double median = 0.0;
};

struct DistanceReport {
  std::size_t tests = 0;
  NormDistances l2;
  NormDistances linf;
};

DistanceReport distance_distribution(const std::vector<TestCase>& tests, double epsilon_l2, double epsilon_linf);

struct FaultDetectionReport {
  TestMethod method = TestMethod::Semantic;
  std::size_t y0 = 0;
  std::size_t y1 = 0;
  Feature feature = Feature::BackgroundHue;
  std::size_t tests = 0;
  /// Successful tests on which the oracle could measure the feature.
  std::size_t successes = 0;
  /// Successful tests excluded because the oracle was not confident.
  std::size_t excluded = 0;
  std::size_t flips = 0;
  double rate = 0.0;
};

/// Whether the seed's feature lies in y0's range and the test's in the opposite one.
bool is_feature_flip(const FeatureEstimate& seed, const FeatureEstimate& test, const BiasSpec& bias, std::size_t y0);

/// All tests must share one (y0, y1) direction and method, with y0 one of the
/// bias classes.
FaultDetectionReport fault_detection_rate(const std::vector<TestCase>& tests, const BiasSpec& bias,
                                          std::size_t classes);

struct TransferCell {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 0.0;
};

struct TransferReport {
  std::vector<std::string> models;
  std::vector<std::string> methods;
  /// (model, method) -> cell; cells without successful tests are absent.
  std::map<std::pair<std::string, std::string>, TransferCell> cells;

  std::optional<TransferCell> cell(const std::string& model, const std::string& method) const;
};

struct NamedClassifier {
  std::string name;
  const ClassifierModel* model;
};

/// cell(model, method) = fraction of the method's successful tests that the
/// model classifies as their seed class y0.
TransferReport transfer_matrix(const std::map<std::string, std::vector<TestCase>>& tests_by_source,
                               const std::vector<NamedClassifier>& models);

/// Successful tests only, in input order.
std::vector<TestCase> successes(const std::vector<TestCase>& tests);

struct GeneratorQuality {
  std::size_t samples = 0;
  /// Per-pixel-channel mean squared error against the rendered scene.
  double mse = 0.0;
  /// Fraction of latent pairs (z, z + delta * d_hue) whose oracle background
  /// hue increases, measured circularly.
  double monotone_fraction = 0.0;
  /// Fraction of generated images whose oracle shape equals the requested class.
  double class_accuracy = 0.0;
};

inline constexpr double kTraversalStep = 1.0;

/// Signed circular difference b - a in (-0.5, 0.5].
double hue_delta(double a, double b);

GeneratorQuality evaluate_generator(const GeneratorModel& g, std::size_t samples, std::uint64_t seed);

void write_distance_csv(const DistanceReport& report, const std::filesystem::path& histogram_path,
                        const std::filesystem::path& summary_path);
void write_fault_detection_csv(const std::vector<FaultDetectionReport>& reports, const std::filesystem::path& path);
void write_transfer_csv(const TransferReport& report, const std::filesystem::path& path);

}  // namespace semtest
