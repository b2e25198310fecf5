#pragma once

// Procedural 3x16x16 scenes: one flat-coloured shape on a flat background.
//
// The shape identifies the class; background hue, object hue, position and
// size are nuisance features. Because the renderer's parameters are the
// ground truth, extract_features() can recover them from any image and act as
// the labelling oracle for generated tests.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "semtest/tensor.hpp"

namespace semtest {

inline constexpr std::size_t kShapeCount = 4;  // square, disc, triangle, diamond

inline constexpr double kMinHueSeparation = 0.15;
inline constexpr double kObjectHueThreshold = 0.08;
inline constexpr std::size_t kMinObjectPixels = 8;

inline constexpr double kCenterMin = 0.2;
inline constexpr double kCenterMax = 0.8;
inline constexpr double kSizeMin = 0.15;
inline constexpr double kSizeMax = 0.35;

inline constexpr double kBackgroundSaturation = 0.55;
inline constexpr double kBackgroundValue = 0.9;
inline constexpr double kObjectSaturation = 0.9;
inline constexpr double kObjectValue = 0.7;

struct SceneParams {
  std::size_t class_id = 0;
  double background_hue = 0.0;
  double object_hue = 0.5;
  double cx = 0.5;
  double cy = 0.5;
  /// Side (square), diameter (disc), base and height (triangle) or diagonal
  /// (diamond), as a fraction of the image width.
  double size = 0.25;
};

void validate(const SceneParams& params);

const char* shape_name(std::size_t class_id);
/// Shape area divided by size^2.
double shape_area_factor(std::size_t class_id);

/// Per-pixel coverage of the shape in [0, 1], shape [16, 16], with a
/// one-pixel linear ramp across the boundary.
Tensor shape_coverage(std::size_t class_id, double cx, double cy, double size);

Tensor render(const SceneParams& params);

struct FeatureEstimate {
  SceneParams params;  // class_id is the best-matching shape template
  std::size_t object_pixels = 0;
  bool background_confident = false;
  bool object_confident = false;

  bool confident() const noexcept { return background_confident && object_confident; }
};

/// Feature oracle. Shape templates are restricted to class ids < classes.
FeatureEstimate extract_features(const Tensor& image, std::size_t classes = kShapeCount);

enum class Feature { BackgroundHue, ObjectHue, CenterX, CenterY, Size };

std::string_view feature_name(Feature feature);
Feature parse_feature(std::string_view name);
double feature_value(const SceneParams& params, Feature feature);
bool feature_is_hue(Feature feature);
/// Whether the oracle can measure this feature on the given estimate.
bool feature_extractable(const FeatureEstimate& estimate, Feature feature);

struct FeatureRange {
  double lo = 0.0;
  double hi = 1.0;

  bool contains(double v) const noexcept { return v >= lo && v <= hi; }
  double width() const noexcept { return hi - lo; }
};

/// Admissible range of a feature over all scenes.
FeatureRange feature_domain(Feature feature);

/// Assigns disjoint ranges of one nuisance feature to two classes.
struct BiasSpec {
  std::size_t class0 = 0;
  std::size_t class1 = 1;
  Feature feature = Feature::BackgroundHue;
  FeatureRange range0{0.10, 0.40};
  FeatureRange range1{0.50, 0.80};

  void validate(std::size_t classes) const;
  /// Range assigned to class0 or class1; nullopt for other classes.
  std::optional<FeatureRange> range_for(std::size_t class_id) const;
  std::optional<FeatureRange> opposite_range(std::size_t class_id) const;
};

enum class Split { Train, Test, HoldoutAligned, HoldoutCounter, UnbiasedTest };

std::string_view split_name(Split split);

struct LabeledDataset {
  Split split = Split::Train;
  std::size_t classes = 2;
  std::vector<Tensor> images;
  std::vector<std::size_t> labels;
  std::vector<SceneParams> params;

  std::size_t size() const noexcept { return images.size(); }
  bool empty() const noexcept { return images.empty(); }
  void add(const SceneParams& p);
};

struct BiasedDatasets {
  LabeledDataset train;
  LabeledDataset holdout_aligned;
  LabeledDataset holdout_counter;
  LabeledDataset unbiased_test;
};

/// Holdout sets hold max(20, n_per_class / 4) images of each biased class;
/// the unbiased test set holds n_per_class images of every class.
BiasedDatasets build_biased_dataset(const BiasSpec& bias, std::size_t classes, std::size_t n_per_class,
                                    std::uint64_t seed);

/// Every feature sampled uniformly, independent of the label.
LabeledDataset build_unbiased_dataset(std::size_t classes, std::size_t n_per_class, std::uint64_t seed,
                                      Split split = Split::Train);

/// Scene of the given class with every nuisance feature uniform.
class Rng;
SceneParams sample_scene(Rng& rng, std::size_t class_id);

/// Pearson correlation between the feature and the label over a dataset.
double feature_label_correlation(const LabeledDataset& data, Feature feature);

/// PPM images plus manifest.txt, one line per image:
/// `<file> <label> <background_hue> <object_hue> <cx> <cy> <size>`.
void export_dataset(const LabeledDataset& data, const std::filesystem::path& directory);
LabeledDataset import_dataset(const std::filesystem::path& directory, std::size_t classes, Split split);

}  // namespace semtest
