#include <gtest/gtest.h>

#include <cmath>

#include "semtest/error.hpp"
#include "semtest/image.hpp"
#include "semtest/random.hpp"
#include "semtest/synthdata.hpp"
#include "helpers.hpp"

using namespace semtest;
using semtest::testing::TempDir;

namespace {

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

SceneParams random_params(Rng& rng) {
  SceneParams p;
  p.class_id = rng.below(kShapeCount);
  p.background_hue = rng.uniform();
  do {
    p.object_hue = rng.uniform();
  } while (hue_distance(p.object_hue, p.background_hue) < kMinHueSeparation);
  p.cx = rng.uniform(kCenterMin, kCenterMax);
  p.cy = rng.uniform(kCenterMin, kCenterMax);
  p.size = rng.uniform(kSizeMin, kSizeMax);
  return p;
}

}  // namespace

TEST(Render, Deterministic) {
  Rng rng(41);
  for (int i = 0; i < 20; ++i) {
    const SceneParams p = random_params(rng);
    EXPECT_TRUE(bitwise_equal(render(p), render(p)));
  }
}

TEST(Render, ValuesInUnitRangeAndFlatBackground) {
  SceneParams p;
  p.background_hue = 0.6;
  p.object_hue = 0.1;
  const Tensor img = render(p);
  EXPECT_EQ(img.shape(), image_shape());
  for (double v : img.data()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  const Rgb corner = pixel_at(img, 0, 0);
  const Rgb expected = hsv_to_rgb({0.6, kBackgroundSaturation, kBackgroundValue});
  EXPECT_DOUBLE_EQ(corner.r, expected.r);
  EXPECT_DOUBLE_EQ(corner.g, expected.g);
  EXPECT_DOUBLE_EQ(corner.b, expected.b);
}

TEST(Render, CenteredSquareArea) {
  // Pixel count of a centred square of relative side 0.35 versus its analytic area.
  const Tensor alpha = shape_coverage(0, 0.5, 0.5, 0.35);
  double covered = 0;
  for (double a : alpha.data()) covered += a;
  const double fraction = covered / 256.0;
  EXPECT_NEAR(fraction, 0.35 * 0.35, 0.01);
  EXPECT_DOUBLE_EQ(shape_area_factor(0), 1.0);
  EXPECT_NEAR(shape_area_factor(1), M_PI / 4.0, 1e-12);
}

TEST(Render, CoverageMatchesAreaFactor) {
  for (std::size_t s = 0; s < kShapeCount; ++s) {
    const Tensor alpha = shape_coverage(s, 0.5, 0.5, 0.3);
    double covered = 0;
    for (double a : alpha.data()) covered += a;
    EXPECT_NEAR(covered / 256.0, shape_area_factor(s) * 0.09, 0.012) << shape_name(s);
  }
}

TEST(Render, RejectsInvalidParams) {
  SceneParams p;
  p.size = 0.5;
  EXPECT_THROW(render(p), InvalidArgument);
  p = SceneParams{};
  p.class_id = kShapeCount;
  EXPECT_THROW(render(p), InvalidArgument);
  p = SceneParams{};
  p.background_hue = 1.0;
  EXPECT_THROW(render(p), InvalidArgument);
}

TEST(Oracle, RecoversRenderedFeatures) {
  Rng rng(42);
  std::size_t confident = 0, shapes_correct = 0;
  for (int i = 0; i < 1000; ++i) {
    const SceneParams p = random_params(rng);
    const FeatureEstimate e = extract_features(render(p));
    EXPECT_TRUE(e.background_confident) << i;
    EXPECT_EQ(e.object_confident, e.object_pixels >= kMinObjectPixels) << i;
    EXPECT_LE(hue_distance(e.params.background_hue, p.background_hue), 0.02) << i;
    EXPECT_LE(std::abs(e.params.cx - p.cx) * 16.0, 1.0) << i;
    EXPECT_LE(std::abs(e.params.cy - p.cy) * 16.0, 1.0) << i;
    if (e.object_confident) {
      ++confident;
      shapes_correct += e.params.class_id == p.class_id;
    }
  }
  EXPECT_GT(confident, 800u);
  EXPECT_GE(static_cast<double>(shapes_correct), 0.98 * static_cast<double>(confident));
}

TEST(Oracle, UniformImageHasOnlyBackground) {
  const Rgb c = hsv_to_rgb({0.3, 0.6, 0.8});
  Tensor img(image_shape());
  for (std::size_t i = 0; i < 256; ++i) {
    img[i] = c.r;
    img[256 + i] = c.g;
    img[512 + i] = c.b;
  }
  const FeatureEstimate e = extract_features(img);
  EXPECT_TRUE(e.background_confident);
  EXPECT_NEAR(hue_distance(e.params.background_hue, 0.3), 0.0, 0.02);
  EXPECT_FALSE(e.object_confident);
  EXPECT_FALSE(feature_extractable(e, Feature::ObjectHue));
  EXPECT_TRUE(feature_extractable(e, Feature::BackgroundHue));
}

TEST(Oracle, BlackImageIsNotConfident) {
  const FeatureEstimate e = extract_features(Tensor(image_shape(), 0.0));
  EXPECT_FALSE(e.background_confident);
  EXPECT_FALSE(e.confident());
  EXPECT_FALSE(feature_extractable(e, Feature::BackgroundHue));
}

TEST(Oracle, RejectsWrongShape) { EXPECT_THROW(extract_features(Tensor(Shape{3, 8, 8})), ShapeError); }

TEST(Features, NamesRoundTrip) {
  for (Feature f : {Feature::BackgroundHue, Feature::ObjectHue, Feature::CenterX, Feature::CenterY, Feature::Size}) {
    EXPECT_EQ(parse_feature(feature_name(f)), f);
  }
  EXPECT_THROW(parse_feature("colour"), InvalidArgument);
}

TEST(Bias, Validation) {
  BiasSpec b;
  EXPECT_NO_THROW(b.validate(2));
  EXPECT_THROW(b.validate(1), InvalidArgument);
  b.range1 = {0.3, 0.6};
  EXPECT_THROW(b.validate(2), InvalidArgument);
  b = BiasSpec{};
  EXPECT_FALSE(b.range_for(2).has_value());
  EXPECT_DOUBLE_EQ(b.opposite_range(0)->lo, b.range1.lo);
}

TEST(Datasets, BiasedSplitsFollowRanges) {
  const BiasSpec bias;
  const BiasedDatasets d = build_biased_dataset(bias, 3, 60, 7);
  EXPECT_EQ(d.train.size(), 180u);
  EXPECT_EQ(d.holdout_aligned.size(), 40u);
  EXPECT_EQ(d.holdout_counter.size(), 40u);
  EXPECT_EQ(d.unbiased_test.size(), 180u);
  for (std::size_t i = 0; i < d.train.size(); ++i) {
    const auto range = bias.range_for(d.train.labels[i]);
    if (range) EXPECT_TRUE(range->contains(d.train.params[i].background_hue));
    EXPECT_TRUE(bitwise_equal(d.train.images[i], render(d.train.params[i])));
  }
  for (std::size_t i = 0; i < d.holdout_aligned.size(); ++i) {
    EXPECT_TRUE(bias.range_for(d.holdout_aligned.labels[i])->contains(d.holdout_aligned.params[i].background_hue));
  }
  for (std::size_t i = 0; i < d.holdout_counter.size(); ++i) {
    EXPECT_TRUE(
        bias.opposite_range(d.holdout_counter.labels[i])->contains(d.holdout_counter.params[i].background_hue));
  }
}

TEST(Datasets, BiasedFeatureSeparatesClasses) {
  const BiasSpec bias;
  const BiasedDatasets d = build_biased_dataset(bias, 2, 250, 8);
  const double threshold = 0.5 * (bias.range0.hi + bias.range1.lo);
  std::size_t separated = 0;
  for (std::size_t i = 0; i < d.train.size(); ++i) {
    const bool high = d.train.params[i].background_hue > threshold;
    separated += high == (d.train.labels[i] == bias.class1);
  }
  EXPECT_EQ(separated, d.train.size());
}

TEST(Datasets, SameSeedSameData) {
  const BiasedDatasets a = build_biased_dataset(BiasSpec{}, 2, 50, 9);
  const BiasedDatasets b = build_biased_dataset(BiasSpec{}, 2, 50, 9);
  ASSERT_EQ(a.train.size(), b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    EXPECT_TRUE(bitwise_equal(a.train.images[i], b.train.images[i]));
    EXPECT_EQ(a.train.labels[i], b.train.labels[i]);
  }
  const BiasedDatasets c = build_biased_dataset(BiasSpec{}, 2, 50, 10);
  EXPECT_FALSE(bitwise_equal(a.train.images[0], c.train.images[0]));
}

TEST(Datasets, UnbiasedFeaturesAreUncorrelated) {
  const LabeledDataset u = build_unbiased_dataset(2, 300, 11);
  ASSERT_EQ(u.size(), 600u);
  for (Feature f : {Feature::BackgroundHue, Feature::ObjectHue, Feature::CenterX, Feature::CenterY, Feature::Size}) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < u.size(); ++i) {
      x.push_back(feature_value(u.params[i], f));
      y.push_back(static_cast<double>(u.labels[i]));
    }
    EXPECT_LT(std::abs(pearson(x, y)), 0.1) << feature_name(f);
    EXPECT_NEAR(feature_label_correlation(u, f), pearson(x, y), 1e-9);
  }
  const BiasedDatasets d = build_biased_dataset(BiasSpec{}, 2, 250, 12);
  EXPECT_LT(std::abs(feature_label_correlation(d.unbiased_test, Feature::BackgroundHue)), 0.1);
  EXPECT_GT(feature_label_correlation(d.train, Feature::BackgroundHue), 0.8);
}

TEST(Datasets, ExportImportRoundTrip) {
  TempDir dir("dataset");
  const LabeledDataset u = build_unbiased_dataset(3, 4, 13);
  export_dataset(u, dir.path());
  const LabeledDataset back = import_dataset(dir.path(), 3, Split::Train);
  ASSERT_EQ(back.size(), u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    EXPECT_EQ(back.labels[i], u.labels[i]);
    EXPECT_NEAR(back.params[i].background_hue, u.params[i].background_hue, 1e-6);
    for (std::size_t j = 0; j < u.images[i].numel(); ++j) EXPECT_NEAR(back.images[i][j], u.images[i][j], 0.5 / 255 + 1e-12);
  }
}
