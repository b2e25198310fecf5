#include "semtest/synthdata.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "semtest/error.hpp"
#include "semtest/image.hpp"
#include "semtest/models.hpp"
#include "semtest/random.hpp"

namespace semtest {

namespace {

constexpr double kRangeSlack = 1e-9;

struct Point {
  double x;
  double y;
};

// Signed distance to a convex polygon given counter-clockwise in screen
// coordinates, positive inside. Outside corners are approximated by the
// nearest edge line, which is enough for a one-pixel ramp.
double polygon_distance(const Point* v, std::size_t n, Point p) {
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = v[i], b = v[(i + 1) % n];
    const double ex = b.x - a.x, ey = b.y - a.y;
    const double len = std::hypot(ex, ey);
    // Inward normal for a clockwise-on-screen (y down) vertex order.
    const double nx = -ey / len, ny = ex / len;
    d = std::min(d, nx * (p.x - a.x) + ny * (p.y - a.y));
  }
  return d;
}

double signed_distance(std::size_t class_id, double cx, double cy, double s, Point p) {
  switch (class_id) {
    case 0:
      return std::min(s / 2 - std::abs(p.x - cx), s / 2 - std::abs(p.y - cy));
    case 1:
      return s / 2 - std::hypot(p.x - cx, p.y - cy);
    case 2: {
      // Apex up; centroid at (cx, cy).
      const Point v[] = {{cx, cy - 2 * s / 3}, {cx + s / 2, cy + s / 3}, {cx - s / 2, cy + s / 3}};
      return polygon_distance(v, 3, p);
    }
    case 3:
      return (s / 2 - std::abs(p.x - cx) - std::abs(p.y - cy)) / std::numbers::sqrt2;
    default:
      throw InvalidArgument("unknown shape class " + std::to_string(class_id));
  }
}

Rgb background_rgb(double hue) { return hsv_to_rgb({hue, kBackgroundSaturation, kBackgroundValue}); }
Rgb object_rgb(double hue) { return hsv_to_rgb({hue, kObjectSaturation, kObjectValue}); }

void check_range(const char* field, double v, double lo, double hi, bool half_open) {
  const bool ok = half_open ? (v >= lo && v < hi) : (v >= lo - kRangeSlack && v <= hi + kRangeSlack);
  if (!ok || !std::isfinite(v)) {
    throw InvalidArgument(std::string("scene parameter ") + field + " = " + std::to_string(v) + " outside [" +
                          std::to_string(lo) + ", " + std::to_string(hi) + (half_open ? ")" : "]"));
  }
}

// Modal hue: 50 bins of width 0.02, then the circular mean of the hues in the
// modal bin and its two neighbours.
double modal_hue(const std::vector<double>& hues) {
  constexpr std::size_t kBins = 50;
  if (hues.empty()) return 0.0;
  std::array<std::size_t, kBins> counts{};
  for (double h : hues) counts[std::min(kBins - 1, static_cast<std::size_t>(wrap_hue(h) * kBins))]++;
  const std::size_t mode = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  const double center = (static_cast<double>(mode) + 0.5) / kBins;
  double sx = 0.0, sy = 0.0;
  for (double h : hues) {
    if (hue_distance(h, center) <= 1.5 / kBins) {
      sx += std::cos(2 * std::numbers::pi * h);
      sy += std::sin(2 * std::numbers::pi * h);
    }
  }
  return wrap_hue(std::atan2(sy, sx) / (2 * std::numbers::pi));
}

}  // namespace

void validate(const SceneParams& p) {
  if (p.class_id >= kShapeCount) throw InvalidArgument("scene class_id " + std::to_string(p.class_id) + " out of range");
  check_range("background_hue", p.background_hue, 0.0, 1.0, true);
  check_range("object_hue", p.object_hue, 0.0, 1.0, true);
  check_range("cx", p.cx, kCenterMin, kCenterMax, false);
  check_range("cy", p.cy, kCenterMin, kCenterMax, false);
  check_range("size", p.size, kSizeMin, kSizeMax, false);
  if (hue_distance(p.background_hue, p.object_hue) < kMinHueSeparation - kRangeSlack) {
    throw InvalidArgument("object hue within " + std::to_string(kMinHueSeparation) + " of background hue");
  }
}

const char* shape_name(std::size_t class_id) {
  static constexpr const char* kNames[] = {"square", "disc", "triangle", "diamond"};
  return class_id < kShapeCount ? kNames[class_id] : "unknown";
}

double shape_area_factor(std::size_t class_id) {
  switch (class_id) {
    case 0: return 1.0;
    case 1: return std::numbers::pi / 4;
    case 2: return 0.5;
    case 3: return 0.5;
    default: throw InvalidArgument("unknown shape class " + std::to_string(class_id));
  }
}

Tensor shape_coverage(std::size_t class_id, double cx, double cy, double size) {
  const double n = static_cast<double>(kImageSize);
  Tensor alpha({kImageSize, kImageSize});
  for (std::size_t r = 0; r < kImageSize; ++r) {
    for (std::size_t c = 0; c < kImageSize; ++c) {
      const Point p{static_cast<double>(c) + 0.5, static_cast<double>(r) + 0.5};
      const double d = signed_distance(class_id, cx * n, cy * n, size * n, p);
      alpha[r * kImageSize + c] = std::clamp(d + 0.5, 0.0, 1.0);
    }
  }
  return alpha;
}

Tensor render(const SceneParams& params) {
  validate(params);
  const Tensor alpha = shape_coverage(params.class_id, params.cx, params.cy, params.size);
  const Rgb bg = background_rgb(params.background_hue);
  const Rgb fg = object_rgb(params.object_hue);
  Tensor image(semtest::image_shape());
  const std::size_t plane = kImageSize * kImageSize;
  for (std::size_t i = 0; i < plane; ++i) {
    const double a = alpha[i];
    image[i] = (1 - a) * bg.r + a * fg.r;
    image[plane + i] = (1 - a) * bg.g + a * fg.g;
    image[2 * plane + i] = (1 - a) * bg.b + a * fg.b;
  }
  return image;
}

FeatureEstimate extract_features(const Tensor& image, std::size_t classes) {
  if (image.shape() != semtest::image_shape()) {
    throw ShapeError("extract_features", shape_string(image.shape()), shape_string(semtest::image_shape()));
  }
  constexpr double kMinSaturation = 0.05;
  const std::size_t n = kImageSize;
  std::vector<Hsv> hsv(n * n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) hsv[r * n + c] = rgb_to_hsv(pixel_at(image, r, c));
  }

  FeatureEstimate est;
  std::vector<double> border;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      if (r != 0 && r != n - 1 && c != 0 && c != n - 1) continue;
      if (hsv[r * n + c].s >= kMinSaturation) border.push_back(hsv[r * n + c].h);
    }
  }
  est.background_confident = border.size() >= kMinObjectPixels;
  est.params.background_hue = modal_hue(border);

  std::vector<double> object_hues;
  for (std::size_t i = 0; i < n * n; ++i) {
    if (hsv[i].s >= kMinSaturation && hue_distance(hsv[i].h, est.params.background_hue) >= kObjectHueThreshold) {
      object_hues.push_back(hsv[i].h);
    }
  }
  est.object_pixels = object_hues.size();
  est.object_confident = est.background_confident && est.object_pixels >= kMinObjectPixels;
  est.params.object_hue =
      object_hues.empty() ? wrap_hue(est.params.background_hue + 0.5) : modal_hue(object_hues);

  // Coverage estimate: project each pixel onto the background->object colour segment.
  const Rgb bg = background_rgb(est.params.background_hue);
  const Rgb fg = object_rgb(est.params.object_hue);
  const double dr = fg.r - bg.r, dg = fg.g - bg.g, db = fg.b - bg.b;
  const double denom = dr * dr + dg * dg + db * db;
  Tensor alpha({n, n});
  double area = 0.0, mx = 0.0, my = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const Rgb p = pixel_at(image, r, c);
      double a = denom > 0 ? ((p.r - bg.r) * dr + (p.g - bg.g) * dg + (p.b - bg.b) * db) / denom : 0.0;
      a = std::clamp(a, 0.0, 1.0);
      if (a < 0.05 || !est.background_confident) a = 0.0;
      alpha[r * n + c] = a;
      area += a;
      mx += a * (static_cast<double>(c) + 0.5);
      my += a * (static_cast<double>(r) + 0.5);
    }
  }
  if (area > 1e-9) {
    est.params.cx = mx / area / static_cast<double>(n);
    est.params.cy = my / area / static_cast<double>(n);
  }
  const double fraction = area / static_cast<double>(n * n);

  // Shape: template with the lowest squared coverage error at the estimated
  // centroid and size.
  double best_error = std::numeric_limits<double>::infinity();
  const std::size_t templates = std::clamp<std::size_t>(classes, 1, kShapeCount);
  for (std::size_t shape = 0; shape < templates; ++shape) {
    const double size = std::sqrt(fraction / shape_area_factor(shape));
    const Tensor tmpl = shape_coverage(shape, est.params.cx, est.params.cy, size);
    double error = 0.0;
    for (std::size_t i = 0; i < n * n; ++i) error += (tmpl[i] - alpha[i]) * (tmpl[i] - alpha[i]);
    if (error < best_error) {
      best_error = error;
      est.params.class_id = shape;
      est.params.size = size;
    }
  }
  return est;
}

std::string_view feature_name(Feature feature) {
  switch (feature) {
    case Feature::BackgroundHue: return "background_hue";
    case Feature::ObjectHue: return "object_hue";
    case Feature::CenterX: return "cx";
    case Feature::CenterY: return "cy";
    case Feature::Size: return "size";
  }
  return "unknown";
}

Feature parse_feature(std::string_view name) {
  for (Feature f : {Feature::BackgroundHue, Feature::ObjectHue, Feature::CenterX, Feature::CenterY, Feature::Size}) {
    if (feature_name(f) == name) return f;
  }
  throw InvalidArgument("unknown feature '" + std::string(name) + "'");
}

double feature_value(const SceneParams& p, Feature feature) {
  switch (feature) {
    case Feature::BackgroundHue: return p.background_hue;
    case Feature::ObjectHue: return p.object_hue;
    case Feature::CenterX: return p.cx;
    case Feature::CenterY: return p.cy;
    case Feature::Size: return p.size;
  }
  return 0.0;
}

bool feature_is_hue(Feature feature) { return feature == Feature::BackgroundHue || feature == Feature::ObjectHue; }

bool feature_extractable(const FeatureEstimate& estimate, Feature feature) {
  return feature == Feature::BackgroundHue ? estimate.background_confident : estimate.object_confident;
}

FeatureRange feature_domain(Feature feature) {
  switch (feature) {
    case Feature::BackgroundHue:
    case Feature::ObjectHue: return {0.0, 1.0};
    case Feature::CenterX:
    case Feature::CenterY: return {kCenterMin, kCenterMax};
    case Feature::Size: return {kSizeMin, kSizeMax};
  }
  return {0.0, 1.0};
}

void BiasSpec::validate(std::size_t classes) const {
  if (class0 == class1) throw InvalidArgument("bias: the two classes must differ");
  if (class0 >= classes || class1 >= classes) throw InvalidArgument("bias: class index out of range");
  const FeatureRange domain = feature_domain(feature);
  for (const FeatureRange& r : {range0, range1}) {
    if (!(r.lo < r.hi) || r.lo < domain.lo || r.hi > domain.hi) {
      throw InvalidArgument("bias: range [" + std::to_string(r.lo) + ", " + std::to_string(r.hi) +
                            "] is empty or outside the domain of " + std::string(feature_name(feature)));
    }
  }
  if (!(range0.hi < range1.lo || range1.hi < range0.lo)) {
    throw InvalidArgument("bias: feature ranges overlap");
  }
  if (feature_is_hue(feature) && range1.hi >= 1.0 && range0.hi >= 1.0) {
    throw InvalidArgument("bias: hue ranges overlap");
  }
}

std::optional<FeatureRange> BiasSpec::range_for(std::size_t class_id) const {
  if (class_id == class0) return range0;
  if (class_id == class1) return range1;
  return std::nullopt;
}

std::optional<FeatureRange> BiasSpec::opposite_range(std::size_t class_id) const {
  if (class_id == class0) return range1;
  if (class_id == class1) return range0;
  return std::nullopt;
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Test: return "test";
    case Split::HoldoutAligned: return "holdout_aligned";
    case Split::HoldoutCounter: return "holdout_counter";
    case Split::UnbiasedTest: return "unbiased_test";
  }
  return "unknown";
}

void LabeledDataset::add(const SceneParams& p) {
  images.push_back(render(p));
  labels.push_back(p.class_id);
  params.push_back(p);
}

SceneParams sample_scene(Rng& rng, std::size_t class_id) {
  SceneParams p;
  p.class_id = class_id;
  p.background_hue = rng.uniform();
  p.object_hue = wrap_hue(p.background_hue + kMinHueSeparation + (1.0 - 2 * kMinHueSeparation) * rng.uniform());
  p.cx = rng.uniform(kCenterMin, kCenterMax);
  p.cy = rng.uniform(kCenterMin, kCenterMax);
  p.size = rng.uniform(kSizeMin, kSizeMax);
  return p;
}

namespace {

void set_feature(SceneParams& p, Feature feature, double value, Rng& rng) {
  switch (feature) {
    case Feature::BackgroundHue:
      p.background_hue = wrap_hue(value);
      p.object_hue = wrap_hue(p.background_hue + kMinHueSeparation + (1.0 - 2 * kMinHueSeparation) * rng.uniform());
      break;
    case Feature::ObjectHue:
      p.object_hue = wrap_hue(value);
      p.background_hue = wrap_hue(p.object_hue + kMinHueSeparation + (1.0 - 2 * kMinHueSeparation) * rng.uniform());
      break;
    case Feature::CenterX: p.cx = value; break;
    case Feature::CenterY: p.cy = value; break;
    case Feature::Size: p.size = value; break;
  }
}

void check_classes(std::size_t classes) {
  if (classes < 2 || classes > kShapeCount) {
    throw InvalidArgument("class count must be in [2, " + std::to_string(kShapeCount) + "]");
  }
}

// Biased classes draw the feature from their assigned range; every other
// class draws it from the full domain.
LabeledDataset biased_split(const BiasSpec& bias, std::size_t classes, std::size_t per_class, bool swapped,
                            bool pair_only, Split split, std::uint64_t seed) {
  Rng rng(seed);
  LabeledDataset data;
  data.split = split;
  data.classes = classes;
  for (std::size_t i = 0; i < per_class; ++i) {
    for (std::size_t c = 0; c < classes; ++c) {
      auto range = swapped ? bias.opposite_range(c) : bias.range_for(c);
      if (pair_only && !range) continue;
      SceneParams p = sample_scene(rng, c);
      const FeatureRange r = range.value_or(feature_domain(bias.feature));
      const double u = rng.uniform();
      set_feature(p, bias.feature, r.lo + r.width() * u, rng);
      data.add(p);
    }
  }
  return data;
}

}  // namespace

LabeledDataset build_unbiased_dataset(std::size_t classes, std::size_t n_per_class, std::uint64_t seed, Split split) {
  check_classes(classes);
  Rng rng(seed);
  LabeledDataset data;
  data.split = split;
  data.classes = classes;
  for (std::size_t i = 0; i < n_per_class; ++i) {
    for (std::size_t c = 0; c < classes; ++c) data.add(sample_scene(rng, c));
  }
  return data;
}

BiasedDatasets build_biased_dataset(const BiasSpec& bias, std::size_t classes, std::size_t n_per_class,
                                    std::uint64_t seed) {
  check_classes(classes);
  bias.validate(classes);
  if (n_per_class < 50) throw InvalidArgument("build_biased_dataset: n_per_class must be >= 50");
  const std::size_t holdout = std::max<std::size_t>(20, n_per_class / 4);

  BiasedDatasets out;
  out.train = biased_split(bias, classes, n_per_class, false, false, Split::Train, derive_seed(seed, "train"));
  out.holdout_aligned =
      biased_split(bias, classes, holdout, false, true, Split::HoldoutAligned, derive_seed(seed, "holdout_aligned"));
  out.holdout_counter =
      biased_split(bias, classes, holdout, true, true, Split::HoldoutCounter, derive_seed(seed, "holdout_counter"));

  // Unbiased test: the biased feature is stratified over its domain within
  // each class (one jittered draw per stratum), so it is uniform and carries
  // no label information.
  Rng rng(derive_seed(seed, "unbiased_test"));
  LabeledDataset& test = out.unbiased_test;
  test.split = Split::UnbiasedTest;
  test.classes = classes;
  const FeatureRange domain = feature_domain(bias.feature);
  std::vector<std::vector<double>> strata(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < n_per_class; ++i) {
      strata[c].push_back(domain.lo + domain.width() * (static_cast<double>(i) + rng.uniform()) /
                                          static_cast<double>(n_per_class));
    }
    rng.shuffle(strata[c].begin(), strata[c].end());
  }
  for (std::size_t i = 0; i < n_per_class; ++i) {
    for (std::size_t c = 0; c < classes; ++c) {
      SceneParams p = sample_scene(rng, c);
      double v = strata[c][i];
      if (!feature_is_hue(bias.feature)) v = std::clamp(v, domain.lo, domain.hi);
      set_feature(p, bias.feature, v, rng);
      test.add(p);
    }
  }
  return out;
}

double feature_label_correlation(const LabeledDataset& data, Feature feature) {
  const double n = static_cast<double>(data.size());
  if (data.size() < 2) return 0.0;
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double x = feature_value(data.params[i], feature);
    const double y = static_cast<double>(data.labels[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
  }
  const double cov = sxy / n - (sx / n) * (sy / n);
  const double vx = sxx / n - (sx / n) * (sx / n);
  const double vy = syy / n - (sy / n) * (sy / n);
  if (vx <= 0 || vy <= 0) return 0.0;
  return cov / std::sqrt(vx * vy);
}

void export_dataset(const LabeledDataset& data, const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  std::ofstream manifest(directory / "manifest.txt", std::ios::binary | std::ios::trunc);
  if (!manifest) throw Error("cannot write " + (directory / "manifest.txt").string());
  for (std::size_t i = 0; i < data.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.ppm", i);
    write_ppm(data.images[i], directory / name);
    const SceneParams& p = data.params[i];
    char line[256];
    std::snprintf(line, sizeof line, "%s %zu %.6f %.6f %.6f %.6f %.6f\n", name, data.labels[i], p.background_hue,
                  p.object_hue, p.cx, p.cy, p.size);
    manifest << line;
  }
}

LabeledDataset import_dataset(const std::filesystem::path& directory, std::size_t classes, Split split) {
  std::ifstream manifest(directory / "manifest.txt");
  if (!manifest) throw Error("cannot read " + (directory / "manifest.txt").string());
  LabeledDataset data;
  data.split = split;
  data.classes = classes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream in(line);
    std::string file;
    SceneParams p;
    if (!(in >> file >> p.class_id >> p.background_hue >> p.object_hue >> p.cx >> p.cy >> p.size)) {
      throw Error("malformed manifest line " + std::to_string(line_no) + " in " + directory.string());
    }
    if (p.class_id >= classes) throw Error("manifest line " + std::to_string(line_no) + ": label out of range");
    data.images.push_back(read_ppm(directory / file));
    data.labels.push_back(p.class_id);
    data.params.push_back(p);
  }
  return data;
}

}  // namespace semtest
