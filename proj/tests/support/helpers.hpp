#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <unistd.h>

#include "semtest/autodiff.hpp"
#include "semtest/models.hpp"
#include "semtest/random.hpp"
#include "semtest/tensor.hpp"

namespace semtest::testing {

inline Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline Tensor random_image(Rng& rng) { return random_tensor(rng, image_shape(), 0.0, 1.0); }

// Elementwise |a - b| / max(|a|, |b|, floor), maximised over elements.
inline double max_relative_error(const Tensor& analytic, const Tensor& numeric, double floor = 1e-3) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.numel(); ++i) {
    const double a = analytic[i], n = numeric[i];
    const double scale = std::max({std::abs(a), std::abs(n), floor});
    worst = std::max(worst, std::abs(a - n) / scale);
  }
  return worst;
}

// Builds a scalar-valued graph from a single leaf; used for gradient checks.
using GraphFunction = std::function<ad::Var(ad::Graph&, ad::Var)>;

inline Tensor analytic_gradient(const GraphFunction& fn, const Tensor& point) {
  ad::Graph g;
  const ad::Var x = g.leaf(point);
  const ad::Var y = fn(g, x);
  return g.backward(y, {x})[0];
}

inline Tensor numeric_gradient(const GraphFunction& fn, const Tensor& point, double step = 1e-5) {
  return ad::finite_difference_gradient(
      [&](const Tensor& p) {
        ad::Graph g;
        return fn(g, g.leaf(p)).value().item();
      },
      point, step);
}

inline double gradient_error(const GraphFunction& fn, const Tensor& point) {
  return max_relative_error(analytic_gradient(fn, point), numeric_gradient(fn, point));
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("semtest-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline GeneratorSpec small_generator_spec(std::size_t classes = 2) {
  GeneratorSpec spec;
  spec.latent_dim = 10;
  spec.classes = classes;
  spec.hidden = {12, 16, 24};
  return spec;
}

inline ClassifierSpec small_classifier_spec(std::size_t classes = 2) {
  ClassifierSpec spec;
  spec.hidden = {16, 8};
  spec.classes = classes;
  return spec;
}

}  // namespace semtest::testing
