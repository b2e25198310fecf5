#include "semtest/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "semtest/error.hpp"

namespace semtest {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

namespace {
void validate_shape(const Shape& shape) {
  if (shape.empty()) throw InvalidArgument("tensor shape must have rank >= 1");
  for (std::size_t d : shape) {
    if (d == 0) throw InvalidArgument("tensor shape " + shape_string(shape) + " has a zero dimension");
  }
}
}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  validate_shape(shape_);
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  validate_shape(shape_);
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("tensor", shape_string(shape_), "[" + std::to_string(data_.size()) + " values]");
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item", shape_string(shape_), "[1]");
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) throw ShapeError("reshape", shape_string(shape_), shape_string(shape));
  return Tensor(std::move(shape), data_);
}

double l2_norm(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return std::sqrt(sum);
}

double linf_norm(std::span<const double> values) {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

Tensor difference(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("difference", shape_string(a.shape()), shape_string(b.shape()));
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] - b[i];
  return out;
}

bool all_finite(const Tensor& t) {
  return std::all_of(t.data().begin(), t.data().end(), [](double v) { return std::isfinite(v); });
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(double)) == 0;
}

}  // namespace semtest
