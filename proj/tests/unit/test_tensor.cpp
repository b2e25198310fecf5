#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "semtest/error.hpp"
#include "semtest/tensor.hpp"

using semtest::Shape;
using semtest::Tensor;

TEST(Tensor, ElementCountMatchesShape) {
  const Tensor t(Shape{2, 3, 4}, 1.5);
  EXPECT_EQ(t.numel(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  for (double v : t.data()) EXPECT_EQ(v, 1.5);
}

TEST(Tensor, RejectsZeroDimensionAndEmptyShape) {
  EXPECT_THROW(Tensor(Shape{2, 0}), semtest::InvalidArgument);
  EXPECT_THROW(Tensor(Shape{}), semtest::InvalidArgument);
}

TEST(Tensor, RejectsDataOfWrongLength) {
  try {
    Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3});
    FAIL() << "expected a shape error";
  } catch (const semtest::ShapeError& e) {
    EXPECT_EQ(e.lhs_shape(), "[2,2]");
  }
}

TEST(Tensor, ReshapeKeepsDataAndChecksCount) {
  const Tensor t(Shape{2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  const Tensor r = t.reshaped({3, 2});
  EXPECT_EQ(r.values(), t.values());
  EXPECT_THROW(t.reshaped({4, 2}), semtest::ShapeError);
}

TEST(Tensor, ItemRequiresSingleElement) {
  EXPECT_EQ(Tensor::scalar(4.0).item(), 4.0);
  EXPECT_THROW(Tensor::vector({1, 2}).item(), semtest::ShapeError);
}

TEST(Tensor, Norms) {
  const Tensor t = Tensor::vector({3, -4});
  EXPECT_DOUBLE_EQ(semtest::l2_norm(t), 5.0);
  EXPECT_DOUBLE_EQ(semtest::linf_norm(t), 4.0);
}

TEST(Tensor, DifferenceRequiresMatchingShapes) {
  const Tensor a = Tensor::vector({1, 2});
  EXPECT_EQ(semtest::difference(a, Tensor::vector({0.5, 4})).values(), (std::vector<double>{0.5, -2}));
  EXPECT_THROW(semtest::difference(a, Tensor::vector({1, 2, 3})), semtest::ShapeError);
}

TEST(Tensor, BitwiseEqualityDistinguishesSignedZero) {
  EXPECT_FALSE(semtest::bitwise_equal(Tensor::vector({0.0}), Tensor::vector({-0.0})));
  EXPECT_TRUE(semtest::bitwise_equal(Tensor::vector({1.25}), Tensor::vector({1.25})));
}

TEST(Tensor, AllFinite) {
  EXPECT_TRUE(semtest::all_finite(Tensor::vector({1, 2})));
  EXPECT_FALSE(semtest::all_finite(Tensor::vector({1, std::numeric_limits<double>::infinity()})));
  EXPECT_FALSE(semtest::all_finite(Tensor::vector({std::nan("")})));
}
