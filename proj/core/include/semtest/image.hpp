#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "semtest/tensor.hpp"

namespace semtest {

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
};

struct Hsv {
  double h = 0.0;  // [0, 1)
  double s = 0.0;
  double v = 0.0;
};

Rgb hsv_to_rgb(const Hsv& hsv);
Hsv rgb_to_hsv(const Rgb& rgb);

/// Distance between two hues on the unit circle, in [0, 0.5].
double hue_distance(double a, double b);
/// Wraps any real into [0, 1).
double wrap_hue(double h);

/// Pixel (row, col) of a [3, H, W] image.
Rgb pixel_at(const Tensor& image, std::size_t row, std::size_t col);

/// round(255 v), clamped to [0, 255].
std::uint8_t encode_channel(double v);

/// Binary PPM (P6, maxval 255) of a [3, H, W] image in [0, 1].
std::string encode_ppm(const Tensor& image);
Tensor decode_ppm(std::string_view bytes);
void write_ppm(const Tensor& image, const std::filesystem::path& path);
Tensor read_ppm(const std::filesystem::path& path);

/// Rows of [seed | 2 px white gutter | test], stacked with 2 px white gutters.
Tensor image_grid(std::span<const std::pair<Tensor, Tensor>> pairs);
void emit_image_grid(std::span<const std::pair<Tensor, Tensor>> pairs, const std::filesystem::path& path);

}  // namespace semtest
