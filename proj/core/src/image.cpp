#include "semtest/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "semtest/error.hpp"

namespace semtest {

Rgb hsv_to_rgb(const Hsv& hsv) {
  const double h = wrap_hue(hsv.h) * 6.0;
  const double c = hsv.v * hsv.s;
  const double x = c * (1.0 - std::abs(std::fmod(h, 2.0) - 1.0));
  const double m = hsv.v - c;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h)) {
    case 0: r = c; g = x; break;
    case 1: r = x; g = c; break;
    case 2: g = c; b = x; break;
    case 3: g = x; b = c; break;
    case 4: r = x; b = c; break;
    default: r = c; b = x; break;
  }
  return {r + m, g + m, b + m};
}

Hsv rgb_to_hsv(const Rgb& rgb) {
  const double mx = std::max({rgb.r, rgb.g, rgb.b});
  const double mn = std::min({rgb.r, rgb.g, rgb.b});
  const double delta = mx - mn;
  Hsv out;
  out.v = mx;
  out.s = mx > 0.0 ? delta / mx : 0.0;
  if (delta <= 0.0) return out;
  double h;
  if (mx == rgb.r) {
    h = (rgb.g - rgb.b) / delta;
  } else if (mx == rgb.g) {
    h = 2.0 + (rgb.b - rgb.r) / delta;
  } else {
    h = 4.0 + (rgb.r - rgb.g) / delta;
  }
  out.h = wrap_hue(h / 6.0);
  return out;
}

double wrap_hue(double h) {
  double w = h - std::floor(h);
  return w >= 1.0 ? 0.0 : w;
}

double hue_distance(double a, double b) {
  const double d = std::abs(wrap_hue(a) - wrap_hue(b));
  return std::min(d, 1.0 - d);
}

Rgb pixel_at(const Tensor& image, std::size_t row, std::size_t col) {
  const std::size_t h = image.shape()[1], w = image.shape()[2];
  const std::size_t plane = h * w, idx = row * w + col;
  return {image[idx], image[plane + idx], image[2 * plane + idx]};
}

std::uint8_t encode_channel(double v) {
  const double scaled = std::round(255.0 * v);
  return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

namespace {
void require_image(const Tensor& image, const char* where) {
  if (image.rank() != 3 || image.shape()[0] != 3) {
    throw ShapeError(where, shape_string(image.shape()), "[3,H,W]");
  }
}
}  // namespace

std::string encode_ppm(const Tensor& image) {
  require_image(image, "encode_ppm");
  const std::size_t h = image.shape()[1], w = image.shape()[2];
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  const std::size_t plane = h * w;
  out.reserve(out.size() + 3 * plane);
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) out.push_back(static_cast<char>(encode_channel(image[c * plane + i])));
  }
  return out;
}

Tensor decode_ppm(std::string_view bytes) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return std::string(bytes.substr(start, pos - start));
  };
  if (token() != "P6") throw InvalidArgument("decode_ppm: not a binary PPM (P6)");
  const std::size_t w = std::stoul(token());
  const std::size_t h = std::stoul(token());
  if (std::stoul(token()) != 255) throw InvalidArgument("decode_ppm: only maxval 255 is supported");
  ++pos;  // single whitespace before the raster
  const std::size_t plane = w * h;
  if (bytes.size() - std::min(pos, bytes.size()) < 3 * plane) throw InvalidArgument("decode_ppm: truncated raster");
  Tensor image({3, h, w});
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      image[c * plane + i] = static_cast<unsigned char>(bytes[pos + 3 * i + c]) / 255.0;
    }
  }
  return image;
}

void write_ppm(const Tensor& image, const std::filesystem::path& path) {
  const std::string bytes = encode_ppm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Tensor read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_ppm(bytes);
}

Tensor image_grid(std::span<const std::pair<Tensor, Tensor>> pairs) {
  constexpr std::size_t kGutter = 2;
  if (pairs.empty()) throw InvalidArgument("image_grid: no image pairs");
  const Shape& shape = pairs.front().first.shape();
  require_image(pairs.front().first, "image_grid");
  for (const auto& [seed, test] : pairs) {
    if (seed.shape() != shape) throw ShapeError("image_grid", shape_string(shape), shape_string(seed.shape()));
    if (test.shape() != shape) throw ShapeError("image_grid", shape_string(shape), shape_string(test.shape()));
  }
  const std::size_t h = shape[1], w = shape[2];
  const std::size_t out_w = 2 * w + kGutter;
  const std::size_t out_h = pairs.size() * h + (pairs.size() - 1) * kGutter;
  Tensor grid({3, out_h, out_w}, 1.0);
  const std::size_t out_plane = out_h * out_w, plane = h * w;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const std::size_t top = p * (h + kGutter);
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t col = 0; col < w; ++col) {
          grid[c * out_plane + (top + r) * out_w + col] = pairs[p].first[c * plane + r * w + col];
          grid[c * out_plane + (top + r) * out_w + w + kGutter + col] = pairs[p].second[c * plane + r * w + col];
        }
      }
    }
  }
  return grid;
}

void emit_image_grid(std::span<const std::pair<Tensor, Tensor>> pairs, const std::filesystem::path& path) {
  write_ppm(image_grid(pairs), path);
}

}  // namespace semtest
