#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "mrstitch/geometry.hpp"

namespace mrstitch {

// RGB triple in floating point, nominal range 0..255.
using Color = std::array<double, 3>;

inline constexpr Color kSentinelColor{0.0, 0.0, 0.0};

double color_distance(const Color& a, const Color& b);

// RGB raster with a validity mask. Pixels whose mask is false always read as
// kSentinelColor; set_invalid() enforces this.
class Image {
 public:
  Image() = default;
  // All pixels start invalid (sentinel color, mask false).
  Image(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  Size size() const { return {width_, height_}; }
  bool empty() const { return width_ == 0 || height_ == 0; }
  bool in_bounds(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  Color at(int x, int y) const {
    const std::size_t i = index(x, y) * 3;
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
  }
  double channel(int x, int y, int c) const { return pixels_[index(x, y) * 3 + c]; }
  bool valid(int x, int y) const { return mask_[index(x, y)] != 0; }

  // Stores a color and marks the pixel valid.
  void set(int x, int y, const Color& c);
  void set_invalid(int x, int y);

  std::size_t valid_count() const;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> pixels_;
  std::vector<std::uint8_t> mask_;
};

// Single-channel floating-point raster.
class Plane {
 public:
  Plane() = default;
  Plane(int width, int height, double fill = 0.0)
      : width_(width), height_(height),
        values_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  double& operator()(int x, int y) { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  double operator()(int x, int y) const {
    return values_[static_cast<std::size_t>(y) * width_ + x];
  }
  const std::vector<double>& values() const { return values_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> values_;
};

// Reads PNG (gray/RGB/RGBA/palette, 8-bit) or binary PPM (P6, maxval 255).
// The returned image has an all-true mask unless `alpha_as_mask` is set and
// the file carries alpha, in which case alpha==0 marks invalid pixels.
Image load_image(const std::filesystem::path& path, bool alpha_as_mask = false);

// Writes an 8-bit PNG, rounding half up. With `mask_as_alpha` an alpha
// channel is written: 255 where valid, 0 where not.
void save_image(const Image& img, const std::filesystem::path& path,
                bool mask_as_alpha = false);

// Writes raw 8-bit rows (RGB or RGBA) as PNG.
void write_png(const std::filesystem::path& path, int width, int height,
               int channels, const std::vector<std::uint8_t>& rows);

// Writes a palette PNG: one byte per pixel indexing `palette`.
void write_indexed_png(const std::filesystem::path& path, int width, int height,
                       const std::vector<std::uint8_t>& indices,
                       const std::vector<std::array<std::uint8_t, 3>>& palette);

std::uint8_t quantize(double v);

Plane to_grayscale(const Image& img);

// Central differences with replicated borders.
Plane gradient_magnitude(const Plane& p);

// Luma gradient magnitude at one pixel where invalid neighbors are treated
// like the image border (replicated from the center). Invalid pixels yield 0.
double masked_gradient_at(const Image& img, int x, int y);
Plane masked_gradient_magnitude(const Image& img);

struct Sample {
  Color color{};
  bool valid = false;
};

// Bilinear interpolation. Coordinates within 1e-6 of an integer are snapped
// so that exact grid hits only depend on the pixel they land on. Valid iff
// every neighbor with nonzero weight is in bounds and valid.
Sample bilinear_sample(const Image& img, double x, double y);

}  // namespace mrstitch
