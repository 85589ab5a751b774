#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace pcle {

/// Masked grayscale raster. Pixel (x, y) has its centre at (x + 0.5, y + 0.5)
/// in continuous pixel coordinates. Values are float64 so intermediate math
/// stays unclamped; clamp_and_mask() is applied where an image is materialised.
struct CartesianImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> mask;

  CartesianImage() = default;
  CartesianImage(int w, int h, double fill = 0.0, bool masked = true);

  std::size_t size() const { return values.size(); }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  double& at(int x, int y) { return values[index(x, y)]; }
  double at(int x, int y) const { return values[index(x, y)]; }
  bool in_mask(int x, int y) const { return mask[index(x, y)] != 0; }

  std::size_t masked_count() const;
  bool is_square() const { return width == height; }

  /// Clamps masked values to [0, 1] and zeroes everything outside the mask.
  void clamp_and_mask();

  bool operator==(const CartesianImage&) const = default;
};

/// Copies the w x h window starting at (x0, y0); the window must lie inside the image.
CartesianImage crop(const CartesianImage& img, int x0, int y0, int w, int h);

/// Central side x side crop; side must not exceed either dimension.
CartesianImage center_crop(const CartesianImage& img, int side);

/// Removes `margin` pixels from every border.
CartesianImage trim(const CartesianImage& img, int margin);

/// Largest even side s such that the centred s x s square lies entirely inside the mask
/// (0 when none exists).
int largest_centered_square_in_mask(const CartesianImage& img);

/// Element-wise intersection of two masks of equal size.
std::vector<std::uint8_t> mask_intersection(const CartesianImage& a, const CartesianImage& b);

}  // namespace pcle
