#include "pcle/image.hpp"

#include <algorithm>
#include <string>

#include "pcle/error.hpp"

namespace pcle {

CartesianImage::CartesianImage(int w, int h, double fill, bool masked)
    : width(w),
      height(h),
      values(static_cast<std::size_t>(w) * h, fill),
      mask(static_cast<std::size_t>(w) * h, masked ? 1 : 0) {
  if (w < 0 || h < 0) throw ConfigError("negative image dimensions");
}

std::size_t CartesianImage::masked_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

void CartesianImage::clamp_and_mask() {
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = mask[i] ? std::clamp(values[i], 0.0, 1.0) : 0.0;
  }
}

CartesianImage crop(const CartesianImage& img, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || w < 0 || h < 0 || x0 + w > img.width || y0 + h > img.height)
    throw ConfigError("crop window " + std::to_string(w) + "x" + std::to_string(h) + " at (" + std::to_string(x0) +
                      "," + std::to_string(y0) + ") exceeds " + std::to_string(img.width) + "x" +
                      std::to_string(img.height) + " image");
  CartesianImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out.at(x, y) = img.at(x0 + x, y0 + y);
      out.mask[out.index(x, y)] = img.mask[img.index(x0 + x, y0 + y)];
    }
  }
  return out;
}

CartesianImage center_crop(const CartesianImage& img, int side) {
  return crop(img, (img.width - side) / 2, (img.height - side) / 2, side, side);
}

CartesianImage trim(const CartesianImage& img, int margin) {
  return crop(img, margin, margin, img.width - 2 * margin, img.height - 2 * margin);
}

int largest_centered_square_in_mask(const CartesianImage& img) {
  const int limit = std::min(img.width, img.height);
  int best = 0;
  for (int side = 2; side <= limit; side += 2) {
    const int x0 = (img.width - side) / 2;
    const int y0 = (img.height - side) / 2;
    bool inside = true;
    for (int y = y0; y < y0 + side && inside; ++y)
      for (int x = x0; x < x0 + side; ++x)
        if (!img.in_mask(x, y)) {
          inside = false;
          break;
        }
    if (!inside) break;
    best = side;
  }
  return best;
}

std::vector<std::uint8_t> mask_intersection(const CartesianImage& a, const CartesianImage& b) {
  if (a.width != b.width || a.height != b.height) throw ConfigError("image shapes differ");
  std::vector<std::uint8_t> m(a.mask.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = (a.mask[i] && b.mask[i]) ? 1 : 0;
  return m;
}

}  // namespace pcle
