#pragma once

#include <filesystem>

#include "pcle/image.hpp"

namespace pcle {

/// Reads an 8- or 16-bit grayscale PNG (palette/RGB inputs are converted to
/// luminance by libpng). Values are divided by the bit-depth maximum; the mask
/// is all-true.
CartesianImage read_png(const std::filesystem::path& path);

/// Writes the clamped values; pixels outside the mask are written as 0.
void write_png(const std::filesystem::path& path, const CartesianImage& img, int bit_depth = 16);

/// Writes the mask as an 8-bit image with 255 for masked pixels.
void write_mask_png(const std::filesystem::path& path, const CartesianImage& img);

/// Replaces img.mask by the mask stored at `path` (nonzero = inside).
void read_mask_png(const std::filesystem::path& path, CartesianImage& img);

}  // namespace pcle
