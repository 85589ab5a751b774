#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "pcle/geometry.hpp"
#include "pcle/image.hpp"

namespace pcle {

/// One intensity per fibre, aligned index-for-index with a FibrePattern.
struct FibreSignals {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool operator==(const FibreSignals&) const = default;
};

/// Bilinear sample of the image at each fibre's continuous position, clamped
/// to the image bounds.
FibreSignals sample_at_fibres(const CartesianImage& image, const FibrePattern& pattern);

double sample_bilinear(const CartesianImage& image, double x, double y);

enum class Clamp { yes, no };

/// Delaunay linear interpolation of fibre signals onto a fixed grid. The
/// triangulation and per-pixel barycentric weights are computed once, so the
/// same object can reconstruct many signal vectors (frames, noise draws).
class Reconstructor {
 public:
  Reconstructor(const FibrePattern& pattern, int grid_w, int grid_h);

  CartesianImage operator()(const FibreSignals& signals, Clamp clamp = Clamp::yes) const;

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t fibre_count() const { return fibre_count_; }
  const DelaunayMesh& mesh() const { return mesh_; }
  /// 1 where a pixel centre lies inside the convex hull of the fibres.
  const std::vector<std::uint8_t>& coverage() const { return coverage_; }

 private:
  struct PixelWeights {
    std::array<int, 3> fibre;
    std::array<double, 3> weight;
  };
  int width_;
  int height_;
  std::size_t fibre_count_;
  DelaunayMesh mesh_;
  std::vector<std::uint8_t> coverage_;
  std::vector<PixelWeights> weights_;  // meaningful only where coverage_ is set
};

/// Gold-standard reconstruction: masked to the convex hull, clamped to [0, 1]
/// unless Clamp::no is requested.
CartesianImage reconstruct(const FibreSignals& signals, const FibrePattern& pattern, int grid_w, int grid_h,
                           Clamp clamp = Clamp::yes);

struct PseudoHr {
  CartesianImage image;
  FibrePattern pattern;  // fibre coordinates divided by the linear factor
};

/// Samples the input at the fibres and reconstructs those signals on a grid
/// `linear_factor` times smaller per dimension. Throws ConfigError when the
/// result would be smaller than 16 x 16.
PseudoHr make_pseudo_hr(const CartesianImage& input, const FibrePattern& pattern, int linear_factor = 2);

}  // namespace pcle
