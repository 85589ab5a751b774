#include "pcle/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pcle/error.hpp"

namespace pcle {

double sample_bilinear(const CartesianImage& image, double x, double y) {
  const double u = std::clamp(x - 0.5, 0.0, static_cast<double>(image.width - 1));
  const double v = std::clamp(y - 0.5, 0.0, static_cast<double>(image.height - 1));
  const int x0 = std::min(static_cast<int>(std::floor(u)), image.width - 1);
  const int y0 = std::min(static_cast<int>(std::floor(v)), image.height - 1);
  const int x1 = std::min(x0 + 1, image.width - 1);
  const int y1 = std::min(y0 + 1, image.height - 1);
  const double fx = u - x0;
  const double fy = v - y0;
  const double top = image.at(x0, y0) * (1.0 - fx) + image.at(x1, y0) * fx;
  const double bottom = image.at(x0, y1) * (1.0 - fx) + image.at(x1, y1) * fx;
  return top * (1.0 - fy) + bottom * fy;
}

FibreSignals sample_at_fibres(const CartesianImage& image, const FibrePattern& pattern) {
  if (image.width <= 0 || image.height <= 0) throw ConfigError("cannot sample an empty image");
  FibreSignals s;
  s.values.reserve(pattern.size());
  for (const Point& f : pattern.fibres) s.values.push_back(sample_bilinear(image, f.x, f.y));
  return s;
}

Reconstructor::Reconstructor(const FibrePattern& pattern, int grid_w, int grid_h)
    : width_(grid_w), height_(grid_h), fibre_count_(pattern.size()), mesh_(delaunay(pattern)) {
  if (grid_w <= 0 || grid_h <= 0) throw ConfigError("grid dimensions must be positive");
  const std::vector<int> owner = rasterize_mesh(mesh_, pattern, grid_w, grid_h);
  coverage_.assign(owner.size(), 0);
  weights_.resize(owner.size());
  for (int y = 0; y < grid_h; ++y) {
    for (int x = 0; x < grid_w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * grid_w + x;
      const int t = owner[i];
      if (t < 0) continue;
      coverage_[i] = 1;
      const BarycentricPlane& pl = mesh_.planes[static_cast<std::size_t>(t)];
      PixelWeights& pw = weights_[i];
      pw.fibre = mesh_.triangles[static_cast<std::size_t>(t)].v;
      for (int k = 0; k < 3; ++k) pw.weight[k] = pl.a[k] * (x + 0.5) + pl.b[k] * (y + 0.5) + pl.c[k];
    }
  }
}

CartesianImage Reconstructor::operator()(const FibreSignals& signals, Clamp clamp) const {
  if (signals.size() != fibre_count_)
    throw ConfigError("signal count " + std::to_string(signals.size()) + " does not match fibre count " +
                      std::to_string(fibre_count_));
  for (double v : signals.values)
    if (!std::isfinite(v)) throw NumericError("non-finite fibre signal");
  CartesianImage out(width_, height_, 0.0, false);
  for (std::size_t i = 0; i < coverage_.size(); ++i) {
    if (!coverage_[i]) continue;
    const PixelWeights& pw = weights_[i];
    out.values[i] = pw.weight[0] * signals.values[pw.fibre[0]] + pw.weight[1] * signals.values[pw.fibre[1]] +
                    pw.weight[2] * signals.values[pw.fibre[2]];
    out.mask[i] = 1;
  }
  if (clamp == Clamp::yes) out.clamp_and_mask();
  return out;
}

CartesianImage reconstruct(const FibreSignals& signals, const FibrePattern& pattern, int grid_w, int grid_h,
                           Clamp clamp) {
  return Reconstructor(pattern, grid_w, grid_h)(signals, clamp);
}

PseudoHr make_pseudo_hr(const CartesianImage& input, const FibrePattern& pattern, int linear_factor) {
  if (linear_factor < 1) throw ConfigError("linear factor must be at least 1");
  const int w = input.width / linear_factor;
  const int h = input.height / linear_factor;
  if (w < 16 || h < 16)
    throw ConfigError("pseudo-HR grid " + std::to_string(w) + "x" + std::to_string(h) + " is smaller than 16x16");
  const FibreSignals signals = sample_at_fibres(input, pattern);
  PseudoHr out;
  out.pattern = scale_pattern(pattern, 1.0 / linear_factor);
  out.pattern.width = w;
  out.pattern.height = h;
  out.image = reconstruct(signals, out.pattern, w, h);
  return out;
}

}  // namespace pcle
