#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pcle/image.hpp"

namespace pcle {

/// PSNR reported for identical images (MSE = 0).
inline constexpr double kPsnrCap = 100.0;

// Every metric works on the intersection of both images' masks (peak value 1)
// and throws ConfigError when the shapes differ or the mask is empty.

/// 10 log10(1 / MSE), capped at kPsnrCap.
double psnr(const CartesianImage& reference, const CartesianImage& prediction);

/// Mean local SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// population statistics, averaged over windows lying entirely inside the mask.
double ssim(const CartesianImage& reference, const CartesianImage& prediction);

/// Standard deviation of the gradient-magnitude similarity map. Gradients use
/// 3x3 Prewitt kernels scaled by 1/3, c = 0.0026, over pixels whose 3x3
/// neighbourhood lies inside the mask; no downsampling.
double gmsd(const CartesianImage& reference, const CartesianImage& prediction);

/// Masked mean absolute difference.
double l1_metric(const CartesianImage& reference, const CartesianImage& prediction);

struct FrameMetrics {
  std::string name;
  bool valid = true;       // false: excluded from the aggregate
  std::string note;        // reason when invalid
  std::size_t mask_pixels = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  double gmsd = 0.0;
  double l1 = 0.0;
  std::optional<double> perceptual;  // builtin-extractor distance, when requested
};

/// All metrics for one pair; shape or mask problems yield an invalid row.
FrameMetrics evaluate_frame(const std::string& name, const CartesianImage& reference,
                            const CartesianImage& prediction, bool with_perceptual = false);

struct MetricSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (0 for a single frame)
};

struct MetricReport {
  std::vector<FrameMetrics> frames;

  MetricSummary summary(double FrameMetrics::*field) const;
  std::size_t valid_count() const;
  /// name,valid,mask_pixels,psnr,ssim,gmsd,l1[,perceptual_builtin],note
  std::string to_csv() const;
  /// {"frames": n, "valid": k, "psnr": {"mean":..,"std":..}, ...}
  std::string summary_json() const;
};

}  // namespace pcle
