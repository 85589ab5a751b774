#pragma once

#include <cstdint>
#include <string_view>

#include "pcle/geometry.hpp"
#include "pcle/image.hpp"
#include "pcle/reconstruct.hpp"

namespace pcle {

/// pCLE noise model. Each call draws per-frame offsets c_add, c_mult from
/// U[-jitter_half_width, +jitter_half_width]; per fibre (or pixel)
///   out = s * (1 + m) + a,   a ~ N(0, sigma_add + c_add),  m ~ N(0, sigma_mult + c_mult)
/// with the effective sigmas clamped at 0.
struct NoiseParams {
  double sigma_add = 0.03;
  double sigma_mult = 0.05;
  double jitter_half_width = 0.025;
  bool enabled = true;

  void validate() const;

  static NoiseParams off();
  /// Settings used for the synthetic experiments.
  static NoiseParams synthetic();
  /// Clinical-video settings, an order of magnitude stronger.
  static NoiseParams original_data();
  /// "off" | "synthetic" | "original"
  static NoiseParams preset(std::string_view name);
};

struct FrameSigmas {
  double add = 0.0;
  double mult = 0.0;
};

/// Per-frame effective sigmas for a given seed (the first two draws of apply_noise).
FrameSigmas draw_frame_sigmas(const NoiseParams& params, std::uint64_t seed);

enum class KernelKind { voronoi, bicubic };

std::string_view kernel_name(KernelKind k);
KernelKind parse_kernel(std::string_view name);

struct DegradeConfig {
  KernelKind kernel = KernelKind::voronoi;
  int bicubic_scale = 3;
  NoiseParams noise;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Mean of the masked pseudo-HR pixels in each fibre's Voronoi cell; fibres
/// whose cell holds no masked pixel fall back to a bilinear sample.
FibreSignals voronoi_vectorise(const CartesianImage& pseudo_hr, const FibrePattern& lr_pattern);

/// Identity (bit-exact) when params.enabled is false.
FibreSignals apply_noise(const FibreSignals& signals, const NoiseParams& params, std::uint64_t rng_seed);

/// Precomputed Voronoi downscaling kernel for one grid size: the source
/// pattern fitted to the grid, its Voronoi partition and its triangulation.
/// Images are pure inputs, so one kernel serves every frame, augmentation and
/// noise draw on that grid.
class VoronoiKernel {
 public:
  VoronoiKernel(const FibrePattern& source_pattern, int grid_w, int grid_h);

  FibreSignals vectorise(const CartesianImage& pseudo_hr) const;
  /// vectorise -> optional noise -> reconstruct, clamped, masked to the
  /// reconstruction hull intersected with the input mask.
  CartesianImage apply(const CartesianImage& pseudo_hr, const NoiseParams& noise, std::uint64_t seed) const;

  const FibrePattern& lr_pattern() const { return lr_pattern_; }
  const VoronoiLabelMap& labels() const { return labels_; }
  const Reconstructor& reconstructor() const { return recon_; }

 private:
  FibrePattern lr_pattern_;
  VoronoiLabelMap labels_;
  Reconstructor recon_;
};

CartesianImage downscale_voronoi(const CartesianImage& pseudo_hr, const FibrePattern& source_pattern,
                                 const DegradeConfig& config);

/// Separable Catmull-Rom (a = -0.5) resampling. With antialias set and a
/// shrinking axis, the kernel is widened by the scale factor.
CartesianImage resize_bicubic(const CartesianImage& img, int out_w, int out_h, bool antialias);

/// Anti-aliased bicubic downscale by config.bicubic_scale, optional pixel-wise
/// noise on the small image, bicubic upscale back to the input size.
CartesianImage downscale_bicubic(const CartesianImage& pseudo_hr, const DegradeConfig& config);

/// Dispatches on config.kernel. `source_pattern` is ignored for bicubic.
CartesianImage degrade(const CartesianImage& hr, const FibrePattern& source_pattern, const DegradeConfig& config);

struct SimulatedFrame {
  CartesianImage pcle;  // synthetic pCLE reconstruction
  CartesianImage hr;    // source masked to the reconstruction FoV
};

/// Synthetic pCLE frame: Voronoi vectorisation of the source, noise on the
/// fibre signals, Delaunay reconstruction on the source grid.
SimulatedFrame simulate_pcle(const CartesianImage& hr_source, const FibrePattern& pattern, const NoiseParams& noise,
                             std::uint64_t seed);

}  // namespace pcle
