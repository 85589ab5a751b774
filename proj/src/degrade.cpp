#include "pcle/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "pcle/error.hpp"
#include "pcle/rng.hpp"

namespace pcle {

void NoiseParams::validate() const {
  if (!(sigma_add >= 0) || !(sigma_mult >= 0) || !(jitter_half_width >= 0))
    throw ConfigError("noise parameters must be non-negative");
}

NoiseParams NoiseParams::off() {
  NoiseParams p;
  p.enabled = false;
  return p;
}

NoiseParams NoiseParams::synthetic() { return NoiseParams{}; }

NoiseParams NoiseParams::original_data() {
  NoiseParams p;
  p.sigma_add = 0.1;
  p.sigma_mult = 0.5;
  return p;
}

NoiseParams NoiseParams::preset(std::string_view name) {
  if (name == "off") return off();
  if (name == "synthetic") return synthetic();
  if (name == "original") return original_data();
  throw ConfigError("unknown noise preset '" + std::string(name) + "'");
}

namespace {

struct NoiseSampler {
  Rng rng;
  FrameSigmas sigmas;

  NoiseSampler(const NoiseParams& params, std::uint64_t seed) : rng(seed) {
    const double j = params.jitter_half_width;
    double c_add = 0.0, c_mult = 0.0;
    if (j > 0) {
      std::uniform_real_distribution<double> u(-j, j);
      c_add = u(rng);
      c_mult = u(rng);
    }
    sigmas.add = std::max(0.0, params.sigma_add + c_add);
    sigmas.mult = std::max(0.0, params.sigma_mult + c_mult);
  }

  double gaussian(double sigma) {
    if (sigma <= 0.0) return 0.0;
    return std::normal_distribution<double>(0.0, sigma)(rng);
  }

  double apply(double s) {
    const double a = gaussian(sigmas.add);
    const double m = gaussian(sigmas.mult);
    return s * (1.0 + m) + a;
  }
};

}  // namespace

FrameSigmas draw_frame_sigmas(const NoiseParams& params, std::uint64_t seed) {
  return NoiseSampler(params, seed).sigmas;
}

std::string_view kernel_name(KernelKind k) { return k == KernelKind::voronoi ? "voronoi" : "bicubic"; }

KernelKind parse_kernel(std::string_view name) {
  if (name == "voronoi") return KernelKind::voronoi;
  if (name == "bicubic") return KernelKind::bicubic;
  throw ConfigError("unknown kernel '" + std::string(name) + "' (expected voronoi or bicubic)");
}

void DegradeConfig::validate() const {
  noise.validate();
  if (kernel == KernelKind::bicubic && bicubic_scale < 2) throw ConfigError("bicubic scale must be at least 2");
}

FibreSignals apply_noise(const FibreSignals& signals, const NoiseParams& params, std::uint64_t rng_seed) {
  if (!params.enabled) return signals;
  params.validate();
  NoiseSampler sampler(params, rng_seed);
  FibreSignals out;
  out.values.reserve(signals.size());
  for (double s : signals.values) out.values.push_back(sampler.apply(s));
  return out;
}

// ---------------------------------------------------------------------------
// Voronoi kernel

namespace {

FibreSignals cell_means(const CartesianImage& img, const VoronoiLabelMap& labels, const FibrePattern& pattern) {
  if (img.width != labels.width || img.height != labels.height) throw ConfigError("label map does not match image size");
  std::vector<double> sum(pattern.size(), 0.0);
  std::vector<std::size_t> count(pattern.size(), 0);
  for (std::size_t i = 0; i < img.values.size(); ++i) {
    const int l = labels.labels[i];
    if (l < 0 || !img.mask[i]) continue;
    sum[static_cast<std::size_t>(l)] += img.values[i];
    ++count[static_cast<std::size_t>(l)];
  }
  FibreSignals out;
  out.values.resize(pattern.size());
  for (std::size_t f = 0; f < pattern.size(); ++f) {
    out.values[f] = count[f] > 0 ? sum[f] / static_cast<double>(count[f])
                                 : sample_bilinear(img, pattern.fibres[f].x, pattern.fibres[f].y);
  }
  return out;
}

}  // namespace

FibreSignals voronoi_vectorise(const CartesianImage& pseudo_hr, const FibrePattern& lr_pattern) {
  const VoronoiLabelMap labels =
      voronoi_labels(lr_pattern, pseudo_hr.width, pseudo_hr.height, LabelRegion::full_rectangle);
  return cell_means(pseudo_hr, labels, lr_pattern);
}

VoronoiKernel::VoronoiKernel(const FibrePattern& source_pattern, int grid_w, int grid_h)
    : lr_pattern_(fit_pattern_to_grid(source_pattern, grid_w, grid_h)),
      labels_(voronoi_labels(lr_pattern_, grid_w, grid_h, LabelRegion::full_rectangle)),
      recon_(lr_pattern_, grid_w, grid_h) {}

FibreSignals VoronoiKernel::vectorise(const CartesianImage& pseudo_hr) const {
  return cell_means(pseudo_hr, labels_, lr_pattern_);
}

CartesianImage VoronoiKernel::apply(const CartesianImage& pseudo_hr, const NoiseParams& noise,
                                    std::uint64_t seed) const {
  FibreSignals signals = vectorise(pseudo_hr);
  if (noise.enabled) signals = apply_noise(signals, noise, seed);
  CartesianImage out = recon_(signals, Clamp::no);
  for (std::size_t i = 0; i < out.mask.size(); ++i) out.mask[i] = out.mask[i] && pseudo_hr.mask[i];
  out.clamp_and_mask();
  return out;
}

CartesianImage downscale_voronoi(const CartesianImage& pseudo_hr, const FibrePattern& source_pattern,
                                 const DegradeConfig& config) {
  if (config.kernel != KernelKind::voronoi) throw ConfigError("downscale_voronoi requires the voronoi kernel");
  config.validate();
  return VoronoiKernel(source_pattern, pseudo_hr.width, pseudo_hr.height).apply(pseudo_hr, config.noise, config.seed);
}

// ---------------------------------------------------------------------------
// bicubic

namespace {

double catmull_rom(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

struct Taps {
  std::vector<int> first;   // per output sample
  std::vector<int> count;
  std::vector<int> index;   // flattened source indices (clamped)
  std::vector<double> weight;
};

Taps make_taps(int n_in, int n_out, bool antialias) {
  const double scale = static_cast<double>(n_in) / n_out;
  const double widen = (antialias && scale > 1.0) ? scale : 1.0;
  const double radius = 2.0 * widen;
  Taps t;
  for (int i = 0; i < n_out; ++i) {
    const double center = (i + 0.5) * scale - 0.5;
    const int lo = static_cast<int>(std::ceil(center - radius));
    const int hi = static_cast<int>(std::floor(center + radius));
    t.first.push_back(static_cast<int>(t.index.size()));
    double total = 0.0;
    const std::size_t start = t.weight.size();
    for (int j = lo; j <= hi; ++j) {
      const double w = catmull_rom((j - center) / widen);
      if (w == 0.0) continue;
      t.index.push_back(std::clamp(j, 0, n_in - 1));
      t.weight.push_back(w);
      total += w;
    }
    for (std::size_t k = start; k < t.weight.size(); ++k) t.weight[k] /= total;
    t.count.push_back(static_cast<int>(t.weight.size() - start));
  }
  return t;
}

}  // namespace

CartesianImage resize_bicubic(const CartesianImage& img, int out_w, int out_h, bool antialias) {
  if (out_w <= 0 || out_h <= 0) throw ConfigError("resize target must be positive");
  const Taps tx = make_taps(img.width, out_w, antialias);
  const Taps ty = make_taps(img.height, out_h, antialias);
  std::vector<double> rows(static_cast<std::size_t>(out_w) * img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (int k = 0; k < tx.count[x]; ++k) {
        const int idx = tx.first[x] + k;
        acc += tx.weight[idx] * img.at(tx.index[idx], y);
      }
      rows[static_cast<std::size_t>(y) * out_w + x] = acc;
    }
  CartesianImage out(out_w, out_h);
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (int k = 0; k < ty.count[y]; ++k) {
        const int idx = ty.first[y] + k;
        acc += ty.weight[idx] * rows[static_cast<std::size_t>(ty.index[idx]) * out_w + x];
      }
      out.at(x, y) = acc;
    }
  return out;
}

CartesianImage downscale_bicubic(const CartesianImage& pseudo_hr, const DegradeConfig& config) {
  if (config.kernel != KernelKind::bicubic) throw ConfigError("downscale_bicubic requires the bicubic kernel");
  config.validate();
  const int s = config.bicubic_scale;
  if (pseudo_hr.width < 4 * s || pseudo_hr.height < 4 * s)
    throw ConfigError("image " + std::to_string(pseudo_hr.width) + "x" + std::to_string(pseudo_hr.height) +
                      " is too small for bicubic scale " + std::to_string(s));
  const int small_w = std::max(1, static_cast<int>(std::lround(static_cast<double>(pseudo_hr.width) / s)));
  const int small_h = std::max(1, static_cast<int>(std::lround(static_cast<double>(pseudo_hr.height) / s)));
  CartesianImage small = resize_bicubic(pseudo_hr, small_w, small_h, true);
  if (config.noise.enabled) {
    NoiseSampler sampler(config.noise, config.seed);
    for (double& v : small.values) v = sampler.apply(v);
  }
  CartesianImage out = resize_bicubic(small, pseudo_hr.width, pseudo_hr.height, false);
  out.mask = pseudo_hr.mask;
  out.clamp_and_mask();
  return out;
}

CartesianImage degrade(const CartesianImage& hr, const FibrePattern& source_pattern, const DegradeConfig& config) {
  return config.kernel == KernelKind::voronoi ? downscale_voronoi(hr, source_pattern, config)
                                              : downscale_bicubic(hr, config);
}

SimulatedFrame simulate_pcle(const CartesianImage& hr_source, const FibrePattern& pattern, const NoiseParams& noise,
                             std::uint64_t seed) {
  const VoronoiLabelMap labels =
      voronoi_labels(pattern, hr_source.width, hr_source.height, LabelRegion::full_rectangle);
  FibreSignals signals = cell_means(hr_source, labels, pattern);
  if (noise.enabled) signals = apply_noise(signals, noise, seed);
  SimulatedFrame out;
  out.pcle = reconstruct(signals, pattern, hr_source.width, hr_source.height);
  out.hr = hr_source;
  for (std::size_t i = 0; i < out.hr.mask.size(); ++i) out.hr.mask[i] = out.pcle.mask[i] && hr_source.mask[i];
  out.hr.clamp_and_mask();
  for (std::size_t i = 0; i < out.pcle.mask.size(); ++i) out.pcle.mask[i] = out.hr.mask[i];
  out.pcle.clamp_and_mask();
  return out;
}

}  // namespace pcle
