#include "pcle/iqa.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "pcle/error.hpp"
#include "pcle/loss.hpp"

namespace pcle {

namespace {

std::vector<std::uint8_t> joint_mask(const CartesianImage& a, const CartesianImage& b) {
  if (a.width != b.width || a.height != b.height) {
    throw ConfigError("metric inputs differ in size: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                      " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
  }
  std::vector<std::uint8_t> m = mask_intersection(a, b);
  if (std::none_of(m.begin(), m.end(), [](std::uint8_t v) { return v != 0; }))
    throw ConfigError("metric mask is empty");
  return m;
}

// Integral image of the mask for O(1) window-coverage queries.
struct MaskSum {
  int w, h;
  std::vector<int> s;  // (w + 1) x (h + 1)

  MaskSum(const std::vector<std::uint8_t>& m, int w_, int h_)
      : w(w_), h(h_), s(static_cast<std::size_t>(w_ + 1) * (h_ + 1), 0) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        at(x + 1, y + 1) = at(x, y + 1) + at(x + 1, y) - at(x, y) + m[static_cast<std::size_t>(y) * w + x];
  }
  int& at(int x, int y) { return s[static_cast<std::size_t>(y) * (w + 1) + x]; }
  int at(int x, int y) const { return s[static_cast<std::size_t>(y) * (w + 1) + x]; }
  // Masked pixels in the (2r+1)^2 window centred on (x, y); the window must fit the image.
  int window(int x, int y, int r) const {
    return at(x + r + 1, y + r + 1) - at(x - r, y + r + 1) - at(x + r + 1, y - r) + at(x - r, y - r);
  }
};

}  // namespace

double psnr(const CartesianImage& reference, const CartesianImage& prediction) {
  const auto m = joint_mask(reference, prediction);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    const double d = reference.values[i] - prediction.values[i];
    sum += d * d;
    ++n;
  }
  const double mse = sum / static_cast<double>(n);
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

double ssim(const CartesianImage& reference, const CartesianImage& prediction) {
  const auto m = joint_mask(reference, prediction);
  constexpr int r = 5;
  constexpr double sigma = 1.5;
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  const int w = reference.width, h = reference.height;
  if (w < 2 * r + 1 || h < 2 * r + 1) throw ConfigError("ssim needs images of at least 11x11");

  double g[2 * r + 1];
  double gsum = 0.0;
  for (int k = -r; k <= r; ++k) gsum += g[k + r] = std::exp(-0.5 * k * k / (sigma * sigma));
  for (double& v : g) v /= gsum;

  // Horizontal then vertical Gaussian of x, y, x^2, y^2, xy at interior centres.
  const int ow = w - 2 * r;
  std::vector<double> row(static_cast<std::size_t>(ow) * h * 5, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc[5] = {0, 0, 0, 0, 0};
      for (int k = 0; k <= 2 * r; ++k) {
        const double a = reference.at(x + k, y), b = prediction.at(x + k, y);
        acc[0] += g[k] * a;
        acc[1] += g[k] * b;
        acc[2] += g[k] * a * a;
        acc[3] += g[k] * b * b;
        acc[4] += g[k] * a * b;
      }
      std::copy(acc, acc + 5, &row[(static_cast<std::size_t>(y) * ow + x) * 5]);
    }

  const MaskSum ms(m, w, h);
  double total = 0.0;
  std::size_t windows = 0;
  for (int y = r; y < h - r; ++y)
    for (int x = r; x < w - r; ++x) {
      if (ms.window(x, y, r) != (2 * r + 1) * (2 * r + 1)) continue;
      double acc[5] = {0, 0, 0, 0, 0};
      for (int k = 0; k <= 2 * r; ++k) {
        const double* p = &row[(static_cast<std::size_t>(y - r + k) * ow + (x - r)) * 5];
        for (int c = 0; c < 5; ++c) acc[c] += g[k] * p[c];
      }
      const double mu_a = acc[0], mu_b = acc[1];
      const double var_a = acc[2] - mu_a * mu_a;
      const double var_b = acc[3] - mu_b * mu_b;
      const double cov = acc[4] - mu_a * mu_b;
      total += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
      ++windows;
    }
  if (windows == 0) throw ConfigError("ssim: no 11x11 window lies inside the mask");
  return total / static_cast<double>(windows);
}

double gmsd(const CartesianImage& reference, const CartesianImage& prediction) {
  const auto m = joint_mask(reference, prediction);
  constexpr double c = 0.0026;
  const int w = reference.width, h = reference.height;
  if (w < 3 || h < 3) throw ConfigError("gmsd needs images of at least 3x3");
  const MaskSum ms(m, w, h);

  auto magnitude = [](const CartesianImage& img, int x, int y) {
    double gx = 0.0, gy = 0.0;
    for (int k = -1; k <= 1; ++k) {
      gx += img.at(x - 1, y + k) - img.at(x + 1, y + k);
      gy += img.at(x + k, y - 1) - img.at(x + k, y + 1);
    }
    gx /= 3.0;
    gy /= 3.0;
    return std::sqrt(gx * gx + gy * gy);
  };

  std::vector<double> gms;
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x) {
      if (ms.window(x, y, 1) != 9) continue;
      const double a = magnitude(reference, x, y);
      const double b = magnitude(prediction, x, y);
      gms.push_back((2 * a * b + c) / (a * a + b * b + c));
    }
  if (gms.empty()) throw ConfigError("gmsd: no 3x3 neighbourhood lies inside the mask");
  double mean = 0.0;
  for (double v : gms) mean += v;
  mean /= static_cast<double>(gms.size());
  double var = 0.0;
  for (double v : gms) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(gms.size()));
}

double l1_metric(const CartesianImage& reference, const CartesianImage& prediction) {
  const auto m = joint_mask(reference, prediction);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i]) continue;
    sum += std::abs(reference.values[i] - prediction.values[i]);
    ++n;
  }
  return sum / static_cast<double>(n);
}

FrameMetrics evaluate_frame(const std::string& name, const CartesianImage& reference,
                            const CartesianImage& prediction, bool with_perceptual) {
  FrameMetrics f;
  f.name = name;
  try {
    const auto m = joint_mask(reference, prediction);
    f.mask_pixels = static_cast<std::size_t>(std::count(m.begin(), m.end(), std::uint8_t{1}));
    f.psnr = psnr(reference, prediction);
    f.ssim = ssim(reference, prediction);
    f.gmsd = gmsd(reference, prediction);
    f.l1 = l1_metric(reference, prediction);
    if (with_perceptual) {
      static const FeatureExtractor fx = LossConfig{}.make_extractor();
      CartesianImage a = reference, b = prediction;
      a.mask = b.mask = m;
      for (std::size_t i = 0; i < m.size(); ++i)
        if (!m[i]) a.values[i] = b.values[i] = 0.0;
      f.perceptual = perceptual_term(fx, to_tensor<double>(a), to_tensor<double>(b));
    }
    for (double v : {f.psnr, f.ssim, f.gmsd, f.l1})
      if (!std::isfinite(v)) throw NumericError("non-finite metric");
  } catch (const std::runtime_error& e) {
    f.valid = false;
    f.note = e.what();
  }
  return f;
}

std::size_t MetricReport::valid_count() const {
  return static_cast<std::size_t>(std::count_if(frames.begin(), frames.end(), [](const auto& f) { return f.valid; }));
}

MetricSummary MetricReport::summary(double FrameMetrics::*field) const {
  MetricSummary s;
  for (const FrameMetrics& f : frames)
    if (f.valid) {
      s.mean += f.*field;
      ++s.count;
    }
  if (s.count == 0) return s;
  s.mean /= static_cast<double>(s.count);
  if (s.count > 1) {
    double var = 0.0;
    for (const FrameMetrics& f : frames)
      if (f.valid) var += (f.*field - s.mean) * (f.*field - s.mean);
    s.std = std::sqrt(var / static_cast<double>(s.count - 1));
  }
  return s;
}

std::string MetricReport::to_csv() const {
  const bool perceptual = std::any_of(frames.begin(), frames.end(), [](const auto& f) { return f.perceptual; });
  std::ostringstream os;
  os.precision(17);
  os << "name,valid,mask_pixels,psnr,ssim,gmsd,l1" << (perceptual ? ",perceptual_builtin" : "") << ",note\n";
  for (const FrameMetrics& f : frames) {
    std::string note = f.note;
    std::replace(note.begin(), note.end(), ',', ';');
    std::replace(note.begin(), note.end(), '\n', ' ');
    os << f.name << ',' << (f.valid ? 1 : 0) << ',' << f.mask_pixels << ',' << f.psnr << ',' << f.ssim << ','
       << f.gmsd << ',' << f.l1;
    if (perceptual) {
      os << ',';
      if (f.perceptual) os << *f.perceptual;
    }
    os << ',' << note << '\n';
  }
  return os.str();
}

std::string MetricReport::summary_json() const {
  nlohmann::ordered_json j;
  j["frames"] = frames.size();
  j["valid"] = valid_count();
  auto put = [&](const char* key, double FrameMetrics::*field) {
    const MetricSummary s = summary(field);
    j[key] = {{"mean", s.mean}, {"std", s.std}};
  };
  put("psnr", &FrameMetrics::psnr);
  put("ssim", &FrameMetrics::ssim);
  put("gmsd", &FrameMetrics::gmsd);
  put("l1", &FrameMetrics::l1);
  std::vector<double> perceptual;
  for (const FrameMetrics& f : frames)
    if (f.valid && f.perceptual) perceptual.push_back(*f.perceptual);
  if (!perceptual.empty()) {
    double mean = 0.0;
    for (double v : perceptual) mean += v;
    j["perceptual_builtin"] = {{"mean", mean / static_cast<double>(perceptual.size())}};
  }
  return j.dump(2) + "\n";
}

}  // namespace pcle
