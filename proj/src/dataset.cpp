#include "pcle/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include <json.hpp>

#include "pcle/error.hpp"
#include "pcle/png_io.hpp"
#include "pcle/rng.hpp"

namespace pcle {

namespace {

// Bilinearly interpolated lattice noise with cells of `cell` pixels, in [-1, 1].
std::vector<double> value_noise(int w, int h, double cell, Rng& rng) {
  const int gw = static_cast<int>(std::ceil(w / cell)) + 2;
  const int gh = static_cast<int>(std::ceil(h / cell)) + 2;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> grid(static_cast<std::size_t>(gw) * gh);
  for (double& g : grid) g = u(rng);
  std::vector<double> out(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double gx = x / cell, gy = y / cell;
      const int ix = static_cast<int>(gx), iy = static_cast<int>(gy);
      double fx = gx - ix, fy = gy - iy;
      fx = fx * fx * (3 - 2 * fx);
      fy = fy * fy * (3 - 2 * fy);
      auto at = [&](int i, int j) { return grid[static_cast<std::size_t>(j) * gw + i]; };
      out[static_cast<std::size_t>(y) * w + x] = (1 - fy) * ((1 - fx) * at(ix, iy) + fx * at(ix + 1, iy)) +
                                                 fy * ((1 - fx) * at(ix, iy + 1) + fx * at(ix + 1, iy + 1));
    }
  return out;
}

double smoothstep_edge(double d, double softness) { return 1.0 / (1.0 + std::exp((d - 1.0) / softness)); }

}  // namespace

CartesianImage procedural_texture(int width, int height, std::uint64_t seed) {
  if (width < 1 || height < 1) throw ConfigError("texture size must be positive");
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CartesianImage img(width, height);

  const auto coarse = value_noise(width, height, 40.0, rng);
  const auto fine = value_noise(width, height, 9.0, rng);
  for (std::size_t i = 0; i < img.size(); ++i) img.values[i] = 0.32 + 0.12 * coarse[i] + 0.05 * fine[i];

  const int cells = std::max(1, width * height / 140);
  for (int c = 0; c < cells; ++c) {
    const double cx = u(rng) * width, cy = u(rng) * height;
    const double rx = 2.5 + 4.0 * u(rng), ry = 2.5 + 4.0 * u(rng);
    const double th = std::numbers::pi * u(rng);
    const double amp = 0.18 + 0.3 * u(rng);
    const bool nucleus = u(rng) < 0.5;
    const double ct = std::cos(th), st = std::sin(th);
    const int r = static_cast<int>(std::ceil(std::max(rx, ry))) + 2;
    for (int y = std::max(0, static_cast<int>(cy) - r); y < std::min(height, static_cast<int>(cy) + r + 1); ++y)
      for (int x = std::max(0, static_cast<int>(cx) - r); x < std::min(width, static_cast<int>(cx) + r + 1); ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        const double ex = (ct * dx + st * dy) / rx, ey = (-st * dx + ct * dy) / ry;
        const double d = std::sqrt(ex * ex + ey * ey);
        double v = amp * smoothstep_edge(d, 0.12);
        if (nucleus) v -= 0.6 * amp * smoothstep_edge(d / 0.4, 0.15);
        img.at(x, y) += v;
      }
  }

  const int strands = std::max(1, (width + height) / 40);
  for (int s = 0; s < strands; ++s) {
    const double y0 = u(rng) * height, slope = 2 * u(rng) - 1;
    const double amp = 4 + 8 * u(rng), freq = 0.02 + 0.06 * u(rng), ph = 6.28 * u(rng);
    const double level = (u(rng) < 0.5 ? -1 : 1) * (0.1 + 0.1 * u(rng));
    const bool vertical = u(rng) < 0.5;
    const int len = vertical ? height : width;
    for (int t = 0; t < len; ++t) {
      const double c = y0 + slope * t * 0.3 + amp * std::sin(freq * t + ph);
      for (int o = -2; o <= 2; ++o) {
        const int p = static_cast<int>(std::floor(c)) + o;
        const int x = vertical ? p : t, y = vertical ? t : p;
        if (x < 0 || y < 0 || x >= width || y >= height) continue;
        const double d = std::abs(p + 0.5 - c);
        img.at(x, y) += level * std::exp(-d * d / 0.8);
      }
    }
  }
  for (double& v : img.values) v = std::clamp(v, 0.0, 1.0);
  return img;
}

void VideoSpec::validate() const {
  if (size < 32) throw ConfigError("video frame size must be at least 32");
  if (frames < 1) throw ConfigError("video needs at least one frame");
  if (!(pixels_per_fibre > 1.0)) throw ConfigError("pixels_per_fibre must exceed 1");
  if (!(jitter >= 0.0 && jitter < 0.5)) throw ConfigError("jitter must be in [0, 0.5)");
  if (!(pan_speed >= 0.0)) throw ConfigError("pan_speed must be non-negative");
  noise.validate();
}

int video_source_side(const VideoSpec& spec) {
  return spec.size + static_cast<int>(std::ceil(spec.pan_speed * (spec.frames - 1))) + 2;
}

SyntheticVideo make_synthetic_video(const CartesianImage& source, const VideoSpec& spec, std::uint64_t seed,
                                    const std::string& name) {
  spec.validate();
  const int side = video_source_side(spec);
  if (source.width < side || source.height < side)
    throw ConfigError("video source must be at least " + std::to_string(side) + " pixels per side");

  SyntheticVideo v;
  v.name = name;
  v.pattern = generate_quasi_hex_pattern(spec.size, spec.size, hex_spacing_for_density(spec.pixels_per_fibre),
                                         spec.jitter, derive_seed(seed, {0xfb}));
  Rng rng(derive_seed(seed, {0xd1}));
  const double angle = std::uniform_real_distribution<double>(0.0, 2 * std::numbers::pi)(rng);
  const double span = spec.pan_speed * (spec.frames - 1);
  // Start so that the whole path stays inside the source.
  const double x0 = 1 + (span - span * std::cos(angle)) / 2 + (source.width - side) / 2;
  const double y0 = 1 + (span - span * std::sin(angle)) / 2 + (source.height - side) / 2;
  for (int k = 0; k < spec.frames; ++k) {
    const int x = static_cast<int>(std::lround(x0 + k * spec.pan_speed * std::cos(angle) - 0.5));
    const int y = static_cast<int>(std::lround(y0 + k * spec.pan_speed * std::sin(angle) - 0.5));
    const CartesianImage hr = crop(source, std::clamp(x, 0, source.width - spec.size),
                                   std::clamp(y, 0, source.height - spec.size), spec.size, spec.size);
    const std::uint64_t ns = derive_seed(seed, {0x5e, static_cast<std::uint64_t>(k)});
    SimulatedFrame f = simulate_pcle(hr, v.pattern, spec.noise, ns);
    v.hr.push_back(std::move(f.hr));
    v.lr.push_back(std::move(f.pcle));
    v.noise_seeds.push_back(ns);
  }
  return v;
}

SyntheticVideo make_synthetic_video(const VideoSpec& spec, std::uint64_t seed, const std::string& name) {
  const int side = video_source_side(spec);
  return make_synthetic_video(procedural_texture(side, side, derive_seed(seed, {0x7e})), spec, seed, name);
}

std::string frame_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04zu.png", index);
  return buf;
}

bool is_video_dir(const std::filesystem::path& dir) {
  return std::filesystem::is_regular_file(dir / "pattern.json") && std::filesystem::is_directory(dir / "lr");
}

void save_video(const std::filesystem::path& dir, const SyntheticVideo& video) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "lr");
  if (!video.hr.empty()) fs::create_directories(dir / "hr");
  save_pattern(dir / "pattern.json", video.pattern);
  if (!video.lr.empty()) write_mask_png(dir / "mask.png", video.lr.front());
  for (std::size_t i = 0; i < video.lr.size(); ++i) write_png(dir / "lr" / frame_file_name(i), video.lr[i]);
  for (std::size_t i = 0; i < video.hr.size(); ++i) write_png(dir / "hr" / frame_file_name(i), video.hr[i]);
  nlohmann::ordered_json j;
  j["name"] = video.name;
  j["frames"] = video.lr.size();
  j["noise_seeds"] = video.noise_seeds;
  std::ofstream(dir / "video.json") << j.dump(2) << "\n";
}

SyntheticVideo load_video(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!is_video_dir(dir)) throw IoError("not a video directory: " + dir.string());
  SyntheticVideo v;
  v.name = dir.filename().string();
  v.pattern = load_pattern(dir / "pattern.json");
  if (std::ifstream meta(dir / "video.json"); meta) {
    try {
      const nlohmann::json j = nlohmann::json::parse(meta);
      v.name = j.value("name", v.name);
      v.noise_seeds = j.value("noise_seeds", std::vector<std::uint64_t>{});
    } catch (const nlohmann::json::exception& e) {
      throw IoError("bad video.json in " + dir.string() + ": " + e.what());
    }
  }
  const bool has_mask = fs::is_regular_file(dir / "mask.png");
  auto read_frames = [&](const fs::path& sub) {
    std::vector<CartesianImage> out;
    for (std::size_t i = 0; fs::is_regular_file(sub / frame_file_name(i)); ++i) {
      CartesianImage img = read_png(sub / frame_file_name(i));
      if (has_mask) read_mask_png(dir / "mask.png", img);
      out.push_back(std::move(img));
    }
    return out;
  };
  v.lr = read_frames(dir / "lr");
  if (fs::is_directory(dir / "hr")) v.hr = read_frames(dir / "hr");
  if (v.lr.empty()) throw IoError("video has no frames: " + dir.string());
  if (!v.hr.empty() && v.hr.size() != v.lr.size()) throw IoError("lr/hr frame counts differ in " + dir.string());
  return v;
}

}  // namespace pcle
