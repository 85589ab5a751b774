#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "pcle/degrade.hpp"
#include "pcle/error.hpp"

using namespace pcle;

namespace {

CartesianImage smooth_texture(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  CartesianImage img(w, h);
  for (int k = 0; k < 12; ++k) {
    const double fx = (u(rng) - 0.5) * 0.6, fy = (u(rng) - 0.5) * 0.6, ph = u(rng) * 6.283;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) img.at(x, y) += std::sin(fx * x + fy * y + ph) / 12.0;
  }
  for (double& v : img.values) v = std::clamp(0.5 + 1.5 * v, 0.0, 1.0);
  return img;
}

CartesianImage random_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  CartesianImage img(w, h);
  for (double& v : img.values) v = std::uniform_real_distribution<double>(0, 1)(rng);
  return img;
}

std::vector<double> brute_cell_means(const CartesianImage& img, const FibrePattern& p) {
  const auto labels = oracle::nearest_fibre_labels(p.fibres, img.width, img.height);
  std::vector<double> sum(p.size(), 0.0), n(p.size(), 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (img.mask[i]) {
      sum[labels[i]] += img.values[i];
      n[labels[i]] += 1;
    }
  for (std::size_t f = 0; f < p.size(); ++f) sum[f] = n[f] > 0 ? sum[f] / n[f] : NAN;
  return sum;
}

}  // namespace

TEST_CASE("noise presets") {
  CHECK(NoiseParams::synthetic().sigma_add == 0.03);
  CHECK(NoiseParams::synthetic().sigma_mult == 0.05);
  CHECK(NoiseParams::synthetic().jitter_half_width == 0.025);
  CHECK(NoiseParams::original_data().sigma_add == 0.1);
  CHECK(NoiseParams::original_data().sigma_mult == 0.5);
  CHECK_FALSE(NoiseParams::off().enabled);
  CHECK_THROWS_AS(NoiseParams::preset("loud"), ConfigError);
  NoiseParams bad;
  bad.sigma_add = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("voronoi_vectorise") {
  SUBCASE("constant") {
    const FibrePattern p = generate_quasi_hex_pattern(64, 64, 5.0, 0.2, 1);
    for (double v : voronoi_vectorise(CartesianImage(64, 64, 0.25), p).values) CHECK(v == doctest::Approx(0.25));
  }
  SUBCASE("bisector halves") {
    FibrePattern p;
    p.fibres = {{10, 32}, {54, 32}};
    p.fov_center = {32, 32};
    p.fov_radius = 40;
    CartesianImage img(64, 64);
    for (int y = 0; y < 64; ++y)
      for (int x = 32; x < 64; ++x) img.at(x, y) = 1.0;
    const FibreSignals s = voronoi_vectorise(img, p);
    CHECK(s.values[0] == 0.0);
    CHECK(s.values[1] == 1.0);
  }
  SUBCASE("random image matches brute-force cell means") {
    FibrePattern p;
    p.fibres = oracle::random_points(50, 64, 64, 1.0, 12);
    p.fov_center = {32, 32};
    p.fov_radius = 64;
    const CartesianImage img = random_image(64, 64, 3);
    const FibreSignals s = voronoi_vectorise(img, p);
    const auto ref = brute_cell_means(img, p);
    for (std::size_t f = 0; f < p.size(); ++f) CHECK(std::abs(s.values[f] - ref[f]) < 1e-12);
  }
  SUBCASE("empty cells fall back to the bilinear sample") {
    FibrePattern p;
    p.fibres = {{8, 8}, {24, 8}, {16, 24}};
    p.fov_center = {16, 16};
    p.fov_radius = 30;
    CartesianImage img(32, 32, 0.5);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 16; ++x) img.mask[img.index(x, y)] = 0;
    img.clamp_and_mask();
    const FibreSignals s = voronoi_vectorise(img, p);
    CHECK(s.values[1] == doctest::Approx(0.5));
    CHECK(s.values[0] == doctest::Approx(0.0));  // bilinear of the zeroed left half
  }
}

TEST_CASE("apply_noise") {
  FibreSignals in;
  std::mt19937 rng(1);
  for (int i = 0; i < 200; ++i) in.values.push_back(std::uniform_real_distribution<double>(0, 1)(rng));

  SUBCASE("disabled is bit-exact identity") {
    NoiseParams off = NoiseParams::synthetic();
    off.enabled = false;
    CHECK(apply_noise(in, off, 5) == in);
  }
  SUBCASE("zero sigmas are identity") {
    NoiseParams z{0.0, 0.0, 0.0, true};
    CHECK(apply_noise(in, z, 5) == in);
  }
  SUBCASE("deterministic per seed") {
    CHECK(apply_noise(in, NoiseParams::synthetic(), 9) == apply_noise(in, NoiseParams::synthetic(), 9));
    CHECK_FALSE(apply_noise(in, NoiseParams::synthetic(), 9) == apply_noise(in, NoiseParams::synthetic(), 10));
  }
  SUBCASE("moments follow the generative model") {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
      FibreSignals flat{std::vector<double>(10000, 0.5)};
      const NoiseParams np = NoiseParams::synthetic();
      const FibreSignals out = apply_noise(flat, np, seed);
      const FrameSigmas fs = draw_frame_sigmas(np, seed);
      CHECK(std::abs(fs.add - 0.03) <= 0.025);
      CHECK(std::abs(fs.mult - 0.05) <= 0.025);
      double m = 0, m2 = 0;
      for (std::size_t i = 0; i < 10000; ++i) {
        const double d = out.values[i] - 0.5;
        m += d;
        m2 += d * d;
      }
      m /= 10000;
      const double sd = std::sqrt(m2 / 10000 - m * m);
      const double want = std::sqrt(fs.add * fs.add + 0.25 * fs.mult * fs.mult);
      CHECK(std::abs(sd - want) < 0.1 * want);
    }
  }
  SUBCASE("jitter can clamp a sigma to zero") {
    NoiseParams np{0.0, 0.0, 0.5, true};
    int zeros = 0;
    for (std::uint64_t s = 0; s < 50; ++s) {
      const FrameSigmas fs = draw_frame_sigmas(np, s);
      CHECK(fs.add >= 0.0);
      zeros += fs.add == 0.0;
    }
    CHECK(zeros > 0);
  }
}

TEST_CASE("downscale_voronoi") {
  const FibrePattern source = generate_quasi_hex_pattern(128, 128, hex_spacing_for_density(7.0), 0.2, 4);
  DegradeConfig cfg;
  cfg.noise = NoiseParams::off();

  SUBCASE("constant in, constant out") {
    const CartesianImage out = downscale_voronoi(CartesianImage(64, 64, 0.4), source, cfg);
    REQUIRE(out.masked_count() > 1000);
    for (std::size_t i = 0; i < out.size(); ++i)
      if (out.mask[i]) CHECK(std::abs(out.values[i] - 0.4) < 1e-9);
  }
  SUBCASE("deterministic, including noise") {
    cfg.noise = NoiseParams::synthetic();
    cfg.seed = 31;
    const CartesianImage img = smooth_texture(64, 64, 2);
    CHECK(downscale_voronoi(img, source, cfg) == downscale_voronoi(img, source, cfg));
  }
  SUBCASE("checkerboard is averaged towards 0.5") {
    CartesianImage board(64, 64);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) board.at(x, y) = (x + y) % 2;
    const CartesianImage out = downscale_voronoi(board, source, cfg);
    double dev = 0;
    for (std::size_t i = 0; i < out.size(); ++i)
      if (out.mask[i]) dev += std::abs(out.values[i] - 0.5);
    CHECK(dev / static_cast<double>(out.masked_count()) < 0.1);

    const FibrePattern fitted = fit_pattern_to_grid(source, 64, 64);
    const VoronoiKernel k(source, 64, 64);
    const auto ref = brute_cell_means(board, fitted);
    const FibreSignals s = k.vectorise(board);
    for (std::size_t f = 0; f < fitted.size(); ++f) CHECK(std::abs(s.values[f] - ref[f]) < 1e-12);
  }
  SUBCASE("global mean preserved within 2%") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const CartesianImage img = smooth_texture(64, 64, seed);
      const CartesianImage out = downscale_voronoi(img, source, cfg);
      CartesianImage in_masked = img;
      in_masked.mask = out.mask;
      CHECK(std::abs(oracle::masked_mean(out) - oracle::masked_mean(in_masked)) <
            0.02 * oracle::masked_mean(in_masked));
    }
  }
  SUBCASE("commutes with intensity inversion") {
    const CartesianImage img = smooth_texture(64, 64, 8);
    CartesianImage inv = img;
    for (double& v : inv.values) v = 1.0 - v;
    const CartesianImage a = downscale_voronoi(img, source, cfg);
    const CartesianImage b = downscale_voronoi(inv, source, cfg);
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a.mask[i]) CHECK(std::abs(a.values[i] + b.values[i] - 1.0) < 1e-12);
  }
  SUBCASE("wrong kernel") {
    cfg.kernel = KernelKind::bicubic;
    CHECK_THROWS_AS(downscale_voronoi(CartesianImage(64, 64), source, cfg), ConfigError);
  }
}

TEST_CASE("downscale_bicubic") {
  DegradeConfig cfg;
  cfg.kernel = KernelKind::bicubic;
  cfg.noise = NoiseParams::off();

  SUBCASE("constant") {
    const CartesianImage out = downscale_bicubic(CartesianImage(50, 44, 0.7), cfg);
    CHECK(out.width == 50);
    CHECK(out.height == 44);
    for (double v : out.values) CHECK(std::abs(v - 0.7) < 1e-6);
  }
  SUBCASE("sinusoid at the post-downscale Nyquist limit is attenuated") {
    const int n = 60;
    CartesianImage img(n, n);
    const double w = 2 * M_PI / (2.0 * cfg.bicubic_scale);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) img.at(x, y) = 0.5 + 0.4 * std::sin(w * x + 0.3);
    const CartesianImage out = downscale_bicubic(img, cfg);
    // least-squares fit of a*sin + b*cos + c on the central rows
    double ss = 0, cc = 0, sc = 0, ys = 0, yc = 0, s1 = 0, c1 = 0, y1 = 0, nn = 0;
    for (int y = 10; y < 50; ++y)
      for (int x = 0; x < n; ++x) {
        const double s = std::sin(w * x), c = std::cos(w * x), v = out.at(x, y);
        ss += s * s, cc += c * c, sc += s * c, ys += v * s, yc += v * c, s1 += s, c1 += c, y1 += v, nn += 1;
      }
    // solve the 3x3 normal equations by Cramer's rule
    const double A[3][3] = {{ss, sc, s1}, {sc, cc, c1}, {s1, c1, nn}};
    const double B[3] = {ys, yc, y1};
    auto det = [](const double m[3][3]) {
      return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
             m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    };
    double coef[2];
    for (int k = 0; k < 2; ++k) {
      double M[3][3];
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) M[i][j] = j == k ? B[i] : A[i][j];
      coef[k] = det(M) / det(A);
    }
    CHECK(std::hypot(coef[0], coef[1]) < 0.4);
  }
  SUBCASE("noise is seeded") {
    cfg.noise = NoiseParams::synthetic();
    const CartesianImage img = smooth_texture(48, 48, 1);
    cfg.seed = 1;
    const CartesianImage a = downscale_bicubic(img, cfg);
    CHECK(a == downscale_bicubic(img, cfg));
    cfg.seed = 2;
    CHECK_FALSE(a == downscale_bicubic(img, cfg));
  }
  SUBCASE("too small") { CHECK_THROWS_AS(downscale_bicubic(CartesianImage(11, 40), cfg), ConfigError); }
  SUBCASE("scale below 2") {
    cfg.bicubic_scale = 1;
    CHECK_THROWS_AS(downscale_bicubic(CartesianImage(40, 40), cfg), ConfigError);
  }
}

TEST_CASE("simulate_pcle") {
  SUBCASE("dense pattern is the identity") {
    FibrePattern p;
    for (int y = 0; y < 24; ++y)
      for (int x = 0; x < 24; ++x) p.fibres.push_back({x + 0.5, y + 0.5});
    p.fov_center = {12, 12};
    p.fov_radius = 20;
    const CartesianImage src = smooth_texture(24, 24, 3);
    const SimulatedFrame f = simulate_pcle(src, p, NoiseParams::off(), 0);
    for (std::size_t i = 0; i < src.size(); ++i) {
      REQUIRE(f.pcle.mask[i]);
      CHECK(std::abs(f.pcle.values[i] - f.hr.values[i]) < 1e-6);
    }
  }
  SUBCASE("sparser patterns and noise lower PSNR") {
    const CartesianImage src = smooth_texture(128, 128, 5);
    const FibrePattern fine = generate_quasi_hex_pattern(128, 128, 4.0, 0.2, 1);
    const FibrePattern coarse = generate_quasi_hex_pattern(128, 128, 8.0, 0.2, 1);
    const SimulatedFrame a = simulate_pcle(src, fine, NoiseParams::off(), 0);
    const SimulatedFrame b = simulate_pcle(src, coarse, NoiseParams::off(), 0);
    const SimulatedFrame c = simulate_pcle(src, fine, NoiseParams::synthetic(), 0);
    const double pa = oracle::psnr(a.pcle, a.hr), pb = oracle::psnr(b.pcle, b.hr), pc = oracle::psnr(c.pcle, c.hr);
    CHECK(std::isfinite(pa));
    CHECK(pa > pb);
    CHECK(pc < pa);
    CHECK(a.pcle.mask == a.hr.mask);
  }
}
