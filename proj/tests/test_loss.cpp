#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "pcle/error.hpp"
#include "pcle/loss.hpp"

using namespace pcle;

namespace {

Tensor<double> random_tensor(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  Tensor<double> t(1, h, w);
  for (double& v : t.data) v = u(rng);
  return t;
}

// Direct nested-loop valid convolution + ReLU, independent of im2col/GEMM.
std::vector<std::vector<std::vector<double>>> naive_stage(const std::vector<std::vector<std::vector<double>>>& in,
                                                          const ConvLayer<double>& l) {
  const int k = l.shape.kernel, s = l.shape.stride;
  const int h = static_cast<int>(in[0].size()), w = static_cast<int>(in[0][0].size());
  const int oh = (h - k) / s + 1, ow = (w - k) / s + 1;
  std::vector<std::vector<std::vector<double>>> out(l.shape.out_channels,
                                                    std::vector<std::vector<double>>(oh, std::vector<double>(ow)));
  for (int o = 0; o < l.shape.out_channels; ++o)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = l.bias[o];
        for (int c = 0; c < l.shape.in_channels; ++c)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx)
              acc += l.weight[((o * l.shape.in_channels + c) * k + ky) * k + kx] * in[c][y * s + ky][x * s + kx];
        out[o][y][x] = std::max(0.0, acc);
      }
  return out;
}

double naive_perceptual(const FeatureExtractor& fx, const Tensor<double>& a, const Tensor<double>& b) {
  auto lift = [&](const Tensor<double>& t) {
    std::vector<std::vector<std::vector<double>>> x(fx.input_channels(),
                                                    std::vector<std::vector<double>>(t.height, std::vector<double>(t.width)));
    for (int c = 0; c < fx.input_channels(); ++c)
      for (int y = 0; y < t.height; ++y)
        for (int xx = 0; xx < t.width; ++xx) x[c][y][xx] = t.at(0, y, xx);
    return x;
  };
  auto fa = lift(a), fb = lift(b);
  double total = 0;
  for (std::size_t l = 0; l < fx.stage_count(); ++l) {
    fa = naive_stage(fa, fx.stages()[l]);
    fb = naive_stage(fb, fx.stages()[l]);
    double sum = 0;
    const double hw = static_cast<double>(fa[0].size() * fa[0][0].size());
    for (std::size_t c = 0; c < fa.size(); ++c)
      for (std::size_t y = 0; y < fa[c].size(); ++y)
        for (std::size_t x = 0; x < fa[c][y].size(); ++x) {
          const double d = fx.channel_weights()[l][c] * (fa[c][y][x] - fb[c][y][x]);
          sum += d * d;
        }
    total += sum / hw;
  }
  return total;
}

FeatureExtractor toy_extractor(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 0.5);
  ConvLayer<double> a({3, 4, 3, 1, Padding::valid}), b({4, 5, 3, 2, Padding::valid});
  for (double& w : a.weight) w = g(rng);
  for (double& w : a.bias) w = g(rng);
  for (double& w : b.weight) w = g(rng);
  for (double& w : b.bias) w = g(rng);
  return FeatureExtractor({a, b}, {{0.5, 1.0, 0.0, 2.0}, {1, 1, 1, 1, 0.25}});
}

}  // namespace

TEST_CASE("l1 term") {
  const auto a = random_tensor(10, 12, 1), b = random_tensor(10, 12, 2);
  CHECK(l1_term(a, a) == 0.0);
  CHECK(l1_term(Tensor<double>(1, 4, 4, 1.0), Tensor<double>(1, 4, 4, 0.0)) == 1.0);
  double s = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += std::abs(a.data[i] - b.data[i]);
  CHECK(std::abs(l1_term(a, b) - s / 120.0) < 1e-7);
  CHECK(l1_term(a, b) == l1_term(b, a));
  CHECK_THROWS_AS(l1_term(a, random_tensor(10, 11, 3)), ConfigError);
}

TEST_CASE("perceptual term") {
  const auto a = random_tensor(16, 16, 4), b = random_tensor(16, 16, 5);
  const FeatureExtractor fx = FeatureExtractor::builtin(7);
  CHECK(perceptual_term(fx, a, a) == 0.0);
  CHECK(perceptual_term(fx, a, b) > 0.0);
  CHECK(perceptual_term(fx, a, b) == doctest::Approx(perceptual_term(fx, b, a)).epsilon(1e-12));

  SUBCASE("zero channel weights") {
    std::vector<std::vector<double>> zero;
    for (const auto& w : fx.channel_weights()) zero.emplace_back(w.size(), 0.0);
    const FeatureExtractor z(fx.stages(), zero);
    CHECK(perceptual_term(z, a, b) == 0.0);
  }
  SUBCASE("toy extractor matches the naive computation") {
    const FeatureExtractor toy = toy_extractor(9);
    for (std::uint64_t s = 0; s < 5; ++s) {
      const auto x = random_tensor(11, 13, 10 + s), y = random_tensor(11, 13, 20 + s);
      CHECK(std::abs(perceptual_term(toy, x, y) - naive_perceptual(toy, x, y)) < 1e-6);
    }
  }
  SUBCASE("builtin extractor matches the naive computation") {
    CHECK(std::abs(perceptual_term(fx, a, b) - naive_perceptual(fx, a, b)) < 1e-6);
  }
  SUBCASE("float agrees with double") {
    Tensor<float> af(1, 16, 16), bf(1, 16, 16);
    for (std::size_t i = 0; i < a.data.size(); ++i) af.data[i] = static_cast<float>(a.data[i]), bf.data[i] = static_cast<float>(b.data[i]);
    CHECK(perceptual_term(fx, af, bf) == doctest::Approx(perceptual_term(fx, a, b)).epsilon(1e-4));
  }
  SUBCASE("footprint") {
    CHECK(fx.min_side() == 9);
    CHECK_NOTHROW(perceptual_term(fx, random_tensor(9, 9, 1), random_tensor(9, 9, 2)));
    CHECK_THROWS_AS(perceptual_term(fx, random_tensor(8, 8, 1), random_tensor(8, 8, 2)), ConfigError);
  }
}

TEST_CASE("total loss") {
  const FeatureExtractor fx = FeatureExtractor::builtin(3);
  LossConfig cfg;
  SUBCASE("identical pair") {
    const auto a = random_tensor(12, 12, 1);
    const auto r = total_loss(cfg, fx, a, a);
    CHECK(r.value == 0.0);
    for (double g : r.grad.data) CHECK(g == 0.0);
  }
  SUBCASE("closed-form L1 only") {
    cfg.perceptual_enabled = false;
    const auto r = total_loss(cfg, fx, Tensor<double>(1, 10, 10, 1.0), Tensor<double>(1, 10, 10, 0.0));
    CHECK(r.value == doctest::Approx(5.0).epsilon(1e-15));
    for (double g : r.grad.data) CHECK(g == doctest::Approx(-5.0 / 100).epsilon(1e-15));
  }
  SUBCASE("gradient matches central finite differences") {
    const auto ref = random_tensor(14, 15, 6);
    auto pred = random_tensor(14, 15, 7);
    const auto r = total_loss(cfg, fx, ref, pred);
    CHECK(r.value == doctest::Approx(perceptual_term(fx, ref, pred) + 5.0 * l1_term(ref, pred)).epsilon(1e-12));
    const double h = 1e-5;
    int checked = 0, good = 0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
      if (std::abs(ref.data[i] - pred.data[i]) < 1e-3) continue;
      const double keep = pred.data[i];
      pred.data[i] = keep + h;
      const double fp = total_loss(cfg, fx, ref, pred).value;
      pred.data[i] = keep - h;
      const double fm = total_loss(cfg, fx, ref, pred).value;
      pred.data[i] = keep;
      const double fd = (fp - fm) / (2 * h);
      const double denom = std::max({std::abs(fd), std::abs(r.grad.data[i]), 1e-8});
      ++checked;
      good += std::abs(fd - r.grad.data[i]) / denom < 1e-3;
    }
    CHECK(checked > 150);
    CHECK(good >= 0.99 * checked);
  }
  SUBCASE("L1 subgradient at ties is zero") {
    cfg.perceptual_enabled = false;
    auto a = random_tensor(10, 10, 1), b = a;
    b.data[5] += 0.5;
    const auto r = total_loss(cfg, fx, a, b);
    CHECK(r.grad.data[4] == 0.0);
    CHECK(r.grad.data[5] == doctest::Approx(0.05));
  }
  SUBCASE("config validation") {
    cfg.lambda_l1 = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_CASE("extractor weights file round trip") {
  const FeatureExtractor toy = toy_extractor(2);
  const auto path = std::filesystem::temp_directory_path() / "pcle_extractor.bin";
  toy.save(path);
  const FeatureExtractor back = FeatureExtractor::load(path);
  std::filesystem::remove(path);
  REQUIRE(back.stage_count() == 2);
  const auto a = random_tensor(12, 12, 1), b = random_tensor(12, 12, 2);
  CHECK(perceptual_term(back, a, b) == doctest::Approx(perceptual_term(toy, a, b)).epsilon(1e-6));
  CHECK(back.stages()[1].shape == toy.stages()[1].shape);
  CHECK_THROWS_AS(FeatureExtractor({}, {}), ConfigError);
  CHECK_THROWS_AS(FeatureExtractor(toy.stages(), {{1, 1, 1, 1}, {1, 1, 1, 1, -1}}), ConfigError);
}
