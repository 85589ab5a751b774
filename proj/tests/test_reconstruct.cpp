#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "pcle/error.hpp"
#include "pcle/reconstruct.hpp"

using namespace pcle;

namespace {

FibrePattern random_pattern(std::size_t n, int w, int h, std::uint64_t seed) {
  FibrePattern p;
  p.fibres = oracle::random_points(n, w, h, 0.7, seed);
  p.fov_center = {w / 2.0, h / 2.0};
  p.fov_radius = std::hypot(w, h);
  p.width = w;
  p.height = h;
  return p;
}

FibrePattern snapped_pattern(std::size_t n, int w, int h, std::uint64_t seed) {
  FibrePattern p = random_pattern(n, w, h, seed);
  std::vector<Point> snapped;
  for (Point q : p.fibres) {
    const Point s{std::floor(q.x) + 0.5, std::floor(q.y) + 0.5};
    bool dup = false;
    for (Point o : snapped) dup = dup || (o == s);
    if (!dup) snapped.push_back(s);
  }
  p.fibres = snapped;
  return p;
}

}  // namespace

TEST_CASE("sample_at_fibres") {
  const FibrePattern p = random_pattern(30, 32, 32, 1);
  SUBCASE("constant image") {
    const FibreSignals s = sample_at_fibres(CartesianImage(32, 32, 0.37), p);
    for (double v : s.values) CHECK(v == doctest::Approx(0.37).epsilon(1e-15));
  }
  SUBCASE("fibre at a pixel centre") {
    CartesianImage img(32, 32);
    std::mt19937 rng(2);
    for (double& v : img.values) v = std::uniform_real_distribution<double>(0, 1)(rng);
    FibrePattern q = p;
    q.fibres = {{5.5, 7.5}, {31.5, 0.5}};
    const FibreSignals s = sample_at_fibres(img, q);
    CHECK(s.values[0] == img.at(5, 7));
    CHECK(s.values[1] == img.at(31, 0));
  }
  SUBCASE("linear ramp") {
    CartesianImage img(64, 64);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) img.at(x, y) = (x + 0.5) / 64.0;
    FibrePattern q = p;
    q.fibres = {{10.5, 20.25}, {33.2, 40.9}};
    const FibreSignals s = sample_at_fibres(img, q);
    CHECK(std::abs(s.values[0] - 10.5 / 64.0) < 1e-6);
    CHECK(std::abs(s.values[1] - 33.2 / 64.0) < 1e-6);
  }
}

TEST_CASE("reconstruct reproduces constants and linear fields") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const FibrePattern p = random_pattern(60, 48, 40, seed);
    const Reconstructor rec(p, 48, 40);
    const CartesianImage c = rec(FibreSignals{std::vector<double>(p.size(), 0.62)});
    REQUIRE(c.masked_count() > 0);
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (c.mask[i]) CHECK(std::abs(c.values[i] - 0.62) < 1e-6);
      else CHECK(c.values[i] == 0.0);
    }
    const double a = 0.013, b = -0.021, d = 0.4;
    FibreSignals lin;
    for (Point f : p.fibres) lin.values.push_back(a * f.x + b * f.y + d);
    const CartesianImage l = rec(lin, Clamp::no);
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 48; ++x)
        if (l.in_mask(x, y)) CHECK(std::abs(l.at(x, y) - (a * (x + 0.5) + b * (y + 0.5) + d)) < 1e-6);
  }
}

TEST_CASE("pixel on a fibre takes the fibre's signal") {
  const FibrePattern p = snapped_pattern(40, 32, 32, 9);
  std::mt19937 rng(4);
  FibreSignals s;
  for (std::size_t i = 0; i < p.size(); ++i) s.values.push_back(std::uniform_real_distribution<double>(0, 1)(rng));
  const CartesianImage img = reconstruct(s, p, 32, 32);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const int x = static_cast<int>(p.fibres[i].x), y = static_cast<int>(p.fibres[i].y);
    REQUIRE(img.in_mask(x, y));
    CHECK(std::abs(img.at(x, y) - s.values[i]) < 1e-9);
  }
}

TEST_CASE("range preservation on 50 random cases") {
  std::mt19937 rng(77);
  for (int c = 0; c < 50; ++c) {
    const FibrePattern p = random_pattern(20 + c, 40, 40, 1000 + c);
    FibreSignals s;
    for (std::size_t i = 0; i < p.size(); ++i) s.values.push_back(std::uniform_real_distribution<double>(-0.5, 1.5)(rng));
    const double lo = *std::min_element(s.values.begin(), s.values.end());
    const double hi = *std::max_element(s.values.begin(), s.values.end());
    const CartesianImage img = reconstruct(s, p, 40, 40, Clamp::no);
    for (std::size_t i = 0; i < img.size(); ++i)
      if (img.mask[i]) {
        CHECK(img.values[i] >= lo - 1e-12);
        CHECK(img.values[i] <= hi + 1e-12);
      }
  }
}

TEST_CASE("reconstruction is a projection for snapped patterns") {
  const FibrePattern p = snapped_pattern(70, 48, 48, 5);
  std::mt19937 rng(8);
  FibreSignals s;
  for (std::size_t i = 0; i < p.size(); ++i) s.values.push_back(std::uniform_real_distribution<double>(0, 1)(rng));
  const CartesianImage once = reconstruct(s, p, 48, 48);
  const CartesianImage twice = reconstruct(sample_at_fibres(once, p), p, 48, 48);
  CHECK(once.mask == twice.mask);
  for (std::size_t i = 0; i < once.size(); ++i)
    if (once.mask[i]) CHECK(std::abs(once.values[i] - twice.values[i]) < 1e-6);
}

TEST_CASE("signal validation") {
  const FibrePattern p = random_pattern(10, 16, 16, 2);
  const Reconstructor rec(p, 16, 16);
  CHECK_THROWS_AS(rec(FibreSignals{std::vector<double>(9, 0.0)}), ConfigError);
  std::vector<double> bad(10, 0.0);
  bad[3] = NAN;
  CHECK_THROWS_AS(rec(FibreSignals{bad}), NumericError);
}

TEST_CASE("make_pseudo_hr") {
  SUBCASE("512 input at 7 pixels per fibre") {
    const FibrePattern p = generate_quasi_hex_pattern(512, 512, hex_spacing_for_density(7.0), 0.2, 3);
    const double disc = M_PI * 256.0 * 256.0;
    CHECK(disc / static_cast<double>(p.size()) == doctest::Approx(7.0).epsilon(0.05));
    const PseudoHr ph = make_pseudo_hr(CartesianImage(512, 512, 0.3), p, 2);
    CHECK(ph.image.width == 256);
    CHECK(ph.image.height == 256);
    CHECK(ph.image.size() * 4 == 512u * 512u);
    CHECK(ph.pattern.size() == p.size());
    CHECK((disc / 4.0) / static_cast<double>(ph.pattern.size()) == doctest::Approx(7.0 / 4.0).epsilon(0.05));
    for (std::size_t i = 0; i < ph.image.size(); ++i)
      if (ph.image.mask[i]) CHECK(std::abs(ph.image.values[i] - 0.3) < 1e-9);
    CHECK(ph.pattern.fibres[5].x == p.fibres[5].x / 2.0);
  }
  SUBCASE("factor 1 equals re-reconstruction of the sampled signals") {
    const FibrePattern p = random_pattern(50, 32, 32, 6);
    std::mt19937 rng(1);
    FibreSignals s;
    for (std::size_t i = 0; i < p.size(); ++i) s.values.push_back(std::uniform_real_distribution<double>(0, 1)(rng));
    const CartesianImage img = reconstruct(s, p, 32, 32);
    const PseudoHr ph = make_pseudo_hr(img, p, 1);
    CHECK(ph.image == reconstruct(sample_at_fibres(img, p), p, 32, 32));
  }
  SUBCASE("too small") {
    const FibrePattern p = random_pattern(50, 30, 30, 6);
    CHECK_THROWS_AS(make_pseudo_hr(CartesianImage(30, 30), p, 2), ConfigError);
  }
}
