#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "pcle/dataset.hpp"
#include "pcle/error.hpp"
#include "pcle/iqa.hpp"

using namespace pcle;
namespace fs = std::filesystem;

namespace {

VideoSpec small_spec() {
  VideoSpec s;
  s.size = 48;
  s.frames = 3;
  return s;
}

double max_abs_diff(const CartesianImage& a, const CartesianImage& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
  return m;
}

}  // namespace

TEST_CASE("procedural texture") {
  const CartesianImage a = procedural_texture(80, 60, 5);
  CHECK(a.width == 80);
  CHECK(a.height == 60);
  CHECK(a.values == procedural_texture(80, 60, 5).values);
  CHECK(a.values != procedural_texture(80, 60, 6).values);
  double lo = 1.0, hi = 0.0;
  for (double v : a.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo >= 0.0);
  CHECK(hi <= 1.0);
  CHECK(hi - lo > 0.2);
}

TEST_CASE("synthetic video") {
  const VideoSpec spec = small_spec();
  const SyntheticVideo v = make_synthetic_video(spec, 3, "v");
  REQUIRE(v.lr.size() == 3);
  REQUIRE(v.hr.size() == 3);
  CHECK(v.noise_seeds.size() == 3);
  CHECK(v.pattern.width == 48);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(v.lr[i].width == 48);
    CHECK(v.lr[i].mask == v.hr[i].mask);
  }
  CHECK(v.hr[0].values != v.hr[1].values);

  const SyntheticVideo w = make_synthetic_video(spec, 3, "v");
  CHECK(w.lr[2].values == v.lr[2].values);

  CHECK_THROWS_AS(make_synthetic_video(procedural_texture(40, 40, 1), spec, 3, "small"), ConfigError);
}

TEST_CASE("noise off gives a cleaner LR on the same seed") {
  VideoSpec noisy = small_spec();
  VideoSpec clean = noisy;
  clean.noise = NoiseParams::off();
  const SyntheticVideo a = make_synthetic_video(noisy, 11, "a");
  const SyntheticVideo b = make_synthetic_video(clean, 11, "b");
  CHECK(a.hr[0].values == b.hr[0].values);
  for (std::size_t i = 0; i < a.lr.size(); ++i) CHECK(psnr(b.hr[i], b.lr[i]) > psnr(a.hr[i], a.lr[i]));
}

TEST_CASE("video directory round trip") {
  const fs::path dir = fs::temp_directory_path() / "pcle_test_dataset_video";
  fs::remove_all(dir);
  const SyntheticVideo v = make_synthetic_video(small_spec(), 4, "rt");
  save_video(dir, v);
  CHECK(is_video_dir(dir));
  CHECK_FALSE(is_video_dir(dir / "lr"));
  CHECK(fs::exists(dir / "lr" / frame_file_name(2)));
  CHECK(frame_file_name(2) == "frame_0002.png");

  const SyntheticVideo w = load_video(dir);
  CHECK(w.name == "rt");
  CHECK(w.pattern == v.pattern);
  CHECK(w.noise_seeds == v.noise_seeds);
  REQUIRE(w.lr.size() == v.lr.size());
  REQUIRE(w.hr.size() == v.hr.size());
  for (std::size_t i = 0; i < v.lr.size(); ++i) {
    CHECK(w.lr[i].mask == v.lr[i].mask);
    CHECK(max_abs_diff(w.lr[i], v.lr[i]) < 1e-5);
    CHECK(max_abs_diff(w.hr[i], v.hr[i]) < 1e-5);
  }
  fs::remove_all(dir);
  CHECK_THROWS(load_video(dir));
}
