#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"
#include "pcle/error.hpp"
#include "pcle/zssr.hpp"

using namespace pcle;

namespace {

CartesianImage ramp_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CartesianImage img(w, h);
  for (double& v : img.values) v = u(rng);
  return img;
}

// Smooth texture: a few random sinusoids mapped to [0.1, 0.9].
CartesianImage texture(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CartesianImage img(n, n);
  double f[4][3];
  for (auto& row : f) {
    row[0] = 0.05 + 0.4 * u(rng);
    row[1] = 0.05 + 0.4 * u(rng);
    row[2] = 6.28 * u(rng);
  }
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      double s = 0.0;
      for (const auto& row : f) s += std::sin(row[0] * x + row[1] * y + row[2]);
      img.at(x, y) = 0.5 + 0.1 * s;
    }
  return img;
}

InputFrame synthetic_frame(int n, std::uint64_t seed, const NoiseParams& noise = NoiseParams::off()) {
  const FibrePattern p = generate_quasi_hex_pattern(n, n, hex_spacing_for_density(7.0), 0.2, 42);
  const SimulatedFrame f = simulate_pcle(texture(n, seed), p, noise, seed);
  return InputFrame{f.pcle, p};
}

TrainConfig tiny_config() {
  TrainConfig c = TrainConfig::desk();
  c.network = {2, 8, 3};
  c.epochs = 4;
  c.eval_every = 2;
  c.batch_size = 2;
  c.crop_size = 20;
  c.seed = 7;
  return c;
}

}  // namespace

TEST_CASE("augmentations form the dihedral group of the square") {
  const CartesianImage img = ramp_image(5, 5, 1);
  std::set<std::vector<double>> seen;
  for (const Augmentation a : Augmentation::all()) {
    const CartesianImage t = augment(img, a);
    seen.insert(t.values);
    CHECK(invert(t, a) == img);
    CHECK(Augmentation::from_index(a.index()) == a);
  }
  CHECK(seen.size() == 8);

  // Explicit pixel maps for the generators on a 3x3 grid.
  CartesianImage g(3, 3);
  for (int i = 0; i < 9; ++i) g.values[static_cast<std::size_t>(i)] = i;
  const CartesianImage r = augment(g, {1, false});
  CHECK(r.values == std::vector<double>{2, 5, 8, 1, 4, 7, 0, 3, 6});
  const CartesianImage f = augment(g, {0, true});
  CHECK(f.values == std::vector<double>{2, 1, 0, 5, 4, 3, 8, 7, 6});
  // Flip then quarter turn.
  const CartesianImage fr = augment(g, {1, true});
  CHECK(fr.values == std::vector<double>{0, 3, 6, 1, 4, 7, 2, 5, 8});

  CartesianImage masked = img;
  masked.mask[0] = 0;
  CHECK(invert(augment(masked, {3, true}), {3, true}) == masked);
  CHECK_THROWS_AS(augment(CartesianImage(4, 5), {}), ConfigError);
  CHECK_THROWS_AS(Augmentation::from_index(8), ConfigError);
}

TEST_CASE("TrainConfig validation and presets") {
  CHECK_NOTHROW(TrainConfig::paper().validate());
  CHECK_NOTHROW(TrainConfig::desk().validate());
  const TrainConfig p = TrainConfig::paper();
  CHECK(p.epochs == 1000);
  CHECK(p.eval_every == 100);
  CHECK(p.batch_size == 8);
  CHECK(p.crop_size == 340);
  CHECK(p.frames_fraction == doctest::Approx(0.1));

  TrainConfig c = TrainConfig::desk();
  c.eval_every = 7;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig::desk();
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig::desk();
  c.crop_size = 15;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig::desk();
  c.frames_fraction = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("training_frame_count") {
  CHECK(training_frame_count(10, 0.1) == 1);
  CHECK(training_frame_count(20, 0.1) == 2);
  CHECK(training_frame_count(21, 0.1) == 3);
  CHECK(training_frame_count(1, 0.1) == 1);
  CHECK(training_frame_count(7, 1.0) == 7);
  CHECK_THROWS_AS(training_frame_count(0, 0.1), ConfigError);
}

TEST_CASE("resolve_crop shrinks to the pseudo-HR field of view") {
  const InputFrame f = synthetic_frame(128, 3);
  const CartesianImage ph = make_pseudo_hr(f.image, f.pattern, 2).image;
  TrainConfig c = TrainConfig::paper();
  const CropGeometry g = resolve_crop(ph, c);
  CHECK(g.shrunk);
  CHECK(g.outer == largest_centered_square_in_mask(ph));
  CHECK(g.crop == g.outer - 2 * c.crop_margin);
  CHECK(crop(ph, (ph.width - g.outer) / 2, (ph.height - g.outer) / 2, g.outer, g.outer).masked_count() ==
        static_cast<std::size_t>(g.outer) * g.outer);

  c.crop_size = 16;
  const CropGeometry small = resolve_crop(ph, c);
  CHECK_FALSE(small.shrunk);
  CHECK(small.crop == 16);

  CartesianImage tiny(64, 64, 0.5, false);
  for (int y = 28; y < 36; ++y)
    for (int x = 28; x < 36; ++x) tiny.mask[tiny.index(x, y)] = 1;
  CHECK_THROWS_AS(resolve_crop(tiny, c), ConfigError);
}

TEST_CASE("build_training_item") {
  const InputFrame f = synthetic_frame(128, 5);
  const CartesianImage ph = make_pseudo_hr(f.image, f.pattern, 2).image;
  TrainConfig c = tiny_config();
  c.degrade.noise = NoiseParams::off();
  const CropGeometry g = resolve_crop(ph, c);
  const Degrader d(f.pattern, g.outer, c.degrade);

  const TrainingPair a = build_training_item(ph, d, c, 99);
  const TrainingPair b = build_training_item(ph, d, c, 99);
  CHECK(a.lr == b.lr);
  CHECK(a.hr == b.hr);
  CHECK(a.hr.width == g.crop);
  CHECK(a.lr.width == g.crop);
  CHECK(a.lr.masked_count() == a.lr.size());

  // HR is one of the 8 augmentations of the central crop, and the noise-free
  // LR is the Voronoi kernel applied to the matching augmented outer crop.
  const CartesianImage outer = center_crop(ph, g.outer);
  int matches = 0;
  for (const Augmentation aug : Augmentation::all()) {
    const CartesianImage hr_outer = augment(outer, aug);
    if (trim(hr_outer, c.crop_margin) != a.hr) continue;
    ++matches;
    const VoronoiKernel k(f.pattern, g.outer, g.outer);
    CHECK(trim(k.apply(hr_outer, NoiseParams::off(), 0), c.crop_margin) == a.lr);
  }
  CHECK(matches >= 1);

  // Different seeds explore different augmentations.
  std::set<std::vector<double>> hrs;
  for (std::uint64_t s = 0; s < 40; ++s) hrs.insert(build_training_item(ph, d, c, s).hr.values);
  CHECK(hrs.size() == 8);

  // With noise, the seed changes the LR but never the geometry.
  c.degrade.noise = NoiseParams::synthetic();
  const Degrader dn(f.pattern, g.outer, c.degrade);
  const TrainingPair n1 = build_training_item(ph, dn, c, 1);
  const TrainingPair n2 = build_training_item(ph, dn, c, 1);
  CHECK(n1.lr == n2.lr);
  CHECK(n1.lr.width == g.crop);

  c.degrade.kernel = KernelKind::bicubic;
  c.degrade.noise = NoiseParams::off();
  const TrainingPair bc = build_training_item(ph, f.pattern, c, 3);
  CHECK(bc.lr.width == c.crop_size);
  CHECK(bc.lr.masked_count() == bc.lr.size());
}

TEST_CASE("predict_median8") {
  const InputFrame f = synthetic_frame(64, 9);

  SUBCASE("identity network returns the input exactly") {
    const NetworkParams<float> id = NetworkParams<float>::zeros({2, 8, 3});
    CHECK(predict_median8(id, f.image) == f.image);
    const NetworkParams<float> init = NetworkParams<float>::initialise({2, 8, 3}, 1);
    CHECK(predict_median8(init, f.image) == f.image);
  }

  SUBCASE("median of the inverse-augmented candidates") {
    NetworkParams<float> p = NetworkParams<float>::initialise({2, 8, 3}, 3);
    std::mt19937_64 rng(5);
    std::normal_distribution<float> n(0.0f, 0.05f);
    for (float& w : p.layers.back().weight) w = n(rng);
    const MedianPrediction m = predict_median8_detail(p, f.image);
    CHECK(m.output.mask == f.image.mask);

    // Candidate k is the network applied in augmented coordinates, mapped back.
    for (const Augmentation a : Augmentation::all()) {
      const CartesianImage in = augment(f.image, a);
      const Tensor<float> t = to_tensor<float>(in);
      const Tensor<float> y = forward(p, t);
      CartesianImage expect = in;
      for (std::size_t i = 0; i < in.size(); ++i) expect.values[i] += double(y.data[i]) - double(t.data[i]);
      expect = invert(expect, a);
      expect.clamp_and_mask();
      CHECK(m.candidates[static_cast<std::size_t>(a.index())] == expect);
    }

    bool any_differs = false;
    for (std::size_t i = 0; i < f.image.size(); ++i) {
      if (!f.image.mask[i]) {
        CHECK(m.output.values[i] == 0.0);
        continue;
      }
      std::vector<double> v;
      for (const auto& c : m.candidates) v.push_back(c.values[i]);
      std::sort(v.begin(), v.end());
      CHECK(m.output.values[i] >= v.front());
      CHECK(m.output.values[i] <= v.back());
      CHECK(m.output.values[i] == doctest::Approx((v[3] + v[4]) / 2).epsilon(1e-15));
      any_differs = any_differs || v.front() != v.back();
    }
    CHECK(any_differs);
    CHECK(predict_median8(p, f.image, 3) == m.output);
  }
}

TEST_CASE("train_supervised") {
  TrainConfig c = tiny_config();
  CHECK_THROWS_AS(train_supervised({}, c), ConfigError);

  SUBCASE("LR equal to HR keeps the identity") {
    const InputFrame f = synthetic_frame(48, 2);
    const std::vector<TrainingPair> pairs{{f.image, f.image}};
    const TrainResult r = train_supervised(pairs, c);
    REQUIRE(r.trace.size() == 4);
    for (const LossRow& row : r.trace) CHECK(row.loss == 0.0);
    const NetworkParams<float> init = train_supervised(pairs, [&] {
                                        TrainConfig z = c;
                                        z.epochs = z.eval_every = 1;
                                        return z;
                                      }()).params;
    CHECK(r.params == init);
    CHECK(predict_median8(r.params, f.image) == f.image);
  }

  SUBCASE("fits a noisy-to-clean mapping") {
    std::vector<TrainingPair> pairs;
    for (std::uint64_t s = 0; s < 2; ++s) {
      const CartesianImage clean = texture(48, s);
      CartesianImage noisy = clean;
      std::mt19937_64 rng(s);
      std::normal_distribution<double> n(0.0, 0.05);
      for (double& v : noisy.values) v += n(rng);
      pairs.push_back({noisy, clean});
    }
    c.epochs = 40;
    c.eval_every = 40;
    const TrainResult r = train_supervised(pairs, c);
    double first = 0, last = 0;
    for (int i = 0; i < 5; ++i) {
      first += r.trace[static_cast<std::size_t>(i)].loss;
      last += r.trace[r.trace.size() - 1 - static_cast<std::size_t>(i)].loss;
    }
    CHECK(last < first);
  }
}

TEST_CASE("train_zero_shot") {
  const std::vector<InputFrame> frames{synthetic_frame(128, 11, NoiseParams::synthetic()),
                                       synthetic_frame(128, 12, NoiseParams::synthetic())};
  const TrainConfig c = tiny_config();

  std::vector<LossRow> seen;
  std::vector<int> rounds;
  TrainCallbacks cb;
  cb.on_epoch = [&](const LossRow& r) { seen.push_back(r); };
  cb.on_eval = [&](int round, const Checkpoint& ck) {
    rounds.push_back(round);
    CHECK(ck.meta.at("training_set_size") == std::to_string(2 + round));
  };
  const TrainResult r = train_zero_shot(frames, c, cb);
  CHECK(r.training_set_size == 2 + 4 / 2);
  REQUIRE(r.trace.size() == 4);
  CHECK(seen.size() == 4);
  CHECK(rounds == std::vector<int>{1, 2});
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    CHECK(r.trace[i].epoch == static_cast<int>(i) + 1);
    CHECK(std::isfinite(r.trace[i].loss));
    CHECK(r.trace[i].lr == doctest::Approx(lr_schedule(static_cast<std::int64_t>(i), c.lr)));
  }
  CHECK(r.optimizer.step == 4);
  CHECK(r.geometry.crop == c.crop_size);

  SUBCASE("deterministic and independent of the thread count") {
    const TrainResult again = train_zero_shot(frames, c);
    CHECK(again.params == r.params);
    TrainConfig t = c;
    t.threads = 3;
    const TrainResult threaded = train_zero_shot(frames, t);
    CHECK(threaded.params == r.params);
    CHECK(threaded.trace.back().loss == r.trace.back().loss);
  }

  SUBCASE("seed changes the run") {
    TrainConfig s = c;
    s.seed = 8;
    CHECK_FALSE(train_zero_shot(frames, s).params == r.params);
  }

  SUBCASE("bicubic kernel") {
    TrainConfig b = c;
    b.degrade.kernel = KernelKind::bicubic;
    CHECK(train_zero_shot(frames, b).trace.size() == 4);
  }

  SUBCASE("divergence keeps the last finite checkpoint") {
    TrainConfig d = c;
    d.lr.lr0 = 1e30;
    d.lr.lr_floor = 1e29;
    try {
      train_zero_shot(frames, d);
      FAIL("expected divergence");
    } catch (const TrainingDiverged& e) {
      CHECK(e.epoch() >= 1);
      CHECK(e.last_finite().params.all_finite());
    }
  }

  CHECK_THROWS_AS(train_zero_shot({}, c), ConfigError);
}

TEST_CASE("process_video") {
  std::vector<InputFrame> frames;
  for (std::uint64_t s = 0; s < 12; ++s) frames.push_back(synthetic_frame(96, 20 + s));
  TrainConfig c = tiny_config();
  c.epochs = c.eval_every = 2;
  const VideoResult v = process_video(frames, c);
  CHECK(v.frames_used == 2);
  CHECK(v.training.training_set_size == 3);
  REQUIRE(v.outputs.size() == frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    CHECK(v.outputs[i].mask == frames[i].image.mask);
    CHECK(v.outputs[i] == predict_median8(v.training.params, frames[i].image));
  }
}
