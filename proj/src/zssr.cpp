#include "pcle/zssr.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "pcle/error.hpp"
#include "pcle/parallel.hpp"
#include "pcle/reconstruct.hpp"
#include "pcle/rng.hpp"

namespace pcle {

// ---------------------------------------------------------------------------
// augmentation

std::array<Augmentation, 8> Augmentation::all() {
  std::array<Augmentation, 8> out;
  for (int i = 0; i < 8; ++i) out[static_cast<std::size_t>(i)] = from_index(i);
  return out;
}

Augmentation Augmentation::from_index(int i) {
  if (i < 0 || i > 7) throw ConfigError("augmentation index must be in [0, 8)");
  return Augmentation{i % 4, i >= 4};
}

namespace {

void require_square(const CartesianImage& img) {
  if (!img.is_square()) {
    throw ConfigError("augmentation needs a square image, got " + std::to_string(img.width) + "x" +
                      std::to_string(img.height));
  }
}

// out(x, y) = img(src(x, y))
template <class Src>
CartesianImage remap(const CartesianImage& img, Src src) {
  CartesianImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const auto [sx, sy] = src(x, y);
      out.values[out.index(x, y)] = img.at(sx, sy);
      out.mask[out.index(x, y)] = img.mask[img.index(sx, sy)];
    }
  return out;
}

CartesianImage flip_h(const CartesianImage& img) {
  const int n = img.width;
  return remap(img, [n](int x, int y) { return std::pair{n - 1 - x, y}; });
}

CartesianImage rot_ccw(const CartesianImage& img) {
  const int n = img.width;
  return remap(img, [n](int x, int y) { return std::pair{n - 1 - y, x}; });
}

CartesianImage rot_cw(const CartesianImage& img) {
  const int n = img.width;
  return remap(img, [n](int x, int y) { return std::pair{y, n - 1 - x}; });
}

}  // namespace

CartesianImage augment(const CartesianImage& img, Augmentation a) {
  require_square(img);
  CartesianImage out = a.flip ? flip_h(img) : img;
  for (int r = 0; r < a.quarter_turns; ++r) out = rot_ccw(out);
  return out;
}

CartesianImage invert(const CartesianImage& img, Augmentation a) {
  require_square(img);
  CartesianImage out = img;
  for (int r = 0; r < a.quarter_turns; ++r) out = rot_cw(out);
  return a.flip ? flip_h(out) : out;
}

// ---------------------------------------------------------------------------
// configuration

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (eval_every < 1 || epochs % eval_every != 0)
    throw ConfigError("eval_every must be positive and divide epochs (" + std::to_string(epochs) + ")");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (crop_size < 16) throw ConfigError("crop_size must be at least 16");
  if (crop_margin < 0) throw ConfigError("crop_margin must be non-negative");
  if (!(frames_fraction > 0.0 && frames_fraction <= 1.0)) throw ConfigError("frames_fraction must be in (0, 1]");
  if (linear_factor < 2) throw ConfigError("linear_factor must be at least 2");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  degrade.validate();
  loss.validate();
  lr.validate();
  network.validate();
}

TrainConfig TrainConfig::paper() { return TrainConfig{}; }

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.epochs = 500;
  c.eval_every = 50;
  c.batch_size = 4;
  return c;
}

// ---------------------------------------------------------------------------
// training items

Degrader::Degrader(const FibrePattern& source_pattern, int outer, const DegradeConfig& cfg)
    : cfg_(cfg), outer_(outer) {
  cfg_.validate();
  if (outer < 1) throw ConfigError("degrader grid must be positive");
  if (cfg_.kernel == KernelKind::voronoi) kernel_.emplace(source_pattern, outer, outer);
}

CartesianImage Degrader::operator()(const CartesianImage& hr, std::uint64_t noise_seed) const {
  if (hr.width != outer_ || hr.height != outer_) throw ConfigError("degrader input does not match its grid");
  if (kernel_) return kernel_->apply(hr, cfg_.noise, noise_seed);
  DegradeConfig c = cfg_;
  c.seed = noise_seed;
  return downscale_bicubic(hr, c);
}

TrainingPair build_training_item(const CartesianImage& hr_role, const Degrader& degrader, const TrainConfig& cfg,
                                 std::uint64_t iteration_seed) {
  const int outer = degrader.outer();
  if (hr_role.width < outer || hr_role.height < outer) throw ConfigError("HR-role image is smaller than the crop");
  Rng rng(iteration_seed);
  const Augmentation aug = Augmentation::from_index(std::uniform_int_distribution<int>(0, 7)(rng));
  const CartesianImage hr_outer = augment(center_crop(hr_role, outer), aug);
  const CartesianImage lr_outer = degrader(hr_outer, derive_seed(iteration_seed, {1}));

  const int margin = cfg.crop_margin;
  if (outer - 2 * margin < 1) throw ConfigError("crop margin leaves no training crop");
  TrainingPair pair{trim(lr_outer, margin), trim(hr_outer, margin)};
  if (pair.lr.masked_count() != pair.lr.size() || pair.hr.masked_count() != pair.hr.size())
    throw ConfigError("training crop is not fully inside the field of view; increase crop_margin");
  return pair;
}

TrainingPair build_training_item(const CartesianImage& hr_role, const FibrePattern& source_pattern,
                                 const TrainConfig& cfg, std::uint64_t iteration_seed) {
  const int outer = std::min({cfg.crop_size + 2 * cfg.crop_margin, hr_role.width, hr_role.height});
  return build_training_item(hr_role, Degrader(source_pattern, outer, cfg.degrade), cfg, iteration_seed);
}

CropGeometry resolve_crop(const CartesianImage& pseudo_hr, const TrainConfig& cfg) {
  const int wanted = cfg.crop_size + 2 * cfg.crop_margin;
  const int available = largest_centered_square_in_mask(pseudo_hr);
  CropGeometry g;
  g.outer = std::min(wanted, available);
  g.crop = g.outer - 2 * cfg.crop_margin;
  g.shrunk = g.outer < wanted;
  if (g.crop < 16) {
    throw ConfigError("field of view too small: largest masked square " + std::to_string(available) +
                      " leaves a crop of " + std::to_string(g.crop) + " (< 16)");
  }
  return g;
}

// ---------------------------------------------------------------------------
// training loop

namespace {

enum SeedTag : std::uint64_t { kInitTag = 0x1a17, kPickTag = 0x91c4, kItemTag = 0x17e3 };

void log_line(const TrainCallbacks& cb, const std::string& s) {
  if (cb.log) cb.log(s);
}

void add_into(NetworkParams<float>& acc, const NetworkParams<float>& g, float scale) {
  std::vector<const std::vector<float>*> src;
  g.for_each_tensor([&](const std::vector<float>& t) { src.push_back(&t); });
  std::size_t k = 0;
  acc.for_each_tensor([&](std::vector<float>& t) {
    const std::vector<float>& s = *src[k++];
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += scale * s[i];
  });
}

struct ItemResult {
  double loss = 0.0;
  NetworkParams<float> grads;
};

ItemResult item_gradient(const NetworkParams<float>& params, const TrainingPair& pair, const LossConfig& loss_cfg,
                         const FeatureExtractor& fx) {
  const Tensor<float> lr = to_tensor<float>(pair.lr);
  const Tensor<float> hr = to_tensor<float>(pair.hr);
  ForwardCache<float> cache;
  const Tensor<float> out = forward(params, lr, &cache);
  LossValue<float> lv = total_loss(loss_cfg, fx, hr, out);
  ItemResult r;
  r.loss = lv.value;
  if (std::isfinite(lv.value)) r.grads = backward(params, cache, lv.grad);
  return r;
}

// Shared optimiser loop. `make_item(epoch, b)` builds one training pair;
// `after_round(round)` runs every eval_every epochs.
template <class MakeItem, class AfterRound>
void optimise(TrainResult& res, const TrainConfig& cfg, const TrainCallbacks& cb, MakeItem make_item,
              AfterRound after_round) {
  const FeatureExtractor fx = cfg.loss.make_extractor();
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  std::vector<ItemResult> items(batch);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    parallel_for(batch, cfg.threads, [&](std::size_t b) {
      items[b] = item_gradient(res.params, make_item(epoch, static_cast<int>(b)), cfg.loss, fx);
    });

    double loss = 0.0;
    for (const ItemResult& it : items) loss += it.loss;
    loss /= static_cast<double>(batch);

    Checkpoint last{res.params, res.optimizer, {{"epoch", std::to_string(epoch)}}};
    if (!std::isfinite(loss)) {
      throw TrainingDiverged("loss became non-finite at epoch " + std::to_string(epoch + 1), std::move(last),
                             epoch + 1);
    }
    NetworkParams<float> grads = NetworkParams<float>::zeros(cfg.network);
    const float inv = 1.0f / static_cast<float>(batch);
    for (const ItemResult& it : items) add_into(grads, it.grads, inv);
    if (cfg.loss.weight_decay > 0) add_into(grads, res.params, static_cast<float>(cfg.loss.weight_decay));

    const double lr = lr_schedule(res.optimizer.step, cfg.lr);
    try {
      adam_step(res.params, grads, res.optimizer, lr, cfg.adam);
    } catch (const NumericError& e) {
      throw TrainingDiverged(std::string(e.what()) + " at epoch " + std::to_string(epoch + 1), std::move(last),
                             epoch + 1);
    }
    if (!res.params.all_finite()) {
      throw TrainingDiverged("parameters became non-finite at epoch " + std::to_string(epoch + 1), std::move(last),
                             epoch + 1);
    }

    const LossRow row{epoch + 1, loss, lr};
    res.trace.push_back(row);
    if (cb.on_epoch) cb.on_epoch(row);
    if ((epoch + 1) % cfg.eval_every == 0) {
      const int round = (epoch + 1) / cfg.eval_every;
      after_round(round);
      if (cb.on_eval) {
        Checkpoint c{res.params, res.optimizer,
                     {{"epoch", std::to_string(epoch + 1)},
                      {"round", std::to_string(round)},
                      {"training_set_size", std::to_string(res.training_set_size)}}};
        cb.on_eval(round, c);
      }
    }
  }
}

}  // namespace

TrainResult train_zero_shot(const std::vector<InputFrame>& frames, const TrainConfig& cfg,
                            const TrainCallbacks& callbacks) {
  cfg.validate();
  if (frames.empty()) throw ConfigError("zero-shot training needs at least one frame");

  // One HR-role image per frame (its pseudo-HR), then one per evaluation round.
  std::vector<CartesianImage> pseudo;
  CropGeometry geo;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    CartesianImage ph = make_pseudo_hr(frames[f].image, frames[f].pattern, cfg.linear_factor).image;
    const CropGeometry g = resolve_crop(ph, cfg);
    if (f == 0 || g.outer < geo.outer) geo = g;
    pseudo.push_back(std::move(ph));
  }
  if (geo.shrunk) {
    log_line(callbacks, "crop shrunk to " + std::to_string(geo.crop) + " (outer " + std::to_string(geo.outer) +
                            ") to fit the pseudo-HR field of view");
  }

  // Every frame of a video shares one fibre bundle, so one kernel per distinct pattern.
  std::vector<Degrader> degraders;
  std::vector<std::size_t> degrader_of;  // per training-set entry
  std::vector<const FibrePattern*> patterns;
  auto degrader_for = [&](const FibrePattern& p) {
    for (std::size_t i = 0; i < patterns.size(); ++i)
      if (patterns[i]->fibres == p.fibres && patterns[i]->width == p.width && patterns[i]->height == p.height)
        return i;
    patterns.push_back(&p);
    degraders.emplace_back(p, geo.outer, cfg.degrade);
    return patterns.size() - 1;
  };

  std::vector<CartesianImage> training_set;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    training_set.push_back(center_crop(pseudo[f], geo.outer));
    degrader_of.push_back(degrader_for(frames[f].pattern));
  }
  const std::size_t father_degrader = degrader_of.front();
  const CartesianImage father_input = center_crop(frames.front().image, geo.outer);

  TrainResult res;
  res.geometry = geo;
  res.params = NetworkParams<float>::initialise(cfg.network, derive_seed(cfg.seed, {kInitTag}));
  res.optimizer = OptimizerState<float>::for_params(res.params);
  res.training_set_size = training_set.size();

  auto make_item = [&](int epoch, int b) {
    const std::uint64_t pick_seed = derive_seed(cfg.seed, {kPickTag, static_cast<std::uint64_t>(epoch),
                                                           static_cast<std::uint64_t>(b)});
    Rng rng(pick_seed);
    const std::size_t idx = std::uniform_int_distribution<std::size_t>(0, training_set.size() - 1)(rng);
    const std::uint64_t item_seed =
        derive_seed(cfg.seed, {kItemTag, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(b)});
    return build_training_item(training_set[idx], degraders[degrader_of[idx]], cfg, item_seed);
  };
  auto after_round = [&](int round) {
    training_set.push_back(predict_median8(res.params, father_input, cfg.threads));
    degrader_of.push_back(father_degrader);
    res.training_set_size = training_set.size();
    log_line(callbacks, "round " + std::to_string(round) + ": training set " + std::to_string(training_set.size()));
  };
  optimise(res, cfg, callbacks, make_item, after_round);
  return res;
}

TrainResult train_supervised(const std::vector<TrainingPair>& pairs, const TrainConfig& cfg,
                             const TrainCallbacks& callbacks) {
  cfg.validate();
  if (pairs.empty()) throw ConfigError("supervised training needs at least one (LR, HR) pair");

  // Crops are drawn inside the largest centred square covered by both masks.
  std::vector<int> square(pairs.size());
  int crop = cfg.crop_size;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const TrainingPair& p = pairs[i];
    if (p.lr.width != p.hr.width || p.lr.height != p.hr.height)
      throw ConfigError("LR and HR of pair " + std::to_string(i) + " differ in size");
    CartesianImage joint = p.hr;
    joint.mask = mask_intersection(p.lr, p.hr);
    square[i] = largest_centered_square_in_mask(joint);
    crop = std::min(crop, square[i]);
  }
  if (crop < 16) throw ConfigError("supervised pairs leave a crop below 16 pixels");

  TrainResult res;
  res.geometry = {crop, crop, crop < cfg.crop_size};
  res.params = NetworkParams<float>::initialise(cfg.network, derive_seed(cfg.seed, {kInitTag}));
  res.optimizer = OptimizerState<float>::for_params(res.params);
  res.training_set_size = pairs.size();

  auto make_item = [&](int epoch, int b) {
    Rng rng(derive_seed(cfg.seed, {kItemTag, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(b)}));
    const std::size_t idx = std::uniform_int_distribution<std::size_t>(0, pairs.size() - 1)(rng);
    const TrainingPair& p = pairs[idx];
    const int s = square[idx];
    const int x0 = (p.hr.width - s) / 2 + std::uniform_int_distribution<int>(0, s - crop)(rng);
    const int y0 = (p.hr.height - s) / 2 + std::uniform_int_distribution<int>(0, s - crop)(rng);
    const Augmentation aug = Augmentation::from_index(std::uniform_int_distribution<int>(0, 7)(rng));
    return TrainingPair{augment(pcle::crop(p.lr, x0, y0, crop, crop), aug),
                        augment(pcle::crop(p.hr, x0, y0, crop, crop), aug)};
  };
  optimise(res, cfg, callbacks, make_item, [](int) {});
  return res;
}

// ---------------------------------------------------------------------------
// inference

MedianPrediction predict_median8_detail(const NetworkParams<float>& params, const CartesianImage& frame,
                                        int threads) {
  MedianPrediction res;
  const auto augs = Augmentation::all();
  parallel_for(augs.size(), threads, [&](std::size_t k) {
    CartesianImage in = augment(frame, augs[k]);
    const Tensor<float> t = to_tensor<float>(in);
    const Tensor<float> y = forward(params, t);
    for (std::size_t i = 0; i < in.values.size(); ++i)
      in.values[i] += static_cast<double>(y.data[i]) - static_cast<double>(t.data[i]);
    CartesianImage c = invert(in, augs[k]);
    c.clamp_and_mask();
    res.candidates[k] = std::move(c);
  });

  res.output = CartesianImage(frame.width, frame.height);
  res.output.mask = frame.mask;
  std::array<double, 8> v;
  for (std::size_t i = 0; i < frame.values.size(); ++i) {
    if (!frame.mask[i]) {
      res.output.values[i] = 0.0;
      continue;
    }
    for (std::size_t k = 0; k < 8; ++k) v[k] = res.candidates[k].values[i];
    std::sort(v.begin(), v.end());
    res.output.values[i] = 0.5 * (v[3] + v[4]);
  }
  return res;
}

CartesianImage predict_median8(const NetworkParams<float>& params, const CartesianImage& frame, int threads) {
  return predict_median8_detail(params, frame, threads).output;
}

int training_frame_count(std::size_t n, double fraction) {
  if (n == 0) throw ConfigError("video has no frames");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("frames_fraction must be in (0, 1]");
  // Guard against 0.1 * 10 landing a hair above 1.
  const double exact = fraction * static_cast<double>(n);
  const int k = static_cast<int>(std::ceil(exact - 1e-9));
  return std::clamp(k, 1, static_cast<int>(n));
}

VideoResult process_video(const std::vector<InputFrame>& frames, const TrainConfig& cfg,
                          const TrainCallbacks& callbacks) {
  cfg.validate();
  VideoResult out;
  out.frames_used = training_frame_count(frames.size(), cfg.frames_fraction);
  const std::vector<InputFrame> train(frames.begin(), frames.begin() + out.frames_used);
  out.training = train_zero_shot(train, cfg, callbacks);
  out.outputs.reserve(frames.size());
  for (const InputFrame& f : frames) out.outputs.push_back(predict_median8(out.training.params, f.image, cfg.threads));
  return out;
}

}  // namespace pcle
