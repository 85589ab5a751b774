#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pcle/checkpoint.hpp"
#include "pcle/degrade.hpp"
#include "pcle/error.hpp"
#include "pcle/geometry.hpp"
#include "pcle/image.hpp"
#include "pcle/loss.hpp"
#include "pcle/network.hpp"

namespace pcle {

/// Element of the dihedral group of the square: optional horizontal flip
/// followed by `quarter_turns` counter-clockwise quarter turns.
struct Augmentation {
  int quarter_turns = 0;  // 0..3
  bool flip = false;

  static std::array<Augmentation, 8> all();
  static Augmentation from_index(int i);
  int index() const { return quarter_turns + (flip ? 4 : 0); }
  bool operator==(const Augmentation&) const = default;
};

/// Lossless pixel permutation (values and mask). Throws ConfigError on non-square input.
CartesianImage augment(const CartesianImage& img, Augmentation a);
/// invert(augment(x, a), a) == x
CartesianImage invert(const CartesianImage& img, Augmentation a);

struct TrainConfig {
  int epochs = 1000;
  int eval_every = 100;
  int batch_size = 8;
  int crop_size = 340;
  int crop_margin = 4;  // extra border degraded with the crop, then trimmed
  double frames_fraction = 0.1;
  int linear_factor = 2;
  DegradeConfig degrade;
  LossConfig loss;
  LrSchedule lr;
  AdamConfig adam;
  NetworkShape network;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;

  static TrainConfig paper();
  /// Reduced budget for 128^2 synthetic videos on a single CPU core.
  static TrainConfig desk();
};

/// An input pCLE frame with the fibre pattern it was reconstructed from
/// (fitted to the frame's grid).
struct InputFrame {
  CartesianImage image;
  FibrePattern pattern;
};

struct TrainingPair {
  CartesianImage lr;
  CartesianImage hr;
};

/// Degradation for one HR-role geometry: the Voronoi kernel of the source
/// pattern fitted to an outer x outer grid (unused for bicubic).
class Degrader {
 public:
  Degrader(const FibrePattern& source_pattern, int outer, const DegradeConfig& cfg);
  CartesianImage operator()(const CartesianImage& hr, std::uint64_t noise_seed) const;
  int outer() const { return outer_; }

 private:
  DegradeConfig cfg_;
  int outer_;
  std::optional<VoronoiKernel> kernel_;
};

/// Central (crop + 2 margin) square of `hr_role`, random dihedral augmentation,
/// degradation with a noise seed derived from `iteration_seed`, margin trimmed
/// from both images. Pure function of its arguments.
TrainingPair build_training_item(const CartesianImage& hr_role, const Degrader& degrader, const TrainConfig& cfg,
                                 std::uint64_t iteration_seed);
/// Convenience overload constructing the degrader from `source_pattern`.
TrainingPair build_training_item(const CartesianImage& hr_role, const FibrePattern& source_pattern,
                                 const TrainConfig& cfg, std::uint64_t iteration_seed);

struct CropGeometry {
  int crop = 0;
  int outer = 0;
  bool shrunk = false;
};

/// Resolves the crop against the pseudo-HR: outer = min(crop + 2 margin, largest
/// even centred square inside the mask). Throws ConfigError when the crop would
/// fall below 16.
CropGeometry resolve_crop(const CartesianImage& pseudo_hr, const TrainConfig& cfg);

struct LossRow {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  double lr = 0.0;
};

struct TrainCallbacks {
  std::function<void(const LossRow&)> on_epoch;
  /// After every evaluation round (HR father appended for zero-shot runs).
  std::function<void(int round, const Checkpoint&)> on_eval;
  std::function<void(const std::string&)> log;
};

struct TrainResult {
  NetworkParams<float> params;
  OptimizerState<float> optimizer;
  std::vector<LossRow> trace;
  std::size_t training_set_size = 0;
  CropGeometry geometry;
};

/// Raised when the loss or a gradient becomes non-finite.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, Checkpoint last_finite, int epoch)
      : NumericError(what), last_finite_(std::move(last_finite)), epoch_(epoch) {}
  const Checkpoint& last_finite() const { return last_finite_; }
  int epoch() const { return epoch_; }

 private:
  Checkpoint last_finite_;
  int epoch_;
};

/// Zero-shot training on the given frames (all of them; see process_video for
/// the leading-fraction rule).
TrainResult train_zero_shot(const std::vector<InputFrame>& frames, const TrainConfig& cfg,
                            const TrainCallbacks& callbacks = {});

/// Supervised training on fixed (LR, HR) pairs: random crops, random
/// augmentation, no degradation and no HR fathers.
TrainResult train_supervised(const std::vector<TrainingPair>& pairs, const TrainConfig& cfg,
                             const TrainCallbacks& callbacks = {});

struct MedianPrediction {
  CartesianImage output;                    // per-pixel median of the candidates
  std::array<CartesianImage, 8> candidates;  // inverse-augmented, clamped, masked
};

/// Runs the network on all 8 augmentations, inverts them and takes the per-pixel
/// median (mean of the 4th and 5th order statistics). The residual is added in
/// float64 to the input, so a zero-residual network returns the input exactly.
MedianPrediction predict_median8_detail(const NetworkParams<float>& params, const CartesianImage& frame,
                                        int threads = 1);
CartesianImage predict_median8(const NetworkParams<float>& params, const CartesianImage& frame, int threads = 1);

/// ceil(fraction * n), at least 1.
int training_frame_count(std::size_t n, double fraction);

struct VideoResult {
  std::vector<CartesianImage> outputs;
  TrainResult training;
  int frames_used = 0;
};

/// Trains once on the leading fraction of the frames, then predicts every frame.
VideoResult process_video(const std::vector<InputFrame>& frames, const TrainConfig& cfg,
                          const TrainCallbacks& callbacks = {});

}  // namespace pcle
