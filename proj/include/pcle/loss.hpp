#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pcle/network.hpp"

namespace pcle {

/// Fixed convolutional feature extractor for the perceptual term. Single-channel
/// inputs are replicated to the first stage's channel count; every stage is a
/// valid-padded convolution followed by ReLU and is tapped.
class FeatureExtractor {
 public:
  /// Default stack 3->8 (stride 1), 8->16 (stride 2), 16->32 (stride 2), all 3x3,
  /// He-normal weights drawn from `seed`, channel weights 1/C_l.
  static FeatureExtractor builtin(std::uint64_t seed);
  static FeatureExtractor load(const std::filesystem::path& path);

  FeatureExtractor(std::vector<ConvLayer<double>> stages, std::vector<std::vector<double>> channel_weights);

  void save(const std::filesystem::path& path) const;

  std::size_t stage_count() const { return stages_d_.size(); }
  int input_channels() const { return stages_d_.front().shape.in_channels; }
  const std::vector<std::vector<double>>& channel_weights() const { return weights_; }
  const std::vector<ConvLayer<double>>& stages() const { return stages_d_; }

  /// Smallest square input side accepted.
  int min_side() const;

  template <class T>
  const std::vector<ConvLayer<T>>& stages_as() const;

 private:
  std::vector<ConvLayer<double>> stages_d_;
  std::vector<ConvLayer<float>> stages_f_;
  std::vector<std::vector<double>> weights_;
};

struct LossConfig {
  double lambda_l1 = 5.0;
  bool perceptual_enabled = true;
  std::uint64_t extractor_seed = 0x5eed;
  std::string extractor_weights;  // empty: builtin random extractor
  double weight_decay = 0.0;      // L2 coefficient on the network weights

  void validate() const;
  FeatureExtractor make_extractor() const;
};

template <class T>
struct LossValue {
  double value = 0.0;
  Tensor<T> grad;  // d value / d prediction
};

/// mean |reference - prediction|
template <class T>
double l1_term(const Tensor<T>& reference, const Tensor<T>& prediction);

/// sum over taps l of (1 / (H_l W_l)) * sum_{h,w} || w_l * (phi_l(ref) - phi_l(pred)) ||^2
template <class T>
double perceptual_term(const FeatureExtractor& fx, const Tensor<T>& reference, const Tensor<T>& prediction);

/// Same value as perceptual_term plus its gradient with respect to the prediction.
template <class T>
LossValue<T> perceptual_with_grad(const FeatureExtractor& fx, const Tensor<T>& reference, const Tensor<T>& prediction);

/// perceptual + lambda_l1 * L1, with the exact gradient (L1 subgradient 0 at ties).
template <class T>
LossValue<T> total_loss(const LossConfig& cfg, const FeatureExtractor& fx, const Tensor<T>& reference,
                        const Tensor<T>& prediction);

}  // namespace pcle
