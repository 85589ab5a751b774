#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pcle/image.hpp"

namespace pcle {

/// Dense C x H x W tensor (one image, no batch axis).
template <class T>
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int c, int h, int w, T fill = T(0))
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  T& at(int c, int y, int x) { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  T at(int c, int y, int x) const { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  bool same_shape(const Tensor& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
  bool operator==(const Tensor&) const = default;
};

/// Values of the image as a 1 x H x W tensor (mask dropped).
template <class T>
Tensor<T> to_tensor(const CartesianImage& img);
/// Single-channel tensor back to an image carrying `mask_source`'s mask; not clamped.
template <class T>
CartesianImage to_image(const Tensor<T>& t, const CartesianImage& mask_source);

enum class Padding { reflect, valid };

struct ConvShape {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 3;
  int stride = 1;
  Padding padding = Padding::reflect;

  bool operator==(const ConvShape&) const = default;
};

/// Output spatial size along one axis; throws ConfigError when the input is too small.
int conv_output_size(const ConvShape& s, int n);

template <class T>
struct ConvLayer {
  ConvShape shape;
  std::vector<T> weight;  // out x (in * k * k), row-major
  std::vector<T> bias;    // out

  explicit ConvLayer(ConvShape s = {})
      : shape(s),
        weight(static_cast<std::size_t>(s.out_channels) * s.in_channels * s.kernel * s.kernel, T(0)),
        bias(static_cast<std::size_t>(s.out_channels), T(0)) {}
  bool operator==(const ConvLayer&) const = default;
};

/// Forward convolution. When `col` is non-null it receives the im2col matrix
/// needed by conv_backward.
template <class T>
Tensor<T> conv_forward(const ConvLayer<T>& layer, const Tensor<T>& in, std::vector<T>* col = nullptr);

/// Backward convolution for an input of size in_h x in_w. Accumulates weight and
/// bias gradients into `grad` when non-null; returns dL/d(input) when
/// `want_input_grad` is set (an empty tensor otherwise).
template <class T>
Tensor<T> conv_backward(const ConvLayer<T>& layer, int in_h, int in_w, const std::vector<T>& col,
                        const Tensor<T>& dout, ConvLayer<T>* grad, bool want_input_grad);

/// Residual network: `hidden_layers` conv layers with `channels` filters of size
/// kernel x kernel and ReLU, then a 1x1 linear layer to one channel, added to the input.
struct NetworkShape {
  int hidden_layers = 7;
  int channels = 64;
  int kernel = 3;

  void validate() const;
  bool operator==(const NetworkShape&) const = default;
};

template <class T>
struct NetworkParams {
  NetworkShape shape;
  std::vector<ConvLayer<T>> layers;

  /// All weights and biases zero: the network is the identity map.
  static NetworkParams zeros(const NetworkShape& shape = {});
  /// He-normal hidden layers, zero biases, zero output layer.
  static NetworkParams initialise(const NetworkShape& shape, std::uint64_t seed);

  /// Visits weight then bias of every layer in order.
  void for_each_tensor(const std::function<void(std::vector<T>&)>& fn);
  void for_each_tensor(const std::function<void(const std::vector<T>&)>& fn) const;
  std::size_t parameter_count() const;
  bool all_finite() const;

  bool operator==(const NetworkParams&) const = default;
};

template <class To, class From>
NetworkParams<To> convert_params(const NetworkParams<From>& p);

template <class T>
struct ForwardCache {
  std::vector<Tensor<T>> inputs;     // input of every layer (post-ReLU activations)
  std::vector<std::vector<T>> cols;  // im2col of every layer
};

/// output = input + residual(input); H, W >= 3. Throws NumericError on non-finite input.
template <class T>
Tensor<T> forward(const NetworkParams<T>& params, const Tensor<T>& input, ForwardCache<T>* cache = nullptr);

/// Gradients of <loss_grad, forward(input)> with respect to every parameter,
/// reusing the activations of a forward pass made with the same parameters.
template <class T>
NetworkParams<T> backward(const NetworkParams<T>& params, const ForwardCache<T>& cache, const Tensor<T>& loss_grad);

template <class T>
struct OptimizerState {
  std::vector<std::vector<T>> m;  // one entry per parameter tensor, for_each_tensor order
  std::vector<std::vector<T>> v;
  std::int64_t step = 0;

  static OptimizerState for_params(const NetworkParams<T>& p);
  bool operator==(const OptimizerState&) const = default;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update. Non-finite gradients raise NumericError and
/// leave params and state untouched.
template <class T>
void adam_step(NetworkParams<T>& params, const NetworkParams<T>& grads, OptimizerState<T>& state, double lr,
               const AdamConfig& cfg = {});

struct LrSchedule {
  double lr0 = 1e-3;
  double decay_rate = 0.95;
  std::int64_t decay_steps = 1000;
  double lr_floor = 1e-7;

  void validate() const;
};

/// max(floor, lr0 * decay_rate^(step / decay_steps)) with a real exponent.
double lr_schedule(std::int64_t global_step, const LrSchedule& s = {});

}  // namespace pcle
