#include "pcle/network.hpp"

#include <cmath>
#include <random>
#include <string>

#include "pcle/error.hpp"
#include "pcle/rng.hpp"
#include "pcle/simd/gemm.hpp"

namespace pcle {

template <class T>
Tensor<T> to_tensor(const CartesianImage& img) {
  Tensor<T> t(1, img.height, img.width);
  for (std::size_t i = 0; i < img.values.size(); ++i) t.data[i] = static_cast<T>(img.values[i]);
  return t;
}

template <class T>
CartesianImage to_image(const Tensor<T>& t, const CartesianImage& mask_source) {
  if (t.channels != 1 || t.width != mask_source.width || t.height != mask_source.height)
    throw ConfigError("tensor shape does not match the image");
  CartesianImage img(t.width, t.height);
  for (std::size_t i = 0; i < t.data.size(); ++i) img.values[i] = static_cast<double>(t.data[i]);
  img.mask = mask_source.mask;
  for (std::size_t i = 0; i < img.values.size(); ++i)
    if (!img.mask[i]) img.values[i] = 0.0;
  return img;
}

int conv_output_size(const ConvShape& s, int n) {
  const int pad = s.padding == Padding::reflect ? s.kernel / 2 : 0;
  if (s.padding == Padding::reflect && n <= pad)
    throw ConfigError("input of size " + std::to_string(n) + " is too small for reflect padding");
  const int span = n + 2 * pad - s.kernel;
  if (span < 0)
    throw ConfigError("input of size " + std::to_string(n) + " is smaller than the " + std::to_string(s.kernel) +
                      "-pixel kernel");
  return span / s.stride + 1;
}

namespace {

constexpr int kBandPixels = 2048;

int reflect(int i, int n) {
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
  return i;
}

// source index along one axis for every (kernel tap, output position)
std::vector<int> tap_table(const ConvShape& s, int n_in, int n_out) {
  const int pad = s.padding == Padding::reflect ? s.kernel / 2 : 0;
  std::vector<int> t(static_cast<std::size_t>(s.kernel) * n_out);
  for (int k = 0; k < s.kernel; ++k)
    for (int o = 0; o < n_out; ++o) {
      const int i = o * s.stride + k - pad;
      t[static_cast<std::size_t>(k) * n_out + o] = s.padding == Padding::reflect ? reflect(i, n_in) : i;
    }
  return t;
}

// im2col for output rows [oy0, oy1)
template <class T>
void im2col(const ConvShape& s, const Tensor<T>& in, int oh, int ow, int oy0, int oy1, std::vector<T>& col) {
  const auto ty = tap_table(s, in.height, oh);
  const auto tx = tap_table(s, in.width, ow);
  const std::size_t p = static_cast<std::size_t>(oy1 - oy0) * ow;
  col.resize(static_cast<std::size_t>(s.in_channels) * s.kernel * s.kernel * p);
  T* dst = col.data();
  for (int c = 0; c < s.in_channels; ++c) {
    const T* src = in.data.data() + c * in.plane();
    for (int ky = 0; ky < s.kernel; ++ky)
      for (int kx = 0; kx < s.kernel; ++kx) {
        const int* rows = &ty[static_cast<std::size_t>(ky) * oh];
        const int* cols = &tx[static_cast<std::size_t>(kx) * ow];
        for (int oy = oy0; oy < oy1; ++oy) {
          const T* line = src + static_cast<std::size_t>(rows[oy]) * in.width;
          for (int ox = 0; ox < ow; ++ox) *dst++ = line[cols[ox]];
        }
      }
  }
}

template <class T>
void col2im(const ConvShape& s, const std::vector<T>& col, int oh, int ow, Tensor<T>& out) {
  const auto ty = tap_table(s, out.height, oh);
  const auto tx = tap_table(s, out.width, ow);
  const T* src = col.data();
  for (int c = 0; c < s.in_channels; ++c) {
    T* dst = out.data.data() + c * out.plane();
    for (int ky = 0; ky < s.kernel; ++ky)
      for (int kx = 0; kx < s.kernel; ++kx) {
        const int* rows = &ty[static_cast<std::size_t>(ky) * oh];
        const int* cols = &tx[static_cast<std::size_t>(kx) * ow];
        for (int oy = 0; oy < oh; ++oy) {
          T* line = dst + static_cast<std::size_t>(rows[oy]) * out.width;
          for (int ox = 0; ox < ow; ++ox) line[cols[ox]] += *src++;
        }
      }
  }
}

}  // namespace

template <class T>
Tensor<T> conv_forward(const ConvLayer<T>& layer, const Tensor<T>& in, std::vector<T>* col) {
  const ConvShape& s = layer.shape;
  if (in.channels != s.in_channels)
    throw ConfigError("conv expects " + std::to_string(s.in_channels) + " channels, got " +
                      std::to_string(in.channels));
  const int oh = conv_output_size(s, in.height);
  const int ow = conv_output_size(s, in.width);
  const int p = oh * ow;
  const int k = s.in_channels * s.kernel * s.kernel;
  Tensor<T> out(s.out_channels, oh, ow);
  for (int o = 0; o < s.out_channels; ++o)
    std::fill_n(out.data.begin() + static_cast<std::ptrdiff_t>(o) * p, p, layer.bias[o]);
  if (col) {
    im2col(s, in, oh, ow, 0, oh, *col);
    simd::gemm(simd::Trans::no, simd::Trans::no, s.out_channels, p, k, layer.weight.data(), k, col->data(), p,
               out.data.data(), p, true);
    return out;
  }
  // without a cache, work in bands of output rows to keep the im2col buffer small
  const int band = std::max(1, kBandPixels / ow);
  std::vector<T> local;
  for (int oy0 = 0; oy0 < oh; oy0 += band) {
    const int oy1 = std::min(oh, oy0 + band);
    const int bp = (oy1 - oy0) * ow;
    im2col(s, in, oh, ow, oy0, oy1, local);
    simd::gemm(simd::Trans::no, simd::Trans::no, s.out_channels, bp, k, layer.weight.data(), k, local.data(), bp,
               out.data.data() + static_cast<std::size_t>(oy0) * ow, p, true);
  }
  return out;
}

template <class T>
Tensor<T> conv_backward(const ConvLayer<T>& layer, int in_h, int in_w, const std::vector<T>& col,
                        const Tensor<T>& dout, ConvLayer<T>* grad, bool want_input_grad) {
  const ConvShape& s = layer.shape;
  const int oh = conv_output_size(s, in_h);
  const int ow = conv_output_size(s, in_w);
  if (dout.channels != s.out_channels || dout.height != oh || dout.width != ow)
    throw ConfigError("output gradient shape does not match the layer output");
  const int p = oh * ow;
  const int k = s.in_channels * s.kernel * s.kernel;
  if (col.size() != static_cast<std::size_t>(k) * p) throw ConfigError("im2col buffer does not match the layer");
  if (grad) {
    simd::gemm(simd::Trans::no, simd::Trans::yes, s.out_channels, k, p, dout.data.data(), p, col.data(), p,
               grad->weight.data(), k, true);
    for (int o = 0; o < s.out_channels; ++o) {
      double acc = 0.0;
      const T* row = dout.data.data() + static_cast<std::size_t>(o) * p;
      for (int i = 0; i < p; ++i) acc += row[i];
      grad->bias[o] += static_cast<T>(acc);
    }
  }
  if (!want_input_grad) return {};
  std::vector<T> dcol(static_cast<std::size_t>(k) * p);
  simd::gemm(simd::Trans::yes, simd::Trans::no, k, p, s.out_channels, layer.weight.data(), k, dout.data.data(), p,
             dcol.data(), p, false);
  Tensor<T> din(s.in_channels, in_h, in_w);
  col2im(s, dcol, oh, ow, din);
  return din;
}

void NetworkShape::validate() const {
  if (hidden_layers < 1) throw ConfigError("network needs at least one hidden layer");
  if (channels < 1) throw ConfigError("network channel count must be positive");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("hidden kernel size must be odd and positive");
}

namespace {

template <class T>
std::vector<ConvLayer<T>> make_layers(const NetworkShape& s) {
  s.validate();
  std::vector<ConvLayer<T>> layers;
  for (int l = 0; l < s.hidden_layers; ++l)
    layers.emplace_back(ConvShape{l == 0 ? 1 : s.channels, s.channels, s.kernel, 1, Padding::reflect});
  layers.emplace_back(ConvShape{s.channels, 1, 1, 1, Padding::reflect});
  return layers;
}

}  // namespace

template <class T>
NetworkParams<T> NetworkParams<T>::zeros(const NetworkShape& shape) {
  NetworkParams p;
  p.shape = shape;
  p.layers = make_layers<T>(shape);
  return p;
}

template <class T>
NetworkParams<T> NetworkParams<T>::initialise(const NetworkShape& shape, std::uint64_t seed) {
  NetworkParams p = zeros(shape);
  for (int l = 0; l < shape.hidden_layers; ++l) {
    ConvLayer<T>& layer = p.layers[static_cast<std::size_t>(l)];
    const int fan_in = layer.shape.in_channels * layer.shape.kernel * layer.shape.kernel;
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(l)}));
    std::normal_distribution<double> g(0.0, std::sqrt(2.0 / fan_in));
    for (T& w : layer.weight) w = static_cast<T>(g(rng));
  }
  return p;
}

template <class T>
void NetworkParams<T>::for_each_tensor(const std::function<void(std::vector<T>&)>& fn) {
  for (ConvLayer<T>& l : layers) {
    fn(l.weight);
    fn(l.bias);
  }
}

template <class T>
void NetworkParams<T>::for_each_tensor(const std::function<void(const std::vector<T>&)>& fn) const {
  for (const ConvLayer<T>& l : layers) {
    fn(l.weight);
    fn(l.bias);
  }
}

template <class T>
std::size_t NetworkParams<T>::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&](const std::vector<T>& t) { n += t.size(); });
  return n;
}

template <class T>
bool NetworkParams<T>::all_finite() const {
  bool ok = true;
  for_each_tensor([&](const std::vector<T>& t) {
    for (T v : t) ok = ok && std::isfinite(v);
  });
  return ok;
}

template <class To, class From>
NetworkParams<To> convert_params(const NetworkParams<From>& p) {
  NetworkParams<To> out = NetworkParams<To>::zeros(p.shape);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    for (std::size_t i = 0; i < p.layers[l].weight.size(); ++i)
      out.layers[l].weight[i] = static_cast<To>(p.layers[l].weight[i]);
    for (std::size_t i = 0; i < p.layers[l].bias.size(); ++i)
      out.layers[l].bias[i] = static_cast<To>(p.layers[l].bias[i]);
  }
  return out;
}

template <class T>
Tensor<T> forward(const NetworkParams<T>& params, const Tensor<T>& input, ForwardCache<T>* cache) {
  if (input.channels != 1) throw ConfigError("network input must have one channel");
  if (input.height < 3 || input.width < 3) throw ConfigError("network input must be at least 3x3");
  for (T v : input.data)
    if (!std::isfinite(v)) throw NumericError("non-finite network input");
  if (cache) {
    cache->inputs.assign(params.layers.size(), {});
    cache->cols.assign(params.layers.size(), {});
  }
  Tensor<T> x = input;
  const std::size_t last = params.layers.size() - 1;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    Tensor<T> y = conv_forward(params.layers[l], x, cache ? &cache->cols[l] : nullptr);
    if (l < last)
      for (T& v : y.data) v = v > T(0) ? v : T(0);
    if (cache) cache->inputs[l] = std::move(x);
    x = std::move(y);
  }
  for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += input.data[i];
  return x;
}

template <class T>
NetworkParams<T> backward(const NetworkParams<T>& params, const ForwardCache<T>& cache, const Tensor<T>& loss_grad) {
  if (cache.inputs.size() != params.layers.size()) throw ConfigError("forward cache does not match the network");
  const Tensor<T>& input = cache.inputs.front();
  if (!loss_grad.same_shape(input)) throw ConfigError("loss gradient shape does not match the network output");
  NetworkParams<T> grads = NetworkParams<T>::zeros(params.shape);
  const int h = input.height, w = input.width;
  Tensor<T> g = loss_grad;
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    g = conv_backward(params.layers[l], h, w, cache.cols[l], g, &grads.layers[l], l > 0);
    if (l > 0) {
      const Tensor<T>& act = cache.inputs[l];
      for (std::size_t i = 0; i < g.data.size(); ++i)
        if (!(act.data[i] > T(0))) g.data[i] = T(0);
    }
  }
  return grads;
}

template <class T>
OptimizerState<T> OptimizerState<T>::for_params(const NetworkParams<T>& p) {
  OptimizerState s;
  p.for_each_tensor([&](const std::vector<T>& t) {
    s.m.emplace_back(t.size(), T(0));
    s.v.emplace_back(t.size(), T(0));
  });
  return s;
}

template <class T>
void adam_step(NetworkParams<T>& params, const NetworkParams<T>& grads, OptimizerState<T>& state, double lr,
               const AdamConfig& cfg) {
  if (!(lr > 0)) throw ConfigError("learning rate must be positive");
  if (!(grads.shape == params.shape)) throw ConfigError("gradient shape does not match the parameters");
  if (!grads.all_finite()) throw NumericError("non-finite gradient");
  if (state.m.empty()) state = OptimizerState<T>::for_params(params);

  std::vector<const std::vector<T>*> g;
  grads.for_each_tensor([&](const std::vector<T>& t) { g.push_back(&t); });
  const std::int64_t t = state.step + 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  std::size_t idx = 0;
  params.for_each_tensor([&](std::vector<T>& p) {
    const std::vector<T>& gi = *g[idx];
    std::vector<T>& m = state.m[idx];
    std::vector<T>& v = state.v[idx];
    if (m.size() != p.size()) throw ConfigError("optimizer state does not match the parameters");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gv = gi[i];
      const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gv;
      const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gv * gv;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      p[i] = static_cast<T>(p[i] - lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.epsilon));
    }
    ++idx;
  });
  state.step = t;
}

void LrSchedule::validate() const {
  if (!(lr_floor > 0) || !(lr0 > lr_floor)) throw ConfigError("learning rates must satisfy lr0 > lr_floor > 0");
  if (decay_steps < 1) throw ConfigError("decay_steps must be at least 1");
  if (!(decay_rate > 0) || decay_rate > 1) throw ConfigError("decay_rate must lie in (0, 1]");
}

double lr_schedule(std::int64_t global_step, const LrSchedule& s) {
  const double e = static_cast<double>(global_step) / static_cast<double>(s.decay_steps);
  return std::max(s.lr_floor, s.lr0 * std::pow(s.decay_rate, e));
}

#define PCLE_INSTANTIATE(T)                                                                                     \
  template Tensor<T> to_tensor<T>(const CartesianImage&);                                                       \
  template CartesianImage to_image<T>(const Tensor<T>&, const CartesianImage&);                                 \
  template Tensor<T> conv_forward<T>(const ConvLayer<T>&, const Tensor<T>&, std::vector<T>*);                   \
  template Tensor<T> conv_backward<T>(const ConvLayer<T>&, int, int, const std::vector<T>&, const Tensor<T>&, \
                                      ConvLayer<T>*, bool);                                                     \
  template struct NetworkParams<T>;                                                                             \
  template struct OptimizerState<T>;                                                                           \
  template Tensor<T> forward<T>(const NetworkParams<T>&, const Tensor<T>&, ForwardCache<T>*);                   \
  template NetworkParams<T> backward<T>(const NetworkParams<T>&, const ForwardCache<T>&, const Tensor<T>&);    \
  template void adam_step<T>(NetworkParams<T>&, const NetworkParams<T>&, OptimizerState<T>&, double,           \
                             const AdamConfig&);

PCLE_INSTANTIATE(float)
PCLE_INSTANTIATE(double)

template NetworkParams<double> convert_params<double, float>(const NetworkParams<float>&);
template NetworkParams<float> convert_params<float, double>(const NetworkParams<double>&);

}  // namespace pcle
