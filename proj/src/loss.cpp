#include "pcle/loss.hpp"

#include <cmath>
#include <random>

#include "pcle/checkpoint.hpp"
#include "pcle/error.hpp"
#include "pcle/rng.hpp"

namespace pcle {

namespace {

std::vector<ConvLayer<float>> to_float(const std::vector<ConvLayer<double>>& in) {
  std::vector<ConvLayer<float>> out;
  for (const auto& l : in) {
    ConvLayer<float> f(l.shape);
    for (std::size_t i = 0; i < l.weight.size(); ++i) f.weight[i] = static_cast<float>(l.weight[i]);
    for (std::size_t i = 0; i < l.bias.size(); ++i) f.bias[i] = static_cast<float>(l.bias[i]);
    out.push_back(std::move(f));
  }
  return out;
}

template <class T>
void check_shapes(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) throw ConfigError("reference and prediction shapes differ");
  if (a.data.empty()) throw ConfigError("empty tensors");
}

template <class T>
Tensor<T> replicate(const Tensor<T>& x, int channels) {
  if (x.channels == channels) return x;
  if (x.channels != 1) throw ConfigError("extractor input must have 1 or " + std::to_string(channels) + " channels");
  Tensor<T> out(channels, x.height, x.width);
  for (int c = 0; c < channels; ++c) std::copy(x.data.begin(), x.data.end(), out.data.begin() + c * x.plane());
  return out;
}

template <class T>
struct Features {
  std::vector<Tensor<T>> taps;  // post-ReLU output of every stage
  std::vector<std::vector<T>> cols;
  Tensor<T> input;
};

template <class T>
Features<T> extract(const std::vector<ConvLayer<T>>& stages, const Tensor<T>& img, bool keep_cols) {
  Features<T> f;
  f.input = replicate(img, stages.front().shape.in_channels);
  f.cols.resize(stages.size());
  const Tensor<T>* x = &f.input;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    Tensor<T> y = conv_forward(stages[s], *x, keep_cols ? &f.cols[s] : nullptr);
    for (T& v : y.data) v = v > T(0) ? v : T(0);
    f.taps.push_back(std::move(y));
    x = &f.taps.back();
  }
  return f;
}

}  // namespace

FeatureExtractor::FeatureExtractor(std::vector<ConvLayer<double>> stages,
                                   std::vector<std::vector<double>> channel_weights)
    : stages_d_(std::move(stages)), weights_(std::move(channel_weights)) {
  if (stages_d_.empty()) throw ConfigError("feature extractor needs at least one stage");
  if (weights_.size() != stages_d_.size()) throw ConfigError("one channel-weight vector per stage is required");
  for (std::size_t s = 0; s < stages_d_.size(); ++s) {
    if (s > 0 && stages_d_[s].shape.in_channels != stages_d_[s - 1].shape.out_channels)
      throw ConfigError("extractor stage " + std::to_string(s) + " channel count mismatch");
    if (weights_[s].size() != static_cast<std::size_t>(stages_d_[s].shape.out_channels))
      throw ConfigError("extractor stage " + std::to_string(s) + " channel-weight length mismatch");
    for (double w : weights_[s])
      if (!(w >= 0) || !std::isfinite(w)) throw ConfigError("channel weights must be finite and nonnegative");
  }
  stages_f_ = to_float(stages_d_);
}

FeatureExtractor FeatureExtractor::builtin(std::uint64_t seed) {
  const ConvShape shapes[] = {{3, 8, 3, 1, Padding::valid}, {8, 16, 3, 2, Padding::valid}, {16, 32, 3, 2, Padding::valid}};
  std::vector<ConvLayer<double>> stages;
  std::vector<std::vector<double>> weights;
  for (std::size_t s = 0; s < 3; ++s) {
    ConvLayer<double> l(shapes[s]);
    Rng rng(derive_seed(seed, {s}));
    std::normal_distribution<double> g(0.0, std::sqrt(2.0 / (shapes[s].in_channels * 9)));
    for (double& w : l.weight) w = g(rng);
    stages.push_back(std::move(l));
    weights.emplace_back(static_cast<std::size_t>(shapes[s].out_channels), 1.0 / shapes[s].out_channels);
  }
  return FeatureExtractor(std::move(stages), std::move(weights));
}

int FeatureExtractor::min_side() const {
  for (int n = 1; n < 4096; ++n) {
    try {
      int m = n;
      for (const auto& s : stages_d_) m = conv_output_size(s.shape, m);
      return n;
    } catch (const ConfigError&) {
    }
  }
  throw ConfigError("extractor receptive field is too large");
}

template <>
const std::vector<ConvLayer<double>>& FeatureExtractor::stages_as<double>() const {
  return stages_d_;
}
template <>
const std::vector<ConvLayer<float>>& FeatureExtractor::stages_as<float>() const {
  return stages_f_;
}

void FeatureExtractor::save(const std::filesystem::path& path) const {
  TensorBundle b;
  b.meta["kind"] = "extractor";
  b.meta["stages"] = std::to_string(stages_d_.size());
  for (std::size_t s = 0; s < stages_d_.size(); ++s) {
    const ConvShape& sh = stages_d_[s].shape;
    const std::string p = "stage" + std::to_string(s) + ".";
    b.meta[p + "stride"] = std::to_string(sh.stride);
    b.tensors[p + "weight"] = {{static_cast<std::uint64_t>(sh.out_channels), static_cast<std::uint64_t>(sh.in_channels),
                                static_cast<std::uint64_t>(sh.kernel), static_cast<std::uint64_t>(sh.kernel)},
                               std::vector<float>(stages_f_[s].weight)};
    b.tensors[p + "bias"] = {{static_cast<std::uint64_t>(sh.out_channels)}, std::vector<float>(stages_f_[s].bias)};
    b.tensors[p + "channel_weight"] = {{static_cast<std::uint64_t>(sh.out_channels)},
                                       std::vector<float>(weights_[s].begin(), weights_[s].end())};
  }
  save_bundle(path, b);
}

FeatureExtractor FeatureExtractor::load(const std::filesystem::path& path) {
  const TensorBundle b = load_bundle(path);
  auto kind = b.meta.find("kind");
  if (kind == b.meta.end() || kind->second != "extractor") throw ConfigError(path.string() + " is not an extractor");
  const int n = std::stoi(b.meta.at("stages"));
  std::vector<ConvLayer<double>> stages;
  std::vector<std::vector<double>> weights;
  for (int s = 0; s < n; ++s) {
    const std::string p = "stage" + std::to_string(s) + ".";
    auto get = [&](const std::string& name) -> const TensorBundle::Entry& {
      auto it = b.tensors.find(p + name);
      if (it == b.tensors.end()) throw ConfigError("extractor file lacks " + p + name);
      return it->second;
    };
    const auto& w = get("weight");
    if (w.dims.size() != 4 || w.dims[2] != w.dims[3]) throw ConfigError("extractor weight must be out x in x k x k");
    ConvShape sh{static_cast<int>(w.dims[1]), static_cast<int>(w.dims[0]), static_cast<int>(w.dims[2]),
                 std::stoi(b.meta.at(p + "stride")), Padding::valid};
    ConvLayer<double> l(sh);
    std::copy(w.data.begin(), w.data.end(), l.weight.begin());
    const auto& bias = get("bias");
    if (bias.data.size() != l.bias.size()) throw ConfigError("extractor bias length mismatch");
    std::copy(bias.data.begin(), bias.data.end(), l.bias.begin());
    const auto& cw = get("channel_weight");
    weights.emplace_back(cw.data.begin(), cw.data.end());
    stages.push_back(std::move(l));
  }
  return FeatureExtractor(std::move(stages), std::move(weights));
}

void LossConfig::validate() const {
  if (!(lambda_l1 >= 0) || !std::isfinite(lambda_l1)) throw ConfigError("lambda_l1 must be nonnegative");
  if (!(weight_decay >= 0) || !std::isfinite(weight_decay)) throw ConfigError("weight_decay must be nonnegative");
}

FeatureExtractor LossConfig::make_extractor() const {
  return extractor_weights.empty() ? FeatureExtractor::builtin(extractor_seed) : FeatureExtractor::load(extractor_weights);
}

template <class T>
double l1_term(const Tensor<T>& reference, const Tensor<T>& prediction) {
  check_shapes(reference, prediction);
  double s = 0.0;
  for (std::size_t i = 0; i < reference.data.size(); ++i)
    s += std::abs(static_cast<double>(reference.data[i]) - static_cast<double>(prediction.data[i]));
  return s / static_cast<double>(reference.data.size());
}

template <class T>
double perceptual_term(const FeatureExtractor& fx, const Tensor<T>& reference, const Tensor<T>& prediction) {
  check_shapes(reference, prediction);
  const auto& stages = fx.stages_as<T>();
  const Features<T> fr = extract(stages, reference, false);
  const Features<T> fp = extract(stages, prediction, false);
  double total = 0.0;
  for (std::size_t l = 0; l < stages.size(); ++l) {
    const Tensor<T>& a = fr.taps[l];
    const Tensor<T>& b = fp.taps[l];
    const std::size_t plane = a.plane();
    double layer = 0.0;
    for (int c = 0; c < a.channels; ++c) {
      const double w = fx.channel_weights()[l][static_cast<std::size_t>(c)];
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = w * (static_cast<double>(a.data[c * plane + i]) - static_cast<double>(b.data[c * plane + i]));
        layer += d * d;
      }
    }
    total += layer / static_cast<double>(plane);
  }
  return total;
}

template <class T>
LossValue<T> perceptual_with_grad(const FeatureExtractor& fx, const Tensor<T>& reference, const Tensor<T>& prediction) {
  check_shapes(reference, prediction);
  const auto& stages = fx.stages_as<T>();
  const Features<T> fr = extract(stages, reference, false);
  const Features<T> fp = extract(stages, prediction, true);

  LossValue<T> out;
  // gradient flowing into each tap, accumulated from the deepest stage upwards
  Tensor<T> g;
  for (std::size_t l = stages.size(); l-- > 0;) {
    const Tensor<T>& a = fr.taps[l];
    const Tensor<T>& b = fp.taps[l];
    const std::size_t plane = a.plane();
    if (g.data.empty()) g = Tensor<T>(b.channels, b.height, b.width);
    double layer = 0.0;
    for (int c = 0; c < a.channels; ++c) {
      const double w = fx.channel_weights()[l][static_cast<std::size_t>(c)];
      for (std::size_t i = 0; i < plane; ++i) {
        const std::size_t k = c * plane + i;
        const double d = static_cast<double>(a.data[k]) - static_cast<double>(b.data[k]);
        layer += w * w * d * d;
        g.data[k] += static_cast<T>(-2.0 * w * w * d / static_cast<double>(plane));
      }
    }
    out.value += layer / static_cast<double>(plane);
    // through the ReLU of stage l, then its convolution
    for (std::size_t k = 0; k < g.data.size(); ++k)
      if (!(b.data[k] > T(0))) g.data[k] = T(0);
    const Tensor<T>& stage_in = l == 0 ? fp.input : fp.taps[l - 1];
    g = conv_backward(stages[l], stage_in.height, stage_in.width, fp.cols[l], g, static_cast<ConvLayer<T>*>(nullptr), true);
  }
  // replicated channels: sum their gradients
  out.grad = Tensor<T>(1, prediction.height, prediction.width);
  const std::size_t plane = out.grad.plane();
  for (int c = 0; c < g.channels; ++c)
    for (std::size_t i = 0; i < plane; ++i) out.grad.data[i] += g.data[c * plane + i];
  return out;
}

template <class T>
LossValue<T> total_loss(const LossConfig& cfg, const FeatureExtractor& fx, const Tensor<T>& reference,
                        const Tensor<T>& prediction) {
  check_shapes(reference, prediction);
  LossValue<T> out;
  if (cfg.perceptual_enabled) {
    out = perceptual_with_grad(fx, reference, prediction);
  } else {
    out.grad = Tensor<T>(prediction.channels, prediction.height, prediction.width);
  }
  const double n = static_cast<double>(prediction.data.size());
  double l1 = 0.0;
  for (std::size_t i = 0; i < prediction.data.size(); ++i) {
    const double d = static_cast<double>(prediction.data[i]) - static_cast<double>(reference.data[i]);
    l1 += std::abs(d);
    const double sign = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
    out.grad.data[i] += static_cast<T>(cfg.lambda_l1 * sign / n);
  }
  out.value += cfg.lambda_l1 * l1 / n;
  return out;
}

#define PCLE_INSTANTIATE(T)                                                                                      \
  template double l1_term<T>(const Tensor<T>&, const Tensor<T>&);                                                \
  template double perceptual_term<T>(const FeatureExtractor&, const Tensor<T>&, const Tensor<T>&);               \
  template LossValue<T> perceptual_with_grad<T>(const FeatureExtractor&, const Tensor<T>&, const Tensor<T>&);    \
  template LossValue<T> total_loss<T>(const LossConfig&, const FeatureExtractor&, const Tensor<T>&,              \
                                      const Tensor<T>&);

PCLE_INSTANTIATE(float)
PCLE_INSTANTIATE(double)

}  // namespace pcle
