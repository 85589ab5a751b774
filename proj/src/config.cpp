#include "pcle/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "pcle/error.hpp"
#include "pcle/simd/gemm.hpp"

namespace pcle {

namespace {

std::string_view strip(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("config key '" + key + "': cannot parse '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

template <class T>
std::string to_text(T v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct Field {
  std::string key;
  std::string type;
  std::string doc;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <class T>
Field number(std::string key, std::string doc, T RunConfig::*member) {
  const std::string type = std::is_floating_point_v<T> ? "float" : "int";
  return {key, type, std::move(doc), [member](const RunConfig& c) { return to_text(c.*member); },
          [member, key](RunConfig& c, const std::string& v) { c.*member = parse_number<T>(key, v); }};
}

template <class T, class Get>
Field nested(std::string key, std::string doc, Get get) {
  const std::string type = std::is_same_v<T, bool> ? "bool" : std::is_floating_point_v<T> ? "float" : "int";
  return {key, type, std::move(doc),
          [get](const RunConfig& c) {
            const T v = get(const_cast<RunConfig&>(c));
            if constexpr (std::is_same_v<T, bool>) return std::string(v ? "true" : "false");
            else return to_text(v);
          },
          [get, key](RunConfig& c, const std::string& v) {
            if constexpr (std::is_same_v<T, bool>) get(c) = parse_bool(key, v);
            else get(c) = parse_number<T>(key, v);
          }};
}

#define PCLE_FIELD(T, key, doc, expr) nested<T>(key, doc, [](RunConfig& c) -> T& { return expr; })

const std::vector<Field>& fields() {
  static const std::vector<Field> f = [] {
    std::vector<Field> v{
        {"preset", "string", "preset the remaining keys were resolved from (paper | desk)",
         [](const RunConfig& c) { return c.preset; }, [](RunConfig& c, const std::string& s) { c.preset = s; }},
        number("seed", "master seed", &RunConfig::seed),
        number("threads", "worker threads for batch items and inference branches", &RunConfig::threads),
        {"backend", "string", "GEMM backend: auto | scalar | avx2", [](const RunConfig& c) { return c.backend; },
         [](RunConfig& c, const std::string& s) { c.backend = s; }},
        PCLE_FIELD(int, "train.epochs", "optimiser steps", c.train.epochs),
        PCLE_FIELD(int, "train.eval_every", "epochs between HR-father rounds (must divide epochs)",
                   c.train.eval_every),
        PCLE_FIELD(int, "train.batch_size", "training pairs per step", c.train.batch_size),
        PCLE_FIELD(int, "train.crop_size", "training crop side (shrunk to the field of view)", c.train.crop_size),
        PCLE_FIELD(int, "train.crop_margin", "border degraded with the crop and then trimmed", c.train.crop_margin),
        PCLE_FIELD(double, "train.frames_fraction", "leading fraction of frames used in video mode",
                   c.train.frames_fraction),
        PCLE_FIELD(int, "train.linear_factor", "pseudo-HR downscaling factor", c.train.linear_factor),
        {"degrade.kernel", "string", "training degradation: voronoi | bicubic",
         [](const RunConfig& c) { return std::string(kernel_name(c.train.degrade.kernel)); },
         [](RunConfig& c, const std::string& s) { c.train.degrade.kernel = parse_kernel(s); }},
        PCLE_FIELD(int, "degrade.bicubic_scale", "bicubic kernel downscale factor", c.train.degrade.bicubic_scale),
        PCLE_FIELD(bool, "degrade.noise", "simulate pCLE noise in training pairs", c.train.degrade.noise.enabled),
        PCLE_FIELD(double, "noise.sigma_add", "additive noise sigma for training", c.training_noise.sigma_add),
        PCLE_FIELD(double, "noise.sigma_mult", "multiplicative noise sigma for training", c.training_noise.sigma_mult),
        PCLE_FIELD(double, "noise.jitter", "per-frame sigma jitter half-width for training",
                   c.training_noise.jitter_half_width),
        PCLE_FIELD(double, "loss.lambda_l1", "weight of the L1 term", c.train.loss.lambda_l1),
        PCLE_FIELD(bool, "loss.perceptual", "include the perceptual term", c.train.loss.perceptual_enabled),
        PCLE_FIELD(std::uint64_t, "loss.extractor_seed", "seed of the builtin feature extractor",
                   c.train.loss.extractor_seed),
        {"loss.extractor_weights", "string", "feature-extractor bundle (empty: builtin)",
         [](const RunConfig& c) { return c.train.loss.extractor_weights; },
         [](RunConfig& c, const std::string& s) { c.train.loss.extractor_weights = s; }},
        PCLE_FIELD(double, "loss.weight_decay", "L2 coefficient on the weights", c.train.loss.weight_decay),
        PCLE_FIELD(double, "lr.initial", "initial learning rate", c.train.lr.lr0),
        PCLE_FIELD(double, "lr.decay_rate", "exponential decay rate", c.train.lr.decay_rate),
        PCLE_FIELD(std::int64_t, "lr.decay_steps", "steps per decay_rate factor", c.train.lr.decay_steps),
        PCLE_FIELD(double, "lr.floor", "learning-rate floor", c.train.lr.lr_floor),
        PCLE_FIELD(double, "adam.beta1", "Adam first-moment decay", c.train.adam.beta1),
        PCLE_FIELD(double, "adam.beta2", "Adam second-moment decay", c.train.adam.beta2),
        PCLE_FIELD(double, "adam.epsilon", "Adam epsilon", c.train.adam.epsilon),
        PCLE_FIELD(int, "network.hidden_layers", "hidden conv layers", c.train.network.hidden_layers),
        PCLE_FIELD(int, "network.channels", "filters per hidden layer", c.train.network.channels),
        PCLE_FIELD(int, "network.kernel", "hidden kernel size (odd)", c.train.network.kernel),
        PCLE_FIELD(int, "video.size", "synthetic frame side", c.video.size),
        PCLE_FIELD(int, "video.frames", "frames per synthetic video", c.video.frames),
        PCLE_FIELD(double, "video.pixels_per_fibre", "fibre density of the simulated bundle",
                   c.video.pixels_per_fibre),
        PCLE_FIELD(double, "video.jitter", "fibre position jitter (fraction of spacing)", c.video.jitter),
        PCLE_FIELD(double, "video.pan_speed", "texture motion in pixels per frame", c.video.pan_speed),
        PCLE_FIELD(bool, "video.noise", "simulate noise in the synthetic videos", c.video.noise.enabled),
        PCLE_FIELD(double, "video.sigma_add", "additive noise sigma of the videos", c.video.noise.sigma_add),
        PCLE_FIELD(double, "video.sigma_mult", "multiplicative noise sigma of the videos", c.video.noise.sigma_mult),
        PCLE_FIELD(double, "video.noise_jitter", "per-frame sigma jitter of the videos",
                   c.video.noise.jitter_half_width),
        PCLE_FIELD(int, "ablate.videos", "test videos generated for the ablation", c.videos),
        PCLE_FIELD(int, "ablate.sisr_videos", "videos generated for SISR training", c.sisr_videos),
    };
    return v;
  }();
  return f;
}

#undef PCLE_FIELD

const Field& field(const std::string& key) {
  for (const Field& f : fields())
    if (f.key == key) return f;
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = strip(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key(strip(line.substr(0, eq)));
    const std::string value(strip(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (!kv.emplace(key, value).second)
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
  }
  return kv;
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

RunConfig RunConfig::from_preset(std::string_view name) {
  RunConfig c;
  if (name == "paper") {
    c.train = TrainConfig::paper();
  } else if (name == "desk") {
    c.train = TrainConfig::desk();
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "' (expected paper or desk)");
  }
  c.preset = std::string(name);
  return c;
}

void RunConfig::set(const std::string& key, const std::string& value) { field(key).set(*this, value); }

void RunConfig::apply(const KeyValues& kv) {
  for (const auto& [k, v] : kv) set(k, v);
}

KeyValues RunConfig::to_key_values() const {
  KeyValues kv;
  for (const Field& f : fields()) kv[f.key] = f.get(*this);
  return kv;
}

void RunConfig::validate() const {
  resolved_train().validate();
  training_noise.validate();
  video.validate();
  if (videos < 1) throw ConfigError("ablate.videos must be at least 1");
  if (sisr_videos < 1) throw ConfigError("ablate.sisr_videos must be at least 1");
  if (backend != "auto") simd::parse_backend(backend);
}

TrainConfig RunConfig::resolved_train() const {
  TrainConfig t = train;
  t.seed = seed;
  t.threads = threads;
  if (t.degrade.noise.enabled) {
    t.degrade.noise = training_noise;
    t.degrade.noise.enabled = true;
  }
  return t;
}

std::vector<ConfigKeyDoc> config_key_docs() {
  std::vector<ConfigKeyDoc> out;
  for (const Field& f : fields()) out.push_back({f.key, f.type, f.doc});
  return out;
}

}  // namespace pcle
