#include "pcle/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pcle/error.hpp"

namespace pcle {

namespace {

constexpr char kMagic[8] = {'P', 'C', 'L', 'E', 'B', 'N', 'D', 'L'};

static_assert(std::endian::native == std::endian::little, "bundle I/O assumes a little-endian host");

class Writer {
 public:
  template <class U>
  void pod(U v) {
    char buf[sizeof(U)];
    std::memcpy(buf, &v, sizeof(U));
    out_.append(buf, sizeof(U));
  }
  void str(const std::string& s) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  void raw(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& s, std::size_t end) : s_(s), end_(end) {}
  template <class U>
  U pod() {
    need(sizeof(U));
    U v;
    std::memcpy(&v, s_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string out = s_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, s_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == end_; }

 private:
  void need(std::size_t n) const {
    if (end_ - pos_ < n) throw IoError("truncated tensor bundle");
  }
  const std::string& s_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const char* p, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(p), chunk);
    p += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string encode_bundle(const TensorBundle& b) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.pod<std::uint32_t>(kBundleVersion);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(b.meta.size()));
  for (const auto& [k, v] : b.meta) {
    w.str(k);
    w.str(v);
  }
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(b.tensors.size()));
  for (const auto& [name, e] : b.tensors) {
    std::uint64_t count = 1;
    for (auto d : e.dims) count *= d;
    if (count != e.data.size()) throw ConfigError("tensor '" + name + "' data does not match its dims");
    w.str(name);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(e.dims.size()));
    for (auto d : e.dims) w.pod<std::uint64_t>(d);
    w.raw(e.data.data(), e.data.size() * sizeof(float));
  }
  const std::uint32_t crc = crc_of(w.bytes().data(), w.bytes().size());
  w.pod<std::uint32_t>(crc);
  return std::move(w.bytes());
}

TensorBundle decode_bundle(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic + 8) throw IoError("tensor bundle too short");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) throw IoError("not a tensor bundle (bad magic)");
  const std::size_t body = bytes.size() - sizeof(std::uint32_t);
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body, sizeof stored);
  if (crc_of(bytes.data(), body) != stored) throw IoError("tensor bundle checksum mismatch");

  Reader r(bytes, body);
  char magic[sizeof kMagic];
  r.raw(magic, sizeof magic);
  const auto version = r.pod<std::uint32_t>();
  if (version != kBundleVersion) throw IoError("unsupported tensor bundle version " + std::to_string(version));
  TensorBundle b;
  const auto n_meta = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    b.meta[k] = r.str();
  }
  const auto n_tensors = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::string name = r.str();
    TensorBundle::Entry e;
    const auto rank = r.pod<std::uint32_t>();
    std::uint64_t count = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      e.dims.push_back(r.pod<std::uint64_t>());
      count *= e.dims.back();
    }
    if (count > bytes.size() / sizeof(float)) throw IoError("tensor '" + name + "' larger than the file");
    e.data.resize(count);
    r.raw(e.data.data(), count * sizeof(float));
    b.tensors[name] = std::move(e);
  }
  if (!r.done()) throw IoError("trailing bytes in tensor bundle");
  return b;
}

void save_bundle(const std::filesystem::path& path, const TensorBundle& b) {
  const std::string bytes = encode_bundle(b);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

TensorBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  try {
    return decode_bundle(ss.str());
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

namespace {

std::string layer_key(std::size_t l, const char* part) { return "layer" + std::to_string(l) + "." + part; }

int meta_int(const TensorBundle& b, const std::string& key) {
  auto it = b.meta.find(key);
  if (it == b.meta.end()) throw ConfigError("checkpoint lacks '" + key + "'");
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw ConfigError("checkpoint field '" + key + "' is not an integer");
  }
}

}  // namespace

TensorBundle checkpoint_to_bundle(const Checkpoint& c) {
  TensorBundle b;
  b.meta = c.meta;
  b.meta["kind"] = "network";
  b.meta["hidden_layers"] = std::to_string(c.params.shape.hidden_layers);
  b.meta["channels"] = std::to_string(c.params.shape.channels);
  b.meta["kernel"] = std::to_string(c.params.shape.kernel);
  b.meta["adam_step"] = std::to_string(c.optimizer.step);
  const bool with_state = !c.optimizer.m.empty();
  std::size_t idx = 0;
  for (std::size_t l = 0; l < c.params.layers.size(); ++l) {
    const ConvLayer<float>& layer = c.params.layers[l];
    const ConvShape& s = layer.shape;
    const std::vector<std::uint64_t> wdims{static_cast<std::uint64_t>(s.out_channels),
                                           static_cast<std::uint64_t>(s.in_channels),
                                           static_cast<std::uint64_t>(s.kernel), static_cast<std::uint64_t>(s.kernel)};
    const std::vector<std::uint64_t> bdims{static_cast<std::uint64_t>(s.out_channels)};
    b.tensors[layer_key(l, "weight")] = {wdims, layer.weight};
    b.tensors[layer_key(l, "bias")] = {bdims, layer.bias};
    if (with_state) {
      b.tensors["adam_m." + layer_key(l, "weight")] = {wdims, c.optimizer.m[idx]};
      b.tensors["adam_v." + layer_key(l, "weight")] = {wdims, c.optimizer.v[idx]};
      b.tensors["adam_m." + layer_key(l, "bias")] = {bdims, c.optimizer.m[idx + 1]};
      b.tensors["adam_v." + layer_key(l, "bias")] = {bdims, c.optimizer.v[idx + 1]};
    }
    idx += 2;
  }
  return b;
}

Checkpoint checkpoint_from_bundle(const TensorBundle& b) {
  auto kind = b.meta.find("kind");
  if (kind == b.meta.end() || kind->second != "network") throw ConfigError("bundle is not a network checkpoint");
  NetworkShape shape;
  shape.hidden_layers = meta_int(b, "hidden_layers");
  shape.channels = meta_int(b, "channels");
  shape.kernel = meta_int(b, "kernel");
  shape.validate();
  Checkpoint c;
  c.params = NetworkParams<float>::zeros(shape);
  c.meta = b.meta;
  for (const char* k : {"kind", "hidden_layers", "channels", "kernel", "adam_step"}) c.meta.erase(k);

  auto take = [&](const std::string& name, std::vector<float>& dst) {
    auto it = b.tensors.find(name);
    if (it == b.tensors.end()) return false;
    if (it->second.data.size() != dst.size())
      throw ConfigError("checkpoint tensor '" + name + "' has " + std::to_string(it->second.data.size()) +
                        " values, architecture expects " + std::to_string(dst.size()));
    dst = it->second.data;
    return true;
  };
  const bool with_state = b.tensors.count("adam_m.layer0.weight") > 0;
  if (with_state) c.optimizer = OptimizerState<float>::for_params(c.params);
  std::size_t idx = 0;
  for (std::size_t l = 0; l < c.params.layers.size(); ++l) {
    for (const char* part : {"weight", "bias"}) {
      std::vector<float>& dst = part[0] == 'w' ? c.params.layers[l].weight : c.params.layers[l].bias;
      if (!take(layer_key(l, part), dst)) throw ConfigError("checkpoint lacks tensor '" + layer_key(l, part) + "'");
      if (with_state) {
        if (!take("adam_m." + layer_key(l, part), c.optimizer.m[idx]) ||
            !take("adam_v." + layer_key(l, part), c.optimizer.v[idx]))
          throw ConfigError("checkpoint optimizer state is incomplete");
      }
      ++idx;
    }
  }
  if (b.tensors.count(layer_key(c.params.layers.size(), "weight")))
    throw ConfigError("checkpoint has more layers than its declared architecture");
  c.optimizer.step = meta_int(b, "adam_step");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  save_bundle(path, checkpoint_to_bundle(c));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_bundle(load_bundle(path)); }

}  // namespace pcle
