#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pcle/network.hpp"

namespace pcle {

/// Named float32 tensors plus string metadata, stored as
///   "PCLEBNDL" | u32 version | u32 meta count | (str key, str value)* |
///   u32 tensor count | (str name, u32 rank, u64 dims[rank], f32 data[])* | u32 crc32
/// with little-endian integers, length-prefixed (u32) strings and a zlib CRC-32
/// over every preceding byte.
struct TensorBundle {
  struct Entry {
    std::vector<std::uint64_t> dims;
    std::vector<float> data;
  };
  std::map<std::string, std::string> meta;
  std::map<std::string, Entry> tensors;

  bool operator==(const TensorBundle&) const = default;
};

inline constexpr std::uint32_t kBundleVersion = 1;

std::string encode_bundle(const TensorBundle& b);
/// Throws IoError on a bad magic, version, truncation or checksum mismatch.
TensorBundle decode_bundle(const std::string& bytes);
void save_bundle(const std::filesystem::path& path, const TensorBundle& b);
TensorBundle load_bundle(const std::filesystem::path& path);

struct Checkpoint {
  NetworkParams<float> params;
  OptimizerState<float> optimizer;
  std::map<std::string, std::string> meta;  // free-form extras (epoch, seed, ...)
};

TensorBundle checkpoint_to_bundle(const Checkpoint& c);
/// Throws ConfigError when the bundle is not a network checkpoint or its tensors
/// disagree with the architecture it declares.
Checkpoint checkpoint_from_bundle(const TensorBundle& b);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pcle
