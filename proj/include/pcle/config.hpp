#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "pcle/dataset.hpp"
#include "pcle/zssr.hpp"

namespace pcle {

/// Flat `key = value` text: one pair per line, `#` starts a comment, blank
/// lines ignored. Malformed lines and duplicate keys raise ConfigError.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::string_view text);
std::string format_key_values(const KeyValues& kv);
KeyValues load_key_values(const std::filesystem::path& path);

/// Everything a command needs, resolved from a preset, an optional config
/// file and command-line overrides (in that order).
struct RunConfig {
  std::string preset = "paper";
  TrainConfig train;
  NoiseParams training_noise = NoiseParams::synthetic();  // noise used when training with noise on
  VideoSpec video;        // synthetic video generation
  int videos = 3;         // ablation test videos
  int sisr_videos = 2;    // disjoint videos providing the SISR training pairs
  std::uint64_t seed = 0;
  int threads = 1;
  std::string backend = "auto";

  /// "paper" | "desk"
  static RunConfig from_preset(std::string_view name);

  /// Unknown keys and unparsable values raise ConfigError.
  void apply(const KeyValues& kv);
  void set(const std::string& key, const std::string& value);
  /// Every key with its resolved value; apply(to_key_values()) reproduces the config.
  KeyValues to_key_values() const;
  void validate() const;

  /// train with the top-level seed/threads folded in.
  TrainConfig resolved_train() const;
};

struct ConfigKeyDoc {
  std::string key;
  std::string type;
  std::string description;
};
std::vector<ConfigKeyDoc> config_key_docs();

}  // namespace pcle
