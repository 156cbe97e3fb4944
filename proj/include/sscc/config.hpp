#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sscc/augment.hpp"
#include "sscc/network.hpp"
#include "sscc/trainer.hpp"

namespace sscc {

/// Everything one run needs. Serialized as flat `key = value` lines.
struct RunConfig {
  std::string cube;
  std::string labels;
  std::string checkpoint;
  std::string out_dir = ".";

  std::uint64_t seed = 0;
  int pca_components = 8;  // 0 keeps every band
  int patch_side = 13;

  NetworkConfig network;
  TrainConfig train;
  AugmentationPool pool;

  /// Throws ConfigError for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  void validate() const;
};

/// Every key, in a stable order.
std::vector<std::string> config_keys();
std::string config_value(const RunConfig& config, const std::string& key);

/// Applies a key-value file on top of `config`. Blank lines and `#` comments
/// are ignored.
void load_config_file(const std::filesystem::path& path, RunConfig& config);
std::string dump_config(const RunConfig& config);

/// "32:3:1,64:3:1" -> conv blocks (out_channels:kernel:stride).
std::vector<ConvBlockSpec> parse_blocks(const std::string& text);
std::string format_blocks(const std::vector<ConvBlockSpec>& blocks);

}  // namespace sscc
