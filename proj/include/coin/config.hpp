#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coin/distill.hpp"
#include "coin/synth.hpp"

namespace coin {

enum class OracleMode { kSynthetic, kBridge };

// Everything a subcommand needs. Flat keys map one-to-one onto fields;
// `key_names()` lists them.
struct RunConfig {
  CoinConfig coin;
  SynthConfig synth;
  OracleConfig oracle;
  OracleMode oracle_mode = OracleMode::kSynthetic;
  std::filesystem::path bridge_dir;  // proposals directory for the bridge oracle
  std::filesystem::path dataset;
  std::filesystem::path output;
  int jobs = 1;

  // Throws ConfigError naming the key.
  void set(std::string_view key, std::string_view value);
  // Sets distill, synth and oracle seeds together.
  void set_seed(std::uint64_t seed);
  // Range checks on every field; throws ConfigError.
  void validate() const;
  // "key = value" lines in key order, round-trippable through parse_config.
  std::string dump() const;
};

std::vector<std::string> key_names();

// Flat "key = value" text; '#' starts a comment. Later lines win.
std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text,
                                                                   std::string_view origin);
void apply_config_text(RunConfig& config, std::string_view text, std::string_view origin = "config");
RunConfig load_config(const std::filesystem::path& path);

// Noise-free, blob-free fixture with sigma 0.05 used for the separability check.
SynthConfig clean_synth_config();

}  // namespace coin
