#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "safemarl/maddpg.hpp"
#include "safemarl/patrol_env.hpp"

namespace safemarl {

/// Everything a train/eval invocation needs. JSON keys: "world", "shield",
/// "env", "trainer", "runs", "seeds", "output_dir", "shield_enabled". Every
/// key is optional and falls back to the defaults of the matching struct.
struct RunConfig {
  PatrolConfig env;
  TrainerConfig trainer;
  int runs = 5;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string output_dir = "runs";
  bool shield_enabled = true;

  /// Cross-section invariants; throws ConfigError.
  void validate() const;
};

/// Parses and validates. Errors carry `source:line:` prefixes pointing at the
/// offending key where it can be located.
RunConfig parse_run_config(std::string_view text, std::string_view source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

/// Fully resolved configuration, pretty-printed with sorted keys.
std::string to_json_text(const RunConfig& config);

}  // namespace safemarl
