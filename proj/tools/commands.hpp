#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

namespace safemarl::cli {

enum ExitCode { kOk = 0, kConfigError = 1, kDivergence = 2, kArtifactError = 3 };

struct TrainOptions {
  std::optional<std::filesystem::path> config;
  std::optional<int> runs;
  std::optional<int> episodes;
  bool no_shield = false;
  std::optional<std::uint64_t> seed;  // first seed; run k uses seed + k
  std::optional<std::filesystem::path> out;
};

struct EvalOptions {
  std::filesystem::path checkpoint;
  // Defaults to the config.json stored next to the checkpoint, if any.
  std::optional<std::filesystem::path> config;
  int episodes = 1;
  std::uint64_t seed = 1;
  std::optional<std::filesystem::path> out;
};

/// Trains every configured run; writes <out>/<variant>/run_XX/{metrics.csv,
/// shield.csv, checkpoint.bin, config.json} and <out>/<variant>/summary.json.
int cmd_train(const TrainOptions& options, std::ostream& log, std::ostream& err);

/// Greedy shielded rollouts of a checkpoint; writes <out>/eval/.
int cmd_eval(const EvalOptions& options, std::ostream& log, std::ostream& err);

/// Collision table (per variant) and averaged reward curve for a train output directory.
int cmd_report(const std::filesystem::path& run_dir, std::ostream& out, std::ostream& err);

/// Output directory: explicit flag, else $CBF_SHIELD_OUT, else the config's.
std::filesystem::path resolve_output_dir(const std::optional<std::filesystem::path>& flag,
                                         const std::string& config_value);

}  // namespace safemarl::cli
