#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "safemarl/mlp.hpp"
#include "safemarl/patrol_env.hpp"

namespace safemarl {

// Binary layout, all integers and floats little-endian:
//   "SMARLCK\0"                          8 bytes
//   u32 version                          (kCheckpointVersion)
//   u32 network count
//   per network: u32 hidden activation, u32 head activation, f64 head scale,
//                u32 layer-size count, u32 layer sizes...
//   per network, in the same order: f64 parameters (Mlp flat layout)
// Networks are stored as actor 0, critic 0, actor 1, critic 1.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::array<Mlp, kNumAgents> actors;
  std::array<Mlp, kNumAgents> critics;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Throws ArtifactError for a missing file, bad magic, unknown version or
/// truncated data.
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Throws ArtifactError naming expected and found layer sizes when the
/// checkpoint does not fit the configured observation size and width.
void check_architecture(const Checkpoint& checkpoint, int obs_dim, int hidden);

}  // namespace safemarl
