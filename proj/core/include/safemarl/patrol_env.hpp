#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "safemarl/cbf.hpp"
#include "safemarl/shield.hpp"
#include "safemarl/sim.hpp"

namespace safemarl {

inline constexpr int kNumAgents = 2;
inline constexpr int kPatrolmanI = 0;   // free patrol, no goal term
inline constexpr int kPatrolmanII = 1;  // visits the check-in points in order

inline constexpr double kCollisionPenalty = -50.0;
inline constexpr double kSafeReward = 50.0;
inline constexpr double kCheckinReward = 100.0;

struct PatrolConfig {
  WorldConfig world = WorldConfig::patrol_default();
  ShieldParams shield;
  int episode_length = 200;
  double checkin_radius = 0.05;  // d_c
  double reset_margin = 0.05;
  int max_reset_attempts = 1000;

  void validate() const;
};

using JointAgents = std::array<AgentState, kNumAgents>;
using JointActions = std::array<Vec2, kNumAgents>;
using Observation = Eigen::VectorXd;
using JointObservation = std::array<Observation, kNumAgents>;

struct EnvState {
  JointAgents agents;
  int checkin_index = 0;  // current target, wraps after the last point
  int checkins_reached = 0;
  int step_count = 0;
  std::mt19937_64 rng;
};

/// Per-agent observation: own position and velocity, relative position of
/// the other agent and of every obstacle, then the relative position of the
/// current check-in target (zero for Patrolman I).
int observation_size(const WorldConfig& world);
JointObservation observe(const EnvState& state, const PatrolConfig& config);

/// Patrolman I: sum over sensed entities of -50 (distance <= d_s) or +50.
double reward_patrolman_one(std::span<const double> entity_distances,
                            std::span<const double> entity_safe_distances);

/// Patrolman II: per entity -50 if colliding, otherwise +100 while the
/// current target is within d_c and +50 when it is not.
double reward_patrolman_two(std::span<const double> entity_distances,
                            std::span<const double> entity_safe_distances,
                            double target_distance, double checkin_radius);

/// Smallest agent-agent or agent-obstacle centre distance.
double min_entity_distance(const JointAgents& agents, const PatrolConfig& config);

/// True when some agent-agent or agent-obstacle distance is <= its safe distance.
bool in_collision(const JointAgents& agents, const PatrolConfig& config);

struct StepResult {
  EnvState state;
  JointObservation observations;
  std::array<double, kNumAgents> rewards{};
  bool done = false;
  bool terminal = false;  // every check-in visited (not a time-limit cut)
  bool checkin_reached = false;
};

class PatrolEnv {
 public:
  explicit PatrolEnv(PatrolConfig config);

  const PatrolConfig& config() const { return config_; }

  /// Uniform rejection sampling of both start positions; velocities zero.
  /// Throws ConfigError after max_reset_attempts failed draws.
  std::pair<EnvState, JointObservation> reset(std::uint64_t seed) const;

  /// Integrates both agents with the (already filtered) actions, then
  /// scores the new state. Actions are clipped to the box.
  StepResult step(const EnvState& state, const JointActions& actions) const;

 private:
  PatrolConfig config_;
};

/// One executed step, as logged by the episode loop.
struct StepRecord {
  int step = 0;
  JointAgents agents;  // state after the step
  JointActions nominal;
  JointActions safe;
  std::array<double, kNumAgents> rewards{};
  std::array<ShieldStatus, kNumAgents> status{};
  int checkins_reached = 0;
};

struct EpisodeMetrics {
  std::array<double, kNumAgents> total_reward{};
  int collision_count = 0;  // steps with some entity distance <= d_s
  double min_pairwise_distance = 0.0;
  int checkins_reached = 0;
  int shield_correction_count = 0;
  int slack_events = 0;  // relaxed shield solves
  int steps = 0;

  bool collided() const { return collision_count > 0; }
  double total() const { return total_reward[0] + total_reward[1]; }
};

/// Recomputes collisions and distances from the logged positions.
EpisodeMetrics collision_audit(std::span<const StepRecord> trajectory, const PatrolConfig& config);

}  // namespace safemarl
