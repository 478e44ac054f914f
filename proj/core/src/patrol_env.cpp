#include "safemarl/patrol_env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "safemarl/errors.hpp"

namespace safemarl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct SensedEntities {
  std::vector<double> distances;
  std::vector<double> safe_distances;
};

// Same entity set the shield builds constraints for, minus the walls.
SensedEntities sensed(int self_id, const JointAgents& agents, const PatrolConfig& config) {
  const auto& obstacles = config.world.obstacles;
  const Neighborhood local =
      neighborhood(self_id, agents, obstacles, config.world, config.shield.r_sense);
  SensedEntities out;
  const AgentState& self = agents[self_id];
  for (const auto& n : local.agents) {
    out.distances.push_back(pairwise_distance(self, n.state));
    out.safe_distances.push_back(config.shield.d_s);
  }
  for (const auto& o : local.obstacles) {
    out.distances.push_back(pairwise_distance(self, o.spec));
    out.safe_distances.push_back(config.shield.d_s + o.spec.radius);
  }
  return out;
}

}  // namespace

void PatrolConfig::validate() const {
  shield.validate();
  world.validate(shield.d_s);
  if (episode_length < 1) throw ConfigError("env: episode_length must be >= 1");
  if (!(checkin_radius > 0.0)) throw ConfigError("env: checkin_radius must be > 0");
  if (!(reset_margin >= 0.0)) throw ConfigError("env: reset_margin must be >= 0");
  if (max_reset_attempts < 1) throw ConfigError("env: max_reset_attempts must be >= 1");
  if (world.checkin_points.empty()) throw ConfigError("env: at least one check-in point required");
}

int observation_size(const WorldConfig& world) {
  return 4 + 2 + 2 * static_cast<int>(world.obstacles.size()) + 2;
}

JointObservation observe(const EnvState& state, const PatrolConfig& config) {
  const auto& world = config.world;
  const int n = observation_size(world);
  JointObservation out;
  for (int i = 0; i < kNumAgents; ++i) {
    const AgentState& self = state.agents[i];
    const AgentState& other = state.agents[1 - i];
    Observation obs(n);
    obs.segment<2>(0) = self.position;
    obs.segment<2>(2) = self.velocity;
    obs.segment<2>(4) = other.position - self.position;
    int k = 6;
    for (const auto& o : world.obstacles) {
      obs.segment<2>(k) = o.position - self.position;
      k += 2;
    }
    if (i == kPatrolmanII) {
      obs.segment<2>(k) = world.checkin_points[state.checkin_index] - self.position;
    } else {
      obs.segment<2>(k).setZero();
    }
    out[i] = std::move(obs);
  }
  return out;
}

double reward_patrolman_one(std::span<const double> entity_distances,
                            std::span<const double> entity_safe_distances) {
  double r = 0.0;
  for (std::size_t l = 0; l < entity_distances.size(); ++l) {
    r += entity_distances[l] <= entity_safe_distances[l] ? kCollisionPenalty : kSafeReward;
  }
  return r;
}

double reward_patrolman_two(std::span<const double> entity_distances,
                            std::span<const double> entity_safe_distances,
                            double target_distance, double checkin_radius) {
  const double clear = target_distance <= checkin_radius ? kCheckinReward : kSafeReward;
  double r = 0.0;
  for (std::size_t l = 0; l < entity_distances.size(); ++l) {
    r += entity_distances[l] <= entity_safe_distances[l] ? kCollisionPenalty : clear;
  }
  return r;
}

double min_entity_distance(const JointAgents& agents, const PatrolConfig& config) {
  double best = pairwise_distance(agents[0], agents[1]);
  for (const auto& a : agents) {
    for (const auto& o : config.world.obstacles) best = std::min(best, pairwise_distance(a, o));
  }
  return best;
}

bool in_collision(const JointAgents& agents, const PatrolConfig& config) {
  const double d_s = config.shield.d_s;
  if (pairwise_distance(agents[0], agents[1]) <= d_s) return true;
  for (const auto& a : agents) {
    for (const auto& o : config.world.obstacles) {
      if (pairwise_distance(a, o) <= d_s + o.radius) return true;
    }
  }
  return false;
}

PatrolEnv::PatrolEnv(PatrolConfig config) : config_(std::move(config)) { config_.validate(); }

std::pair<EnvState, JointObservation> PatrolEnv::reset(std::uint64_t seed) const {
  const auto& world = config_.world;
  const double clearance = config_.shield.d_s + config_.reset_margin;
  EnvState state;
  state.rng.seed(seed);
  std::uniform_real_distribution<double> coord(-world.wall_half_extent, world.wall_half_extent);

  auto acceptable = [&](const JointAgents& agents) {
    if (pairwise_distance(agents[0], agents[1]) <= clearance) return false;
    for (const auto& a : agents) {
      if (world.wall_half_extent - a.position.cwiseAbs().maxCoeff() <= clearance) return false;
      for (const auto& o : world.obstacles) {
        if (pairwise_distance(a, o) <= clearance + o.radius) return false;
      }
    }
    return true;
  };

  for (int attempt = 0; attempt < config_.max_reset_attempts; ++attempt) {
    JointAgents agents;
    for (auto& a : agents) {
      const double x = coord(state.rng);
      const double y = coord(state.rng);
      a.position = Vec2(x, y);
      a.velocity.setZero();
    }
    if (acceptable(agents)) {
      state.agents = agents;
      state.checkin_index = 0;
      state.checkins_reached = 0;
      state.step_count = 0;
      JointObservation obs = observe(state, config_);
      return {std::move(state), std::move(obs)};
    }
  }
  throw ConfigError("env: reset failed after " + std::to_string(config_.max_reset_attempts) +
                    " attempts (world too crowded)");
}

StepResult PatrolEnv::step(const EnvState& state, const JointActions& actions) const {
  const auto& world = config_.world;
  StepResult out;
  out.state = state;
  EnvState& next = out.state;

  for (int i = 0; i < kNumAgents; ++i) {
    const Vec2 a = actions[i].cwiseMax(-world.a_max).cwiseMin(world.a_max);
    next.agents[i] = step_agent(state.agents[i], a, world.dt, world.v_max);
    confine_to_walls(next.agents[i], world);
  }
  next.step_count = state.step_count + 1;

  const SensedEntities one = sensed(kPatrolmanI, next.agents, config_);
  const SensedEntities two = sensed(kPatrolmanII, next.agents, config_);
  const Vec2& target = world.checkin_points[state.checkin_index];
  const double target_distance = pairwise_distance(next.agents[kPatrolmanII].position, target);

  out.rewards[kPatrolmanI] = reward_patrolman_one(one.distances, one.safe_distances);
  out.rewards[kPatrolmanII] = reward_patrolman_two(two.distances, two.safe_distances,
                                                   target_distance, config_.checkin_radius);

  if (target_distance <= config_.checkin_radius) {
    out.checkin_reached = true;
    ++next.checkins_reached;
    next.checkin_index =
        (state.checkin_index + 1) % static_cast<int>(world.checkin_points.size());
  }

  out.terminal = next.checkins_reached >= static_cast<int>(world.checkin_points.size());
  out.done = out.terminal || next.step_count >= config_.episode_length;
  out.observations = observe(next, config_);
  return out;
}

EpisodeMetrics collision_audit(std::span<const StepRecord> trajectory, const PatrolConfig& config) {
  EpisodeMetrics m;
  if (trajectory.empty()) return m;
  m.min_pairwise_distance = kInf;
  for (const auto& rec : trajectory) {
    for (int i = 0; i < kNumAgents; ++i) {
      m.total_reward[i] += rec.rewards[i];
      if (rec.status[i] != ShieldStatus::passthrough) ++m.shield_correction_count;
      if (rec.status[i] == ShieldStatus::relaxed) ++m.slack_events;
    }
    if (in_collision(rec.agents, config)) ++m.collision_count;
    m.min_pairwise_distance = std::min(m.min_pairwise_distance, min_entity_distance(rec.agents, config));
    m.checkins_reached = std::max(m.checkins_reached, rec.checkins_reached);
  }
  m.steps = static_cast<int>(trajectory.size());
  return m;
}

}  // namespace safemarl
