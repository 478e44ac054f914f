#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

namespace safemarl {

using Vec2 = Eigen::Vector2d;

/// Position/velocity of one planar double-integrator agent.
struct AgentState {
  Vec2 position = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();
};

/// Static point entity. The collision halo is d_s + radius.
struct ObstacleSpec {
  Vec2 position = Vec2::Zero();
  double radius = 0.0;
};

struct WorldConfig {
  double wall_half_extent = 1.0;
  std::vector<ObstacleSpec> obstacles;
  std::vector<Vec2> checkin_points;
  double dt = 0.1;
  double v_max = 1.0;
  double a_max = 1.0;

  /// Throws ConfigError when an invariant fails. `safe_distance` is the
  /// shield's d_s; check-in points must sit outside every obstacle halo.
  void validate(double safe_distance) const;

  /// The two-patrolman arena: 2x2 square, three point obstacles and five
  /// check-in points visited in order.
  static WorldConfig patrol_default();
};

/// Wall faces in fixed tie-break order.
enum class WallFace : int { pos_x = 0, neg_x = 1, pos_y = 2, neg_y = 3 };

struct WallContact {
  WallFace face = WallFace::pos_x;
  Vec2 point = Vec2::Zero();  // closest point of the face to the agent
  double distance = 0.0;
};

/// Semi-implicit Euler: v' = clamp(v + a dt), p' = p + v' dt. The clamp is
/// per component to [-v_max, v_max].
AgentState step_agent(const AgentState& state, const Vec2& accel, double dt, double v_max);

double pairwise_distance(const Vec2& a, const Vec2& b);
inline double pairwise_distance(const AgentState& a, const AgentState& b) {
  return pairwise_distance(a.position, b.position);
}
inline double pairwise_distance(const AgentState& a, const ObstacleSpec& b) {
  return pairwise_distance(a.position, b.position);
}
inline double pairwise_distance(const ObstacleSpec& a, const AgentState& b) {
  return pairwise_distance(a.position, b.position);
}

/// Nearest point on the square boundary. Ties resolve in face order
/// (+x, -x, +y, -y). Throws InvariantError if the agent is outside.
WallContact wall_clearance(const AgentState& state, const WorldConfig& world);

/// All four faces with their closest points, in face order.
std::array<WallContact, 4> wall_contacts(const AgentState& state, const WorldConfig& world);

/// Inelastic wall contact: clips the position into the square and zeroes
/// the velocity component pointing through the wall. Returns true if the
/// agent touched a wall.
bool confine_to_walls(AgentState& state, const WorldConfig& world);

}  // namespace safemarl
