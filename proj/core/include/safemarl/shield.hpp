#pragma once

#include <array>
#include <span>
#include <vector>

#include "safemarl/cbf.hpp"
#include "safemarl/qp.hpp"

namespace safemarl {

struct Neighbor {
  int id = -1;
  AgentState state;
};

struct IndexedObstacle {
  int id = -1;
  ObstacleSpec spec;
};

/// Entities within r_sense of the focal agent (centre distance <=, so an
/// entity exactly at r_sense is included).
struct Neighborhood {
  std::vector<Neighbor> agents;            // ascending id, self excluded
  std::vector<IndexedObstacle> obstacles;  // ascending id
  std::vector<WallContact> walls;          // face order
};

Neighborhood neighborhood(int self_id, std::span<const AgentState> all_agents,
                          std::span<const ObstacleSpec> obstacles, const WorldConfig& world,
                          double r_sense);

enum class ShieldStatus { passthrough = 0, corrected = 1, relaxed = 2, fallback = 3 };

const char* to_string(ShieldStatus status);

struct ShieldReport {
  int agent_id = -1;
  Vec2 u_nominal = Vec2::Zero();
  Vec2 u_safe = Vec2::Zero();
  // Indexed by ConstraintKind.
  std::array<int, 3> constraints_built{};
  ShieldStatus status = ShieldStatus::passthrough;
  // Smallest barrier value over sensed entities; -inf if some entity is
  // already inside its unsafe ball, +inf if nothing is sensed.
  double min_h = 0.0;
  double slack = 0.0;
};

struct ShieldResult {
  Vec2 u_safe = Vec2::Zero();
  ShieldReport report;
};

/// Projects the nominal action onto the intersection of every sensed
/// entity's barrier constraint. `neighbors` may contain entities out of
/// range; they are filtered here so the result depends on local state only.
/// Obstacle ids are their indices in `obstacles`.
ShieldResult filter_action(int agent_id, const Vec2& u_nominal, const AgentState& self,
                           std::span<const Neighbor> neighbors,
                           std::span<const ObstacleSpec> obstacles, const WorldConfig& world,
                           const ShieldParams& params);

/// Stacked constraints for one agent. When some entity is already outside
/// the interior of its safe set no constraint can be formed for it and
/// `needs_fallback` is set; the shield then brakes along `brake_direction`.
struct ConstraintSet {
  std::vector<LinearConstraint> constraints;
  double min_h = 0.0;
  bool needs_fallback = false;
  Vec2 brake_direction = Vec2::Zero();  // unit vector away from the worst entity
};

ConstraintSet build_constraints(const AgentState& self, const Neighborhood& local,
                                const ShieldParams& params);

}  // namespace safemarl
