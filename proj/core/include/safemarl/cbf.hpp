#pragma once

#include <optional>

#include "safemarl/sim.hpp"

namespace safemarl {

struct ShieldParams {
  double d_s = 0.075;
  double a_max_self = 1.0;   // braking authority of the focal agent
  double a_max_other = 1.0;  // braking authority assumed for a cooperative neighbour
  double gamma_coo = 0.5;
  double gamma_non = 0.5;
  double r_sense = 1.0;
  double slack_weight = 1e6;
  // The shield enforces its barriers at d_s + margin. The barriers are
  // continuous-time conditions sampled every dt; the margin absorbs the
  // overshoot between samples so that d_s itself is never crossed.
  double margin = 0.025;

  /// Barrier parameters as the shield enforces them (d_s grown by margin).
  ShieldParams enforced() const {
    ShieldParams p = *this;
    p.d_s += margin;
    p.margin = 0.0;
    return p;
  }

  /// Throws ConfigError on d_s <= 0, negative caps, non-positive gammas or
  /// r_sense <= d_s + margin.
  void validate() const;
};

enum class ConstraintKind { cooperative = 0, noncooperative = 1, wall = 2 };

const char* to_string(ConstraintKind kind);

/// One half-plane normal . u <= bound on the focal agent's acceleration.
struct LinearConstraint {
  Vec2 normal = Vec2::Zero();
  double bound = 0.0;
  ConstraintKind kind = ConstraintKind::cooperative;
  int counterpart_id = -1;
};

// Relative-state barrier
//
//   h(dp, dv) = dp.dv / |dp| + sqrt(2 a (|dp| - d))
//
// with dp = p_self - p_other, dv the relative velocity, a the combined
// braking authority and d the safe distance. h >= 0 says the pair can still
// stop before closing to d. B = 1/h is the barrier; the linear constraint
// is the condition dB/dt <= gamma / B written in the relative acceleration:
//
//   -dp . da <= gamma h^3 |dp| - (dv.dp)^2/|dp|^2 + |dv|^2
//               + a (dv.dp) / sqrt(2 a (|dp| - d))

/// Generic barrier value. nullopt when |dp| <= safe_distance.
std::optional<double> barrier_value(const Vec2& dp, const Vec2& dv, double accel_budget,
                                    double safe_distance);

/// Right-hand side of the full (unsplit) relative-acceleration constraint.
/// Requires h > 0. (|dp| - d) is floored at 1e-6 before the square root.
double barrier_rhs(const Vec2& dp, const Vec2& dv, double accel_budget, double safe_distance,
                   double gamma);

/// Analytic dh/dt for relative acceleration da.
double barrier_rate(const Vec2& dp, const Vec2& dv, const Vec2& da, double accel_budget,
                    double safe_distance);

/// Cooperative barrier with budget a_max_self + a_max_other.
std::optional<double> h_cooperative(const Vec2& dp, const Vec2& dv, const ShieldParams& params);

/// Non-cooperative barrier against a static entity: only the focal agent
/// brakes, and the entity's velocity is zero.
std::optional<double> h_noncooperative(const Vec2& dp, const Vec2& v_self,
                                       const ShieldParams& params, double obstacle_radius = 0.0);

/// Full cooperative right-hand side b_coo (before the per-agent split).
double cooperative_rhs(const Vec2& dp, const Vec2& dv, const ShieldParams& params);

/// Each cooperative agent enforces -dp . a_self <= b_coo / 2, so the pair's
/// two constraints sum to the joint one. nullopt means the pair is outside
/// the interior of the safe set and the shield must brake instead.
std::optional<LinearConstraint> cooperative_constraint(const AgentState& self,
                                                       const AgentState& other, int other_id,
                                                       const ShieldParams& params);

/// Static obstacle: -dp . a_self <= b_non, no split.
std::optional<LinearConstraint> noncooperative_constraint(const AgentState& self,
                                                          const ObstacleSpec& obstacle,
                                                          int obstacle_id,
                                                          const ShieldParams& params);

/// Wall face as a non-cooperative entity. The virtual obstacle sits at the
/// nearest face point and slides along the face with the agent, so only the
/// wall-normal velocity enters the barrier.
std::optional<double> h_wall(const AgentState& self, const WallContact& face,
                             const ShieldParams& params);
std::optional<LinearConstraint> wall_constraint(const AgentState& self, const WallContact& face,
                                                const ShieldParams& params);

/// dB/dt - gamma/B for B = 1/h, written in h: -h_dot/h^2 - gamma h.
/// Non-positive iff the barrier condition holds. Throws DomainError for h <= 0.
double cbf_condition_residual(double h_value, double h_dot, double gamma);

}  // namespace safemarl
