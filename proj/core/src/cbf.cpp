#include "safemarl/cbf.hpp"

#include <cmath>

#include "safemarl/errors.hpp"

namespace safemarl {

namespace {

constexpr double kGapFloor = 1e-6;

// sqrt(a / (2 x)) == a / sqrt(2 a x), finite for a == 0.
double braking_gain(double accel_budget, double gap) {
  return std::sqrt(accel_budget / (2.0 * std::max(gap, kGapFloor)));
}

std::optional<LinearConstraint> make_constraint(const Vec2& dp, const Vec2& dv, double budget,
                                                double safe_distance, double gamma, double share,
                                                ConstraintKind kind, int id) {
  const auto h = barrier_value(dp, dv, budget, safe_distance);
  if (!h || *h <= 0.0) return std::nullopt;
  LinearConstraint c;
  c.normal = -dp;
  c.bound = share * barrier_rhs(dp, dv, budget, safe_distance, gamma);
  c.kind = kind;
  c.counterpart_id = id;
  return c;
}

}  // namespace

void ShieldParams::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("shield: " + msg); };
  if (!(d_s > 0.0)) fail("d_s must be > 0");
  if (!(a_max_self >= 0.0) || !(a_max_other >= 0.0)) fail("acceleration caps must be >= 0");
  if (!(gamma_coo > 0.0) || !(gamma_non > 0.0)) fail("gamma_coo and gamma_non must be > 0");
  if (!(margin >= 0.0)) fail("margin must be >= 0");
  if (!(r_sense > d_s + margin)) fail("r_sense must exceed d_s + margin");
  if (!(slack_weight >= 0.0)) fail("slack_weight must be >= 0");
}

const char* to_string(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::cooperative: return "cooperative";
    case ConstraintKind::noncooperative: return "noncooperative";
    case ConstraintKind::wall: return "wall";
  }
  return "?";
}

std::optional<double> barrier_value(const Vec2& dp, const Vec2& dv, double accel_budget,
                                    double safe_distance) {
  const double r = dp.norm();
  if (!(r > safe_distance)) return std::nullopt;
  return dp.dot(dv) / r + std::sqrt(2.0 * accel_budget * (r - safe_distance));
}

double barrier_rhs(const Vec2& dp, const Vec2& dv, double accel_budget, double safe_distance,
                   double gamma) {
  const double r = dp.norm();
  const double h = dp.dot(dv) / r + std::sqrt(2.0 * accel_budget * std::max(r - safe_distance, 0.0));
  const double radial = dv.dot(dp);
  return gamma * h * h * h * r - radial * radial / (r * r) + dv.squaredNorm() +
         braking_gain(accel_budget, r - safe_distance) * radial;
}

double barrier_rate(const Vec2& dp, const Vec2& dv, const Vec2& da, double accel_budget,
                    double safe_distance) {
  const double r = dp.norm();
  const double radial = dp.dot(dv);
  return (dv.squaredNorm() + dp.dot(da)) / r - radial * radial / (r * r * r) +
         braking_gain(accel_budget, r - safe_distance) * radial / r;
}

std::optional<double> h_cooperative(const Vec2& dp, const Vec2& dv, const ShieldParams& params) {
  return barrier_value(dp, dv, params.a_max_self + params.a_max_other, params.d_s);
}

std::optional<double> h_noncooperative(const Vec2& dp, const Vec2& v_self,
                                       const ShieldParams& params, double obstacle_radius) {
  return barrier_value(dp, v_self, params.a_max_self, params.d_s + obstacle_radius);
}

double cooperative_rhs(const Vec2& dp, const Vec2& dv, const ShieldParams& params) {
  return barrier_rhs(dp, dv, params.a_max_self + params.a_max_other, params.d_s,
                     params.gamma_coo);
}

std::optional<LinearConstraint> cooperative_constraint(const AgentState& self,
                                                       const AgentState& other, int other_id,
                                                       const ShieldParams& params) {
  return make_constraint(self.position - other.position, self.velocity - other.velocity,
                         params.a_max_self + params.a_max_other, params.d_s, params.gamma_coo,
                         0.5, ConstraintKind::cooperative, other_id);
}

std::optional<LinearConstraint> noncooperative_constraint(const AgentState& self,
                                                          const ObstacleSpec& obstacle,
                                                          int obstacle_id,
                                                          const ShieldParams& params) {
  return make_constraint(self.position - obstacle.position, self.velocity, params.a_max_self,
                         params.d_s + obstacle.radius, params.gamma_non, 1.0,
                         ConstraintKind::noncooperative, obstacle_id);
}

namespace {

Vec2 wall_normal_velocity(const AgentState& self, const Vec2& dp) {
  const double r2 = dp.squaredNorm();
  if (r2 == 0.0) return Vec2::Zero();
  return dp * (dp.dot(self.velocity) / r2);
}

}  // namespace

std::optional<double> h_wall(const AgentState& self, const WallContact& face,
                             const ShieldParams& params) {
  const Vec2 dp = self.position - face.point;
  return barrier_value(dp, wall_normal_velocity(self, dp), params.a_max_self, params.d_s);
}

std::optional<LinearConstraint> wall_constraint(const AgentState& self, const WallContact& face,
                                                const ShieldParams& params) {
  const Vec2 dp = self.position - face.point;
  return make_constraint(dp, wall_normal_velocity(self, dp), params.a_max_self, params.d_s,
                         params.gamma_non, 1.0, ConstraintKind::wall,
                         static_cast<int>(face.face));
}

double cbf_condition_residual(double h_value, double h_dot, double gamma) {
  if (!(h_value > 0.0)) {
    throw DomainError("cbf_condition_residual: barrier value must be > 0");
  }
  return -h_dot / (h_value * h_value) - gamma * h_value;
}

}  // namespace safemarl
