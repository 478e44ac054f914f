#include "safemarl/shield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "safemarl/errors.hpp"

namespace safemarl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Neighborhood gather(const AgentState& self, std::span<const Neighbor> agents,
                    std::span<const ObstacleSpec> obstacles, const WorldConfig& world,
                    double r_sense) {
  Neighborhood out;
  for (const auto& n : agents) {
    if (pairwise_distance(self, n.state) <= r_sense) out.agents.push_back(n);
  }
  std::sort(out.agents.begin(), out.agents.end(),
            [](const Neighbor& a, const Neighbor& b) { return a.id < b.id; });
  for (std::size_t j = 0; j < obstacles.size(); ++j) {
    if (pairwise_distance(self, obstacles[j]) <= r_sense) {
      out.obstacles.push_back({static_cast<int>(j), obstacles[j]});
    }
  }
  for (const auto& face : wall_contacts(self, world)) {
    if (face.distance <= r_sense) out.walls.push_back(face);
  }
  return out;
}

Vec2 away(const Vec2& dp, const Vec2& velocity) {
  const double r = dp.norm();
  if (r > 0.0) return dp / r;
  const double v = velocity.norm();
  if (v > 0.0) return -velocity / v;
  return Vec2::UnitX();
}

}  // namespace

const char* to_string(ShieldStatus status) {
  switch (status) {
    case ShieldStatus::passthrough: return "passthrough";
    case ShieldStatus::corrected: return "corrected";
    case ShieldStatus::relaxed: return "relaxed";
    case ShieldStatus::fallback: return "fallback";
  }
  return "?";
}

Neighborhood neighborhood(int self_id, std::span<const AgentState> all_agents,
                          std::span<const ObstacleSpec> obstacles, const WorldConfig& world,
                          double r_sense) {
  if (self_id < 0 || static_cast<std::size_t>(self_id) >= all_agents.size()) {
    throw InputError("neighborhood: self id out of range");
  }
  std::vector<Neighbor> others;
  for (std::size_t i = 0; i < all_agents.size(); ++i) {
    if (static_cast<int>(i) != self_id) others.push_back({static_cast<int>(i), all_agents[i]});
  }
  return gather(all_agents[self_id], others, obstacles, world, r_sense);
}

ConstraintSet build_constraints(const AgentState& self, const Neighborhood& local,
                                const ShieldParams& params) {
  ConstraintSet set;
  set.min_h = kInf;
  double worst = kInf;

  // A missing barrier value means the entity is inside its unsafe ball.
  // The brake direction always points away from the entity with the
  // smallest barrier value; any entity with h <= 0 forces the fallback.
  auto consider = [&](std::optional<double> h, const Vec2& dp, std::optional<LinearConstraint> c) {
    const double value = h ? *h : -kInf;
    if (value < worst || set.brake_direction.isZero()) {
      worst = value;
      set.brake_direction = away(dp, self.velocity);
    }
    set.min_h = std::min(set.min_h, value);
    if (!h || *h <= 0.0 || !c) {
      set.needs_fallback = true;
      return;
    }
    set.constraints.push_back(*c);
  };

  for (const auto& n : local.agents) {
    const Vec2 dp = self.position - n.state.position;
    consider(h_cooperative(dp, self.velocity - n.state.velocity, params), dp,
             cooperative_constraint(self, n.state, n.id, params));
  }
  for (const auto& o : local.obstacles) {
    const Vec2 dp = self.position - o.spec.position;
    consider(h_noncooperative(dp, self.velocity, params, o.spec.radius), dp,
             noncooperative_constraint(self, o.spec, o.id, params));
  }
  for (const auto& face : local.walls) {
    consider(h_wall(self, face, params), self.position - face.point,
             wall_constraint(self, face, params));
  }
  return set;
}

ShieldResult filter_action(int agent_id, const Vec2& u_nominal, const AgentState& self,
                           std::span<const Neighbor> neighbors,
                           std::span<const ObstacleSpec> obstacles, const WorldConfig& world,
                           const ShieldParams& params) {
  if (!std::isfinite(u_nominal.x()) || !std::isfinite(u_nominal.y())) {
    throw InputError("filter_action: non-finite nominal action");
  }
  wall_clearance(self, world);  // throws if the agent is outside the wall

  const Neighborhood local = gather(self, neighbors, obstacles, world, params.r_sense);
  const ConstraintSet set = build_constraints(self, local, params.enforced());

  ShieldResult out;
  ShieldReport& report = out.report;
  report.agent_id = agent_id;
  report.u_nominal = u_nominal;
  report.min_h = set.min_h;
  for (const auto& c : set.constraints) ++report.constraints_built[static_cast<int>(c.kind)];

  if (set.needs_fallback) {
    out.u_safe = world.a_max * set.brake_direction;
    report.status = ShieldStatus::fallback;
    report.u_safe = out.u_safe;
    return out;
  }

  QpProblem qp;
  qp.nominal = u_nominal;
  qp.constraints = set.constraints;
  qp.box = world.a_max;
  qp.slack_weight = params.slack_weight;
  qp.fallback_action = world.a_max * set.brake_direction;
  const QpSolution sol = solve(qp);

  out.u_safe = sol.u_safe;
  report.u_safe = sol.u_safe;
  report.slack = sol.slack;
  switch (sol.status) {
    case QpStatus::fallback: report.status = ShieldStatus::fallback; break;
    case QpStatus::relaxed: report.status = ShieldStatus::relaxed; break;
    case QpStatus::optimal:
      report.status = (sol.u_safe.x() == u_nominal.x() && sol.u_safe.y() == u_nominal.y())
                          ? ShieldStatus::passthrough
                          : ShieldStatus::corrected;
      break;
  }
  return out;
}

}  // namespace safemarl
