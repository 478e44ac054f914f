#include "safemarl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "safemarl/errors.hpp"

namespace safemarl {

namespace {

bool finite(const Vec2& v) { return std::isfinite(v.x()) && std::isfinite(v.y()); }

}  // namespace

void WorldConfig::validate(double safe_distance) const {
  auto fail = [](const std::string& msg) { throw ConfigError("world: " + msg); };
  if (!(wall_half_extent > 0.0)) fail("wall_half_extent must be > 0");
  if (!(dt > 0.0)) fail("dt must be > 0");
  if (!(a_max > 0.0)) fail("a_max must be > 0");
  if (!(v_max > 0.0)) fail("v_max must be > 0");
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    const auto& o = obstacles[i];
    if (!finite(o.position) || !(o.radius >= 0.0)) {
      fail("obstacle " + std::to_string(i) + " is malformed");
    }
    if (o.position.cwiseAbs().maxCoeff() > wall_half_extent) {
      fail("obstacle " + std::to_string(i) + " lies outside the wall");
    }
  }
  for (std::size_t i = 0; i < checkin_points.size(); ++i) {
    const Vec2& c = checkin_points[i];
    if (!finite(c) || !(c.cwiseAbs().maxCoeff() < wall_half_extent)) {
      fail("check-in point " + std::to_string(i) + " must lie strictly inside the wall");
    }
    for (std::size_t j = 0; j < obstacles.size(); ++j) {
      if (pairwise_distance(c, obstacles[j].position) <= safe_distance + obstacles[j].radius) {
        std::ostringstream os;
        os << "check-in point " << i << " is inside the safe radius of obstacle " << j;
        fail(os.str());
      }
    }
  }
}

WorldConfig WorldConfig::patrol_default() {
  WorldConfig w;
  w.obstacles = {{Vec2(-0.35, 0.0), 0.0}, {Vec2(0.35, 0.25), 0.0}, {Vec2(0.0, -0.45), 0.0}};
  w.checkin_points = {Vec2(0.7, 0.7), Vec2(-0.7, 0.7), Vec2(-0.7, -0.7), Vec2(0.7, -0.7),
                      Vec2(0.0, 0.0)};
  return w;
}

AgentState step_agent(const AgentState& state, const Vec2& accel, double dt, double v_max) {
  if (!finite(state.position) || !finite(state.velocity) || !finite(accel) ||
      !std::isfinite(dt) || !std::isfinite(v_max)) {
    throw InputError("step_agent: non-finite input");
  }
  if (!(dt > 0.0)) throw InputError("step_agent: dt must be > 0");

  AgentState next;
  next.velocity = (state.velocity + accel * dt).cwiseMax(-v_max).cwiseMin(v_max);
  next.position = state.position + next.velocity * dt;
  return next;
}

double pairwise_distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

std::array<WallContact, 4> wall_contacts(const AgentState& state, const WorldConfig& world) {
  const double L = world.wall_half_extent;
  const Vec2& p = state.position;
  return {{
      {WallFace::pos_x, Vec2(L, p.y()), L - p.x()},
      {WallFace::neg_x, Vec2(-L, p.y()), L + p.x()},
      {WallFace::pos_y, Vec2(p.x(), L), L - p.y()},
      {WallFace::neg_y, Vec2(p.x(), -L), L + p.y()},
  }};
}

WallContact wall_clearance(const AgentState& state, const WorldConfig& world) {
  if (!finite(state.position)) throw InputError("wall_clearance: non-finite position");
  if (state.position.cwiseAbs().maxCoeff() > world.wall_half_extent) {
    std::ostringstream os;
    os << "wall_clearance: agent at (" << state.position.x() << ", " << state.position.y()
       << ") is outside the wall square of half extent " << world.wall_half_extent;
    throw InvariantError(os.str());
  }
  const auto faces = wall_contacts(state, world);
  // min_element keeps the first minimum, which is the face-order tie break.
  return *std::min_element(faces.begin(), faces.end(),
                           [](const WallContact& a, const WallContact& b) {
                             return a.distance < b.distance;
                           });
}

bool confine_to_walls(AgentState& state, const WorldConfig& world) {
  const double L = world.wall_half_extent;
  bool touched = false;
  for (int axis = 0; axis < 2; ++axis) {
    double& p = state.position[axis];
    double& v = state.velocity[axis];
    if (p > L) {
      p = L;
      v = std::min(v, 0.0);
      touched = true;
    } else if (p < -L) {
      p = -L;
      v = std::max(v, 0.0);
      touched = true;
    }
  }
  return touched;
}

}  // namespace safemarl
