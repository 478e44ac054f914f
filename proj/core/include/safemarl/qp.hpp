#pragma once

#include <array>
#include <vector>

#include "safemarl/cbf.hpp"

namespace safemarl {

/// min 1/2 |u - nominal|^2 + slack_weight s^2
/// s.t. c.normal . u <= c.bound + s for every constraint, s >= 0,
///      u in [-box, box]^2.
/// The slack only comes into play when the unrelaxed problem is infeasible.
struct QpProblem {
  Vec2 nominal = Vec2::Zero();
  std::vector<LinearConstraint> constraints;
  double box = 1.0;
  double slack_weight = 1e6;
  // Returned as u_safe when the solver hits its iteration cap.
  Vec2 fallback_action = Vec2::Zero();
};

enum class QpStatus { optimal = 0, relaxed = 1, fallback = 2 };

const char* to_string(QpStatus status);

struct QpSolution {
  Vec2 u_safe = Vec2::Zero();
  double slack = 0.0;
  // Indices into [constraints..., box +x, box -x, box +y, box -y].
  std::vector<int> active_set;
  std::vector<double> multipliers;           // one per constraint
  std::array<double, 4> box_multipliers{};   // +x, -x, +y, -y
  double slack_multiplier = 0.0;             // for s >= 0 (relaxed only)
  double kkt_residual = 0.0;
  int iterations = 0;
  QpStatus status = QpStatus::optimal;
};

inline constexpr int kQpIterationCap = 64;

/// Dual active-set (Goldfarb-Idnani) projection. Starts at the unconstrained
/// minimiser, so a feasible nominal is returned untouched. Throws InputError
/// on non-finite data.
QpSolution solve(const QpProblem& problem);

/// Largest of the stationarity, primal feasibility, dual feasibility and
/// complementary slackness residuals of `solution` for `problem`.
double kkt_check(const QpProblem& problem, const QpSolution& solution);

}  // namespace safemarl
