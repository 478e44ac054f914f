#include "safemarl/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "safemarl/errors.hpp"

namespace safemarl {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

// min 1/2 z'Gz + lin'z  s.t.  rows * z <= rhs, with G = diag(hess).
struct DenseQp {
  VectorXd hess;
  VectorXd lin;
  MatrixXd rows;
  VectorXd rhs;
};

struct DenseResult {
  bool feasible = false;
  bool cap_hit = false;
  VectorXd z;
  VectorXd lambda;
  std::vector<int> active;
  int iterations = 0;
};

// Re-solves the equality-constrained problem on the final active set with a
// pivoted factorisation. The iterates accumulate round-off from every
// partial step; this brings the KKT residual back to machine precision.
// The polished point is kept only if it is no worse.
void polish(const DenseQp& qp, DenseResult& res) {
  const Eigen::Index n = qp.hess.size();
  const auto q = static_cast<Eigen::Index>(res.active.size());
  if (q == 0) return;
  MatrixXd K = MatrixXd::Zero(n + q, n + q);
  VectorXd rhs(n + q);
  K.topLeftCorner(n, n) = qp.hess.asDiagonal();
  rhs.head(n) = -qp.lin;
  for (Eigen::Index j = 0; j < q; ++j) {
    const auto row = qp.rows.row(res.active[static_cast<std::size_t>(j)]);
    K.block(0, n + j, n, 1) = row.transpose();
    K.block(n + j, 0, 1, n) = row;
    rhs(n + j) = qp.rhs(res.active[static_cast<std::size_t>(j)]);
  }
  const Eigen::FullPivLU<MatrixXd> lu(K);
  if (!lu.isInvertible()) return;
  VectorXd sol = lu.solve(rhs);
  // Iterative refinement with the residual accumulated in long double.
  for (int pass = 0; pass < 2; ++pass) {
    VectorXd r(n + q);
    for (Eigen::Index i = 0; i < n + q; ++i) {
      long double acc = rhs(i);
      for (Eigen::Index j = 0; j < n + q; ++j) {
        acc -= static_cast<long double>(K(i, j)) * static_cast<long double>(sol(j));
      }
      r(i) = static_cast<double>(acc);
    }
    sol += lu.solve(r);
  }
  if (!sol.allFinite()) return;
  const VectorXd lam = sol.tail(q);
  if ((lam.array() < 0.0).any()) return;

  auto residual = [&](const VectorXd& z, const VectorXd& lambda) {
    VectorXd grad = qp.hess.cwiseProduct(z) + qp.lin + qp.rows.transpose() * lambda;
    double worst = grad.cwiseAbs().maxCoeff();
    const VectorXd gap = qp.rows * z - qp.rhs;
    worst = std::max(worst, gap.maxCoeff());
    worst = std::max(worst, gap.cwiseProduct(lambda).cwiseAbs().maxCoeff());
    return worst;
  };
  VectorXd full_lam = VectorXd::Zero(qp.rows.rows());
  for (Eigen::Index j = 0; j < q; ++j) full_lam(res.active[static_cast<std::size_t>(j)]) = lam(j);
  const VectorXd z = sol.head(n);
  if (residual(z, full_lam) <= residual(res.z, res.lambda)) {
    res.z = z;
    res.lambda = full_lam;
  }
}

// Goldfarb-Idnani dual method. The active set is kept linearly independent,
// so at most n constraints are active and every linear solve is at most
// n x n. Violated constraints enter lowest index first.
DenseResult goldfarb_idnani(const DenseQp& qp) {
  const Eigen::Index n = qp.hess.size();
  const Eigen::Index m = qp.rows.rows();
  const VectorXd ginv = qp.hess.cwiseInverse();

  DenseResult out;
  out.z = -ginv.cwiseProduct(qp.lin);
  out.lambda = VectorXd::Zero(m);

  std::vector<int>& active = out.active;
  std::vector<double> mult;  // multipliers aligned with `active`
  std::vector<char> is_active(static_cast<std::size_t>(m), 0);

  auto violation = [&](Eigen::Index i) { return qp.rows.row(i).dot(out.z) - qp.rhs(i); };
  auto tolerance = [&](Eigen::Index i) { return 1e-12 * (1.0 + std::abs(qp.rhs(i))); };

  while (true) {
    int p = -1;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!is_active[i] && violation(i) > tolerance(i)) {
        p = static_cast<int>(i);
        break;
      }
    }
    if (p < 0) {
      out.feasible = true;
      break;
    }

    // Work in "n . z >= b" form: n = -row, b = -rhs.
    const VectorXd np = -qp.rows.row(p).transpose();
    double up = 0.0;
    bool added = false;
    while (!added) {
      if (++out.iterations > kQpIterationCap) {
        out.cap_hit = true;
        return out;
      }
      const auto q = static_cast<Eigen::Index>(active.size());
      VectorXd r = VectorXd::Zero(q);
      VectorXd step = ginv.cwiseProduct(np);
      if (q > 0) {
        MatrixXd N(n, q);
        for (Eigen::Index j = 0; j < q; ++j) N.col(j) = -qp.rows.row(active[j]).transpose();
        const MatrixXd GN = ginv.asDiagonal() * N;
        const MatrixXd M = N.transpose() * GN;
        r = M.ldlt().solve(GN.transpose() * np);
        step -= GN * r;
      }

      double t1 = kInf;
      int drop = -1;
      for (Eigen::Index j = 0; j < q; ++j) {
        if (r(j) > 1e-14) {
          const double ratio = mult[j] / r(j);
          if (ratio < t1) {
            t1 = ratio;
            drop = static_cast<int>(j);
          }
        }
      }

      // A full active set spans the space: the primal step is zero by
      // construction, whatever the round-off in `step` says.
      if (q >= n) step.setZero();

      double t2 = kInf;
      const double curvature = step.dot(np);
      if (step.norm() > 1e-10 * ginv.cwiseProduct(np).norm() && curvature > 0.0) {
        t2 = violation(p) / curvature;
      }

      const double t = std::min(t1, t2);
      if (t == kInf) {
        out.feasible = false;
        return out;
      }

      for (Eigen::Index j = 0; j < q; ++j) mult[j] -= t * r(j);
      up += t;
      if (t2 < kInf) out.z += t * step;

      if (t2 <= t1) {
        active.push_back(p);
        mult.push_back(up);
        is_active[p] = 1;
        added = true;
      } else {
        is_active[active[drop]] = 0;
        active.erase(active.begin() + drop);
        mult.erase(mult.begin() + drop);
      }
    }
  }

  for (std::size_t j = 0; j < active.size(); ++j) out.lambda(active[j]) = std::max(mult[j], 0.0);
  std::sort(active.begin(), active.end());
  polish(qp, out);
  return out;
}

bool finite(const Vec2& v) { return std::isfinite(v.x()) && std::isfinite(v.y()); }

void validate(const QpProblem& problem) {
  if (!finite(problem.nominal)) throw InputError("qp: non-finite nominal action");
  if (!std::isfinite(problem.box) || !(problem.box > 0.0)) throw InputError("qp: box must be > 0");
  if (!std::isfinite(problem.slack_weight) || problem.slack_weight < 0.0) {
    throw InputError("qp: slack_weight must be >= 0");
  }
  for (const auto& c : problem.constraints) {
    if (!finite(c.normal) || !std::isfinite(c.bound)) {
      throw InputError("qp: non-finite constraint data");
    }
  }
}

// Rows: user constraints, then the four box faces.
void fill_rows(const QpProblem& problem, Eigen::Index cols, MatrixXd& rows, VectorXd& rhs) {
  const auto m = static_cast<Eigen::Index>(problem.constraints.size());
  rows.setZero(m + 4, cols);
  rhs.resize(m + 4);
  for (Eigen::Index i = 0; i < m; ++i) {
    rows(i, 0) = problem.constraints[i].normal.x();
    rows(i, 1) = problem.constraints[i].normal.y();
    rhs(i) = problem.constraints[i].bound;
  }
  rows(m + 0, 0) = 1.0;
  rows(m + 1, 0) = -1.0;
  rows(m + 2, 1) = 1.0;
  rows(m + 3, 1) = -1.0;
  rhs.tail(4).setConstant(problem.box);
}

void unpack(const QpProblem& problem, const DenseResult& res, QpSolution& sol) {
  const auto m = static_cast<Eigen::Index>(problem.constraints.size());
  sol.u_safe = res.z.head<2>();
  sol.multipliers.assign(res.lambda.data(), res.lambda.data() + m);
  for (int k = 0; k < 4; ++k) sol.box_multipliers[k] = res.lambda(m + k);
  sol.active_set.clear();
  for (int idx : res.active) {
    if (idx < m + 4) sol.active_set.push_back(idx);
  }
  sol.iterations += res.iterations;
}

}  // namespace

const char* to_string(QpStatus status) {
  switch (status) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::relaxed: return "relaxed";
    case QpStatus::fallback: return "fallback";
  }
  return "?";
}

QpSolution solve(const QpProblem& problem) {
  validate(problem);
  QpSolution sol;

  DenseQp exact;
  exact.hess = VectorXd::Ones(2);
  exact.lin = -problem.nominal;
  fill_rows(problem, 2, exact.rows, exact.rhs);
  const DenseResult first = goldfarb_idnani(exact);
  sol.iterations = 0;

  if (first.feasible && !first.cap_hit) {
    unpack(problem, first, sol);
    sol.status = QpStatus::optimal;
    sol.slack = 0.0;
    sol.kkt_residual = kkt_check(problem, sol);
    return sol;
  }
  if (first.cap_hit) {
    sol.u_safe = problem.fallback_action;
    sol.multipliers.assign(problem.constraints.size(), 0.0);
    sol.iterations = first.iterations;
    sol.status = QpStatus::fallback;
    sol.kkt_residual = kkt_check(problem, sol);
    return sol;
  }
  sol.iterations = first.iterations;

  const auto m = static_cast<Eigen::Index>(problem.constraints.size());
  if (problem.slack_weight == 0.0) {
    // Free slack: the box projection with whatever slack it needs.
    sol.u_safe = problem.nominal.cwiseMax(-problem.box).cwiseMin(problem.box);
    double s = 0.0;
    for (const auto& c : problem.constraints) s = std::max(s, c.normal.dot(sol.u_safe) - c.bound);
    sol.slack = s;
    sol.multipliers.assign(problem.constraints.size(), 0.0);
    for (int k = 0; k < 4; ++k) {
      const double excess = k % 2 == 0 ? problem.nominal[k / 2] - problem.box
                                       : -problem.nominal[k / 2] - problem.box;
      sol.box_multipliers[k] = std::max(excess, 0.0);
      if (excess >= 0.0) sol.active_set.push_back(static_cast<int>(m) + k);
    }
    sol.status = QpStatus::relaxed;
    sol.kkt_residual = kkt_check(problem, sol);
    return sol;
  }

  // The slack enters as t = sqrt(2 w) s so the Hessian is the identity;
  // with w = 1e6 the unscaled system loses six digits in the active rows.
  const double scale = std::sqrt(2.0 * problem.slack_weight);
  DenseQp relaxed;
  relaxed.hess = Eigen::Vector3d::Ones();
  relaxed.lin = Eigen::Vector3d(-problem.nominal.x(), -problem.nominal.y(), 0.0);
  fill_rows(problem, 3, relaxed.rows, relaxed.rhs);
  relaxed.rows.col(2).head(m).setConstant(-1.0 / scale);
  relaxed.rows.conservativeResize(m + 5, 3);
  relaxed.rows.row(m + 4) = Eigen::RowVector3d(0.0, 0.0, -1.0);
  relaxed.rhs.conservativeResize(m + 5);
  relaxed.rhs(m + 4) = 0.0;

  const DenseResult second = goldfarb_idnani(relaxed);
  if (second.cap_hit || !second.feasible) {
    sol.u_safe = problem.fallback_action;
    sol.multipliers.assign(problem.constraints.size(), 0.0);
    sol.iterations += second.iterations;
    sol.status = QpStatus::fallback;
    sol.kkt_residual = kkt_check(problem, sol);
    return sol;
  }
  unpack(problem, second, sol);
  sol.slack = std::max(second.z(2) / scale, 0.0);
  sol.slack_multiplier = scale * second.lambda(m + 4);
  sol.status = QpStatus::relaxed;
  sol.kkt_residual = kkt_check(problem, sol);
  return sol;
}

double kkt_check(const QpProblem& problem, const QpSolution& solution) {
  const Vec2& u = solution.u_safe;
  const bool relaxed = solution.status == QpStatus::relaxed;
  const double s = relaxed ? solution.slack : 0.0;

  double worst = 0.0;
  auto note = [&worst](double r) { worst = std::max(worst, std::abs(r)); };

  Vec2 grad = u - problem.nominal;
  double slack_grad = 2.0 * problem.slack_weight * s - solution.slack_multiplier;

  for (std::size_t i = 0; i < problem.constraints.size(); ++i) {
    const auto& c = problem.constraints[i];
    const double lam = i < solution.multipliers.size() ? solution.multipliers[i] : 0.0;
    const double gap = c.normal.dot(u) - c.bound - s;
    grad += lam * c.normal;
    slack_grad -= lam;
    note(std::max(gap, 0.0));
    note(std::max(-lam, 0.0));
    note(lam * gap);
  }
  for (int k = 0; k < 4; ++k) {
    const double lam = solution.box_multipliers[k];
    const double sign = k % 2 == 0 ? 1.0 : -1.0;
    const double gap = sign * u[k / 2] - problem.box;
    grad[k / 2] += sign * lam;
    note(std::max(gap, 0.0));
    note(std::max(-lam, 0.0));
    note(lam * gap);
  }
  note(grad.cwiseAbs().maxCoeff());
  if (relaxed) {
    note(slack_grad);
    note(std::max(-s, 0.0));
    note(std::max(-solution.slack_multiplier, 0.0));
    note(solution.slack_multiplier * s);
  }
  return worst;
}

}  // namespace safemarl
