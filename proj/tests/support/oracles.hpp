#pragma once

// Independent reference computations shared by the unit and acceptance
// tests. Nothing here calls into the library's solver or barrier code.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Vec2 = Eigen::Vector2d;

struct HalfPlane {
  Vec2 normal;
  double bound;
};

// 1/2 |u - nominal|^2 + w s(u)^2, with s(u) the smallest slack that makes
// u feasible. Returns +inf for u outside the box.
inline double relaxed_objective(const Vec2& u, const Vec2& nominal,
                                const std::vector<HalfPlane>& rows, double box, double w) {
  if (std::abs(u.x()) > box || std::abs(u.y()) > box) return std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (const auto& r : rows) s = std::max(s, r.normal.dot(u) - r.bound);
  return 0.5 * (u - nominal).squaredNorm() + w * s * s;
}

// Exact-problem objective: +inf outside the feasible set.
inline double exact_objective(const Vec2& u, const Vec2& nominal,
                              const std::vector<HalfPlane>& rows, double box) {
  if (std::abs(u.x()) > box || std::abs(u.y()) > box) return std::numeric_limits<double>::infinity();
  for (const auto& r : rows) {
    if (r.normal.dot(u) > r.bound) return std::numeric_limits<double>::infinity();
  }
  return 0.5 * (u - nominal).squaredNorm();
}

struct GridResult {
  Vec2 u;
  double value;
};

// Brute force: a (2k+1)^2 grid over the box, then repeated zooms around the
// best cell. Candidates are also snapped onto every constraint line through
// the grid so that thin feasible slivers are not missed.
template <typename Objective>
GridResult grid_minimize(Objective f, const std::vector<HalfPlane>& rows, double box,
                         int half_cells = 100, int levels = 40) {
  GridResult best{Vec2::Zero(), std::numeric_limits<double>::infinity()};
  auto consider = [&](const Vec2& u) {
    const double v = f(u);
    if (v < best.value) best = {u, v};
  };
  Vec2 centre = Vec2::Zero();
  double half_width = box;
  for (int level = 0; level < levels; ++level) {
    const double h = half_width / half_cells;
    for (int i = -half_cells; i <= half_cells; ++i) {
      for (int j = -half_cells; j <= half_cells; ++j) {
        consider(centre + Vec2(i * h, j * h));
      }
    }
    // Points on each constraint line (and on pairwise intersections) near
    // the current window.
    for (std::size_t a = 0; a < rows.size(); ++a) {
      const Vec2& n = rows[a].normal;
      const double nn = n.squaredNorm();
      if (nn == 0.0) continue;
      const Vec2 base = centre - n * ((n.dot(centre) - rows[a].bound) / nn);
      const Vec2 tangent(-n.y(), n.x());
      const Vec2 t = tangent / std::sqrt(nn);
      for (int i = -half_cells; i <= half_cells; ++i) {
        // Nudge just inside the half-plane to survive rounding.
        const Vec2 p = base + t * (i * h);
        consider(p - n * (1e-15 / std::sqrt(nn)));
        consider(p);
      }
      for (std::size_t b = a + 1; b < rows.size(); ++b) {
        Eigen::Matrix2d m;
        m.row(0) = rows[a].normal.transpose();
        m.row(1) = rows[b].normal.transpose();
        if (std::abs(m.determinant()) < 1e-14) continue;
        const Vec2 x = m.inverse() * Vec2(rows[a].bound, rows[b].bound);
        consider(x);
      }
      // Intersections with the box edges.
      for (int axis = 0; axis < 2; ++axis) {
        for (double side : {-box, box}) {
          const int other = 1 - axis;
          if (std::abs(n[other]) < 1e-14) continue;
          Vec2 p;
          p[axis] = side;
          p[other] = (rows[a].bound - n[axis] * side) / n[other];
          consider(p);
        }
      }
    }
    // Box corners and the clipped centre.
    for (double x : {-box, box}) {
      for (double y : {-box, box}) consider(Vec2(x, y));
    }
    centre = best.u;
    half_width = std::max(10.0 * h, 1e-12);
  }
  return best;
}

// Exact minimiser of the slack-relaxed problem
//   min 1/2 |u - nominal|^2 + w s^2  s.t.  n.u <= b + s, s >= 0, |u|_inf <= box
// by enumeration: for a strictly convex QP the optimum is the equality-
// constrained minimiser on its own active set, so the best primal-feasible
// candidate over every active set of size <= 3 is the global optimum.
inline GridResult enumerate_relaxed(const Vec2& nominal, const std::vector<HalfPlane>& rows,
                                    double box, double w) {
  // Extended precision: the slack weight makes the KKT systems stiff, and
  // the oracle has to be well ahead of the solver it checks.
  using Real = long double;
  using V3 = Eigen::Matrix<Real, 3, 1>;
  using MatX = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
  using VecX = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
  std::vector<V3> a;  // rows over (u_x, u_y, s)
  std::vector<Real> b;
  for (const auto& r : rows) a.emplace_back(r.normal.x(), r.normal.y(), -1.0L), b.push_back(r.bound);
  for (int axis = 0; axis < 2; ++axis) {
    for (Real sign : {1.0L, -1.0L}) {
      V3 row = V3::Zero();
      row(axis) = sign;
      a.push_back(row);
      b.push_back(box);
    }
  }
  a.emplace_back(0.0L, 0.0L, -1.0L);
  b.push_back(0.0L);

  const V3 hdiag(1.0L, 1.0L, 2.0L * w);
  const V3 g(-nominal.x(), -nominal.y(), 0.0L);
  GridResult best{Vec2::Zero(), std::numeric_limits<double>::infinity()};
  Real best_value = std::numeric_limits<Real>::infinity();
  const int m = static_cast<int>(a.size());
  auto consider = [&](const std::vector<int>& active) {
    const int k = static_cast<int>(active.size());
    MatX K = MatX::Zero(3 + k, 3 + k);
    VecX rhs(3 + k);
    K.topLeftCorner(3, 3) = hdiag.asDiagonal();
    rhs.head(3) = -g;
    for (int i = 0; i < k; ++i) {
      K.block(0, 3 + i, 3, 1) = a[active[i]];
      K.block(3 + i, 0, 1, 3) = a[active[i]].transpose();
      rhs(3 + i) = b[active[i]];
    }
    const Eigen::FullPivLU<MatX> lu(K);
    if (lu.rank() < 3 + k) return;
    const V3 x = lu.solve(rhs).head(3);
    for (int i = 0; i < m; ++i) {
      if (a[i].dot(x) > b[i] + 1e-12L) return;
    }
    const Real v = 0.5L * ((x(0) - nominal.x()) * (x(0) - nominal.x()) +
                           (x(1) - nominal.y()) * (x(1) - nominal.y())) +
                   static_cast<Real>(w) * x(2) * x(2);
    if (v < best_value) {
      best_value = v;
      best = {Vec2(static_cast<double>(x(0)), static_cast<double>(x(1))), static_cast<double>(v)};
    }
  };
  consider({});
  for (int i = 0; i < m; ++i) {
    consider({i});
    for (int j = i + 1; j < m; ++j) {
      consider({i, j});
      for (int l = j + 1; l < m; ++l) consider({i, j, l});
    }
  }
  return best;
}

// Relative-state barrier, written out independently of the library.
inline std::optional<double> barrier(const Vec2& dp, const Vec2& dv, double a, double d) {
  const double r = dp.norm();
  if (r <= d) return std::nullopt;
  return dp.dot(dv) / r + std::sqrt(2.0 * a * (r - d));
}

// Relative-acceleration flow of the double integrator over time t.
inline void flow(Vec2& dp, Vec2& dv, const Vec2& da, double t) {
  dp = dp + t * dv + 0.5 * t * t * da;
  dv = dv + t * da;
}

// Central finite difference of h along the double-integrator flow.
inline double barrier_rate_fd(const Vec2& dp, const Vec2& dv, const Vec2& da, double a, double d,
                              double eps) {
  Vec2 p1 = dp, v1 = dv, p0 = dp, v0 = dv;
  flow(p1, v1, da, eps);
  flow(p0, v0, da, -eps);
  const auto hp = barrier(p1, v1, a, d);
  const auto hm = barrier(p0, v0, a, d);
  return (*hp - *hm) / (2.0 * eps);
}

inline double relative_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / scale;
}

}  // namespace oracle
