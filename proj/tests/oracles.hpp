#pragma once

#include "fran/convex/lp.hpp"
#include "fran/convex/qcqp.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using Eigen::Index;

// Best vertex of {lower <= x <= upper, A x <= b} by enumerating every choice
// of n tight constraints. Returns +inf objective when infeasible.
struct VertexResult {
  double objective = std::numeric_limits<double>::infinity();
  Eigen::VectorXd x;
};

inline VertexResult enumerate_vertices(const fran::convex::LinearProgram& lp) {
  const Index n = lp.num_vars();
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> rhs;
  for (Index r = 0; r < lp.a.rows(); ++r) {
    rows.push_back(lp.a.row(r).transpose());
    rhs.push_back(lp.b(r));
  }
  for (Index v = 0; v < n; ++v) {
    if (std::isfinite(lp.upper(v))) {
      rows.push_back(Eigen::VectorXd::Unit(n, v));
      rhs.push_back(lp.upper(v));
    }
    if (std::isfinite(lp.lower(v))) {
      rows.push_back(-Eigen::VectorXd::Unit(n, v));
      rhs.push_back(-lp.lower(v));
    }
  }
  const Index total = static_cast<Index>(rows.size());
  VertexResult best;
  std::vector<Index> pick(static_cast<std::size_t>(n));
  for (Index k = 0; k < n; ++k) pick[static_cast<std::size_t>(k)] = k;
  if (total < n) return best;
  for (;;) {
    Eigen::MatrixXd m(n, n);
    Eigen::VectorXd r(n);
    for (Index k = 0; k < n; ++k) {
      m.row(k) = rows[static_cast<std::size_t>(pick[static_cast<std::size_t>(k)])].transpose();
      r(k) = rhs[static_cast<std::size_t>(pick[static_cast<std::size_t>(k)])];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    if (lu.rank() == n) {
      const Eigen::VectorXd x = lu.solve(r);
      bool ok = true;
      for (Index j = 0; j < total && ok; ++j)
        ok = rows[static_cast<std::size_t>(j)].dot(x) <= rhs[static_cast<std::size_t>(j)] + 1e-9;
      if (ok && lp.c.dot(x) < best.objective) {
        best.objective = lp.c.dot(x);
        best.x = x;
      }
    }
    Index k = n - 1;
    while (k >= 0 && pick[static_cast<std::size_t>(k)] == total - n + k) --k;
    if (k < 0) break;
    ++pick[static_cast<std::size_t>(k)];
    for (Index j = k + 1; j < n; ++j) pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
  }
  return best;
}

// Augmented Lagrangian with plain gradient descent inside; no Newton steps and
// no barrier, so it shares nothing with the solver under test.
inline double augmented_lagrangian(const fran::convex::ConvexQcqp& qp, Eigen::VectorXd x, int outer = 60) {
  const Index m = qp.num_constraints();
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
  double rho = 10.0;
  auto merit = [&](const Eigen::VectorXd& z, Eigen::VectorXd* grad) {
    double v = qp.value(qp.objective, z);
    if (grad) *grad = qp.gradient(qp.objective, z);
    for (Index j = 0; j < m; ++j) {
      const auto& f = qp.constraints[static_cast<std::size_t>(j)];
      const double c = qp.value(f, z) - qp.rhs[static_cast<std::size_t>(j)];
      const double h = std::max(0.0, lambda(j) + rho * c);
      v += (h * h - lambda(j) * lambda(j)) / (2.0 * rho);
      if (grad && h > 0.0) *grad += h * qp.gradient(f, z);
    }
    return v;
  };
  for (int it = 0; it < outer; ++it) {
    double step = 1.0;
    for (int inner = 0; inner < 20000; ++inner) {
      Eigen::VectorXd g;
      const double v = merit(x, &g);
      if (g.norm() < 1e-11) break;
      step *= 2.0;
      for (;;) {
        const Eigen::VectorXd trial = x - step * g;
        if (merit(trial, nullptr) <= v - 0.5 * step * g.squaredNorm()) {
          x = trial;
          break;
        }
        step *= 0.5;
        if (step < 1e-20) break;
      }
      if (step < 1e-20) break;
    }
    for (Index j = 0; j < m; ++j) {
      const double c = qp.value(qp.constraints[static_cast<std::size_t>(j)], x) - qp.rhs[static_cast<std::size_t>(j)];
      lambda(j) = std::max(0.0, lambda(j) + rho * c);
    }
    rho = std::min(rho * 2.0, 1e6);
  }
  return qp.value(qp.objective, x);
}

}  // namespace oracle
