#include "fran/convex/lp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace fran::convex {

LinearProgram::LinearProgram(Index n)
    : c(Eigen::VectorXd::Zero(n)),
      lower(Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity())),
      upper(Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity())),
      a(0, n) {}

void LinearProgram::add_row(const Eigen::VectorXd& row, double rhs) {
  a.conservativeResize(a.rows() + 1, Eigen::NoChange);
  a.row(a.rows() - 1) = row.transpose();
  b.conservativeResize(b.size() + 1);
  b(b.size() - 1) = rhs;
}

void LinearProgram::validate() const {
  const Index n = c.size();
  if (lower.size() != n || upper.size() != n) throw std::invalid_argument("LP bounds have wrong size");
  if (a.cols() != n && a.rows() > 0) throw std::invalid_argument("LP row width differs from variable count");
  if (a.rows() != b.size()) throw std::invalid_argument("LP rows and rhs differ in count");
  if (!c.allFinite() || !a.allFinite() || !b.allFinite()) throw std::invalid_argument("LP has non-finite coefficients");
  for (Index v = 0; v < n; ++v)
    if (std::isnan(lower(v)) || std::isnan(upper(v)) || lower(v) > upper(v))
      throw std::invalid_argument("LP bound " + std::to_string(v) + " has lower > upper");
}

LpSolution solve_lp(const LinearProgram& lp, const SolverSettings& settings) {
  lp.validate();
  const Index n = lp.num_vars();
  LpSolution out;

  // Eliminate fixed variables.
  std::vector<Index> free;
  Eigen::VectorXd fixed = Eigen::VectorXd::Zero(n);
  for (Index v = 0; v < n; ++v) {
    const double width = lp.upper(v) - lp.lower(v);
    if (std::isfinite(width) && width <= 1e-12 * (1.0 + std::abs(lp.upper(v)))) fixed(v) = lp.lower(v);
    else free.push_back(v);
  }
  const Index nf = static_cast<Index>(free.size());
  const Eigen::VectorXd shift = lp.a.rows() > 0 ? Eigen::VectorXd(lp.a * fixed) : Eigen::VectorXd();

  auto assemble = [&](const Eigen::VectorXd& z) {
    Eigen::VectorXd x = fixed;
    for (Index k = 0; k < nf; ++k) x(free[static_cast<std::size_t>(k)]) = z(k);
    return x;
  };

  ConvexQcqp qp(nf);
  for (Index k = 0; k < nf; ++k) qp.objective.linear(k) = lp.c(free[static_cast<std::size_t>(k)]);
  for (Index r = 0; r < lp.a.rows(); ++r) {
    ConvexFunction f;
    f.linear.resize(nf);
    for (Index k = 0; k < nf; ++k) f.linear(k) = lp.a(r, free[static_cast<std::size_t>(k)]);
    const double rhs = lp.b(r) - shift(r);
    if (f.linear.cwiseAbs().maxCoeff() == 0.0) {
      if (rhs < -settings.feasibility_tolerance * (1.0 + std::abs(lp.b(r)))) {
        out.status = SolveStatus::kInfeasible;
        return out;
      }
      continue;
    }
    qp.add_constraint(std::move(f), rhs, "row " + std::to_string(r));
  }
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(nf);
  for (Index k = 0; k < nf; ++k) {
    const Index v = free[static_cast<std::size_t>(k)];
    const bool lo = std::isfinite(lp.lower(v));
    const bool hi = std::isfinite(lp.upper(v));
    if (lo) {
      ConvexFunction f;
      f.linear = Eigen::VectorXd::Zero(nf);
      f.linear(k) = -1.0;
      qp.add_constraint(std::move(f), -lp.lower(v), "lower " + std::to_string(v));
    }
    if (hi) {
      ConvexFunction f;
      f.linear = Eigen::VectorXd::Zero(nf);
      f.linear(k) = 1.0;
      qp.add_constraint(std::move(f), lp.upper(v), "upper " + std::to_string(v));
    }
    if (lo && hi) z0(k) = 0.5 * (lp.lower(v) + lp.upper(v));
    else if (lo) z0(k) = lp.lower(v) + 1.0;
    else if (hi) z0(k) = lp.upper(v) - 1.0;
  }

  if (nf == 0) {
    out.status = SolveStatus::kOptimal;
    out.x = fixed;
    out.objective = lp.c.dot(fixed);
    return out;
  }
  const QcqpSolution sol = solve_qcqp(qp, settings, z0);
  out.status = sol.status;
  out.newton_steps = sol.newton_steps;
  if (sol.status == SolveStatus::kInfeasible) return out;
  out.x = assemble(sol.x);
  out.objective = lp.c.dot(out.x);
  return out;
}

}  // namespace fran::convex
