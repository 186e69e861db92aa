#pragma once

#include "fran/convex/qcqp.hpp"

#include <Eigen/Dense>

namespace fran::convex {

/// minimize cᵀx subject to lower <= x <= upper and A x <= b. Infinite bounds
/// are allowed.
struct LinearProgram {
  Eigen::VectorXd c;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::MatrixXd a;
  Eigen::VectorXd b;

  LinearProgram() = default;
  explicit LinearProgram(Index n);

  Index num_vars() const { return c.size(); }
  void add_row(const Eigen::VectorXd& row, double rhs);
  /// Throws std::invalid_argument on inconsistent sizes, non-finite
  /// coefficients or lower > upper.
  void validate() const;
};

struct LpSolution {
  SolveStatus status = SolveStatus::kIterationLimit;
  Eigen::VectorXd x;
  double objective = 0.0;
  int newton_steps = 0;
};

/// Runs the barrier solver on the LP. Variables with equal bounds are
/// eliminated first.
LpSolution solve_lp(const LinearProgram& lp, const SolverSettings& settings);

}  // namespace fran::convex
