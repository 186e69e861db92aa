#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace fran::convex {

using Index = Eigen::Index;

struct SolverSettings {
  double initial_t = 0.0;          // <= 0 picks t from the starting objective
  double t_multiplier = 20.0;
  double newton_tolerance = 1e-10; // half squared Newton decrement
  double gap_tolerance = 1e-10;    // relative duality gap
  double gap_floor = 1e-12;        // absolute duality gap
  int max_newton = 400;
  double feasibility_tolerance = 1e-8;
  double psd_ridge = 1e-10;
  int max_backtracks = 80;
  /// Feasible starts closer than this (relative to 1 + |rhs|) to any
  /// constraint go through phase one.
  double interior_margin = 1e-6;

  /// Throws std::invalid_argument if any field is non-positive.
  void validate() const;
};

enum class SolveStatus { kOptimal, kInfeasible, kIterationLimit, kInvalidStart };

std::string to_string(SolveStatus s);

/// ½ x_bᵀ Q x_b on one variable block. Either `dense` (size x size) or
/// `diagonal` (size) is populated.
struct QuadBlock {
  Index block = 0;
  Eigen::MatrixXd dense;
  Eigen::VectorXd diagonal;
};

/// ½ xᵀQx + linearᵀx + constant, Q block diagonal.
struct ConvexFunction {
  std::vector<QuadBlock> quad;
  Eigen::VectorXd linear;
  double constant = 0.0;

  bool affine() const { return quad.empty(); }
};

/// minimize objective(x) subject to constraints[j](x) <= rhs[j].
///
/// Quadratic terms live on disjoint contiguous variable blocks. Variables
/// outside every block may only appear linearly.
struct ConvexQcqp {
  Index num_vars = 0;
  std::vector<Index> block_start;
  std::vector<Index> block_size;
  ConvexFunction objective;
  std::vector<ConvexFunction> constraints;
  std::vector<double> rhs;
  std::vector<std::string> labels;

  explicit ConvexQcqp(Index n = 0);

  Index add_block(Index start, Index size);
  Index num_constraints() const { return static_cast<Index>(constraints.size()); }
  void add_constraint(ConvexFunction f, double b, std::string label = {});

  double value(const ConvexFunction& f, const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const ConvexFunction& f, const Eigen::VectorXd& x) const;
  /// rhs - f_j(x) for every constraint.
  Eigen::VectorXd slacks(const Eigen::VectorXd& x) const;

  /// Checks dimensions, finiteness and that every quadratic block is PSD up to
  /// the ridge. Throws std::invalid_argument naming the offending term.
  void validate(double ridge) const;
};

struct QcqpSolution {
  SolveStatus status = SolveStatus::kIterationLimit;
  Eigen::VectorXd x;
  Eigen::VectorXd multipliers;
  double objective = 0.0;
  double gap = 0.0;
  int newton_steps = 0;
  bool used_phase_one = false;
  /// True when the feasible set had no usable interior and the constraints
  /// were relaxed by the feasibility tolerance.
  bool relaxed = false;
  /// Barrier objective t f0 - sum log(slack) at every accepted Newton
  /// iterate, one list per value of t.
  std::vector<std::vector<double>> centering_trace;
};

/// Log-barrier interior-point method. If `x0` is not strictly feasible a
/// slack-minimizing phase one is run first.
QcqpSolution solve_qcqp(const ConvexQcqp& qp, const SolverSettings& settings, const Eigen::VectorXd& x0);

struct KktReport {
  double stationarity = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;

  double max() const;
};

/// Stationarity is relative to the gradient scale, complementarity to the
/// objective scale, primal feasibility to each constraint's scale.
KktReport verify_kkt(const ConvexQcqp& qp, const Eigen::VectorXd& x, const Eigen::VectorXd& multipliers);

/// Plain-text dump:
///   qcqp <num_vars> <num_constraints> <num_blocks>
///   block <start> <size>                        (per block)
///   function objective|constraint <j> <rhs> <label>
///   constant <c>
///   linear <nnz>, then "<index> <value>" lines
///   quad <block> dense|diag, then the rows of the matrix or the diagonal
void write_debug_dump(const ConvexQcqp& qp, std::ostream& out);

}  // namespace fran::convex
