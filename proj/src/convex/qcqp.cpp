#include "fran/convex/qcqp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace fran::convex {

void SolverSettings::validate() const {
  if (!(initial_t >= 0.0)) throw std::invalid_argument("initial_t must be >= 0");
  if (!(t_multiplier > 1.0)) throw std::invalid_argument("t_multiplier must be > 1");
  if (!(newton_tolerance > 0.0 && gap_tolerance > 0.0 && gap_floor > 0.0 &&
        feasibility_tolerance > 0.0 && psd_ridge > 0.0))
    throw std::invalid_argument("solver tolerances must be positive");
  if (!(interior_margin >= 0.0)) throw std::invalid_argument("interior_margin must be >= 0");
  if (max_newton < 1 || max_backtracks < 1) throw std::invalid_argument("iteration limits must be positive");
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kIterationLimit: return "iteration-limit";
    case SolveStatus::kInvalidStart: return "invalid-start";
  }
  return "unknown";
}

ConvexQcqp::ConvexQcqp(Index n) : num_vars(n) { objective.linear = Eigen::VectorXd::Zero(n); }

Index ConvexQcqp::add_block(Index start, Index size) {
  block_start.push_back(start);
  block_size.push_back(size);
  return static_cast<Index>(block_start.size()) - 1;
}

void ConvexQcqp::add_constraint(ConvexFunction f, double b, std::string label) {
  if (f.linear.size() == 0) f.linear = Eigen::VectorXd::Zero(num_vars);
  constraints.push_back(std::move(f));
  rhs.push_back(b);
  labels.push_back(std::move(label));
}

namespace {

double quad_value(const QuadBlock& q, const Eigen::Ref<const Eigen::VectorXd>& xb) {
  if (q.diagonal.size() > 0) return 0.5 * xb.dot(q.diagonal.cwiseProduct(xb));
  return 0.5 * xb.dot(q.dense * xb);
}

void add_quad_gradient(const QuadBlock& q, const Eigen::Ref<const Eigen::VectorXd>& xb,
                       Eigen::Ref<Eigen::VectorXd> out) {
  if (q.diagonal.size() > 0) out += q.diagonal.cwiseProduct(xb);
  else out.noalias() += q.dense * xb;
}

void add_quad_scaled(const QuadBlock& q, double scale, Eigen::MatrixXd& d) {
  if (q.diagonal.size() > 0) d.diagonal() += scale * q.diagonal;
  else d += scale * q.dense;
}

}  // namespace

double ConvexQcqp::value(const ConvexFunction& f, const Eigen::VectorXd& x) const {
  double v = f.constant + f.linear.dot(x);
  for (const auto& q : f.quad) {
    const auto b = static_cast<std::size_t>(q.block);
    v += quad_value(q, x.segment(block_start[b], block_size[b]));
  }
  return v;
}

Eigen::VectorXd ConvexQcqp::gradient(const ConvexFunction& f, const Eigen::VectorXd& x) const {
  Eigen::VectorXd g = f.linear;
  for (const auto& q : f.quad) {
    const auto b = static_cast<std::size_t>(q.block);
    add_quad_gradient(q, x.segment(block_start[b], block_size[b]), g.segment(block_start[b], block_size[b]));
  }
  return g;
}

Eigen::VectorXd ConvexQcqp::slacks(const Eigen::VectorXd& x) const {
  Eigen::VectorXd s(num_constraints());
  for (Index j = 0; j < num_constraints(); ++j)
    s(j) = rhs[static_cast<std::size_t>(j)] - value(constraints[static_cast<std::size_t>(j)], x);
  return s;
}

void ConvexQcqp::validate(double ridge) const {
  std::vector<bool> used(static_cast<std::size_t>(num_vars), false);
  for (std::size_t b = 0; b < block_start.size(); ++b) {
    if (block_start[b] < 0 || block_size[b] < 1 || block_start[b] + block_size[b] > num_vars)
      throw std::invalid_argument("block " + std::to_string(b) + " is out of range");
    for (Index v = block_start[b]; v < block_start[b] + block_size[b]; ++v) {
      if (used[static_cast<std::size_t>(v)]) throw std::invalid_argument("blocks overlap");
      used[static_cast<std::size_t>(v)] = true;
    }
  }
  auto check = [&](const ConvexFunction& f, const std::string& name) {
    if (f.linear.size() != num_vars) throw std::invalid_argument(name + ": linear term has wrong size");
    if (!f.linear.allFinite() || !std::isfinite(f.constant))
      throw std::invalid_argument(name + ": non-finite coefficients");
    for (const auto& q : f.quad) {
      if (q.block < 0 || q.block >= static_cast<Index>(block_start.size()))
        throw std::invalid_argument(name + ": quadratic term on unknown block");
      const Index size = block_size[static_cast<std::size_t>(q.block)];
      if (q.diagonal.size() > 0) {
        if (q.diagonal.size() != size || !q.diagonal.allFinite())
          throw std::invalid_argument(name + ": bad diagonal quadratic term");
        if ((q.diagonal.array() < -ridge * (1.0 + q.diagonal.cwiseAbs().maxCoeff())).any())
          throw std::invalid_argument(name + ": quadratic term is not PSD");
        continue;
      }
      if (q.dense.rows() != size || q.dense.cols() != size || !q.dense.allFinite())
        throw std::invalid_argument(name + ": bad dense quadratic term");
      if ((q.dense - q.dense.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + q.dense.cwiseAbs().maxCoeff()))
        throw std::invalid_argument(name + ": quadratic term is not symmetric");
      const double scale = 1.0 + q.dense.diagonal().cwiseAbs().maxCoeff();
      Eigen::MatrixXd shifted = q.dense;
      shifted.diagonal().array() += ridge * scale;
      Eigen::LLT<Eigen::MatrixXd> llt(shifted);
      if (llt.info() != Eigen::Success) throw std::invalid_argument(name + ": quadratic term is not PSD");
    }
  };
  check(objective, "objective");
  if (rhs.size() != constraints.size()) throw std::invalid_argument("rhs and constraints differ in count");
  for (std::size_t j = 0; j < constraints.size(); ++j) {
    check(constraints[j], "constraint " + std::to_string(j) + (labels[j].empty() ? "" : " (" + labels[j] + ")"));
    if (!std::isfinite(rhs[j])) throw std::invalid_argument("constraint " + std::to_string(j) + ": non-finite rhs");
  }
}

namespace {

struct BlockTerm {
  Index function;  // -1 for the objective
  const QuadBlock* quad;
};

struct BarrierRun {
  Eigen::VectorXd x;
  double t = 1.0;
  int newton = 0;
  bool converged = false;
  bool stopped_early = false;
  std::vector<std::vector<double>> trace;
};

/// Barrier minimization of t f0 - sum log(rhs - f_j). `x` must be strictly
/// feasible. Stops early once f0 drops below `stop_below`.
class Barrier {
 public:
  Barrier(const ConvexQcqp& qp, const SolverSettings& settings) : qp_(qp), st_(settings) {
    const std::size_t nb = qp.block_start.size();
    terms_.resize(nb);
    for (const auto& q : qp.objective.quad) terms_[static_cast<std::size_t>(q.block)].push_back({-1, &q});
    for (Index j = 0; j < qp.num_constraints(); ++j)
      for (const auto& q : qp.constraints[static_cast<std::size_t>(j)].quad)
        terms_[static_cast<std::size_t>(q.block)].push_back({j, &q});
    std::vector<bool> in_block(static_cast<std::size_t>(qp.num_vars), false);
    for (std::size_t b = 0; b < nb; ++b)
      for (Index v = 0; v < qp.block_size[b]; ++v) in_block[static_cast<std::size_t>(qp.block_start[b] + v)] = true;
    for (Index v = 0; v < qp.num_vars; ++v)
      if (!in_block[static_cast<std::size_t>(v)]) free_vars_.push_back(v);
  }

  BarrierRun run(Eigen::VectorXd x, double stop_below) {
    BarrierRun out;
    const Index m = qp_.num_constraints();
    const double f0 = qp_.value(qp_.objective, x);
    double t = st_.initial_t;
    if (t <= 0.0) t = initial_t(x, f0);
    for (;;) {
      out.trace.push_back({phi(x, t)});
      const bool centered = center(x, t, out, stop_below);
      if (out.stopped_early) break;
      const double fx = qp_.value(qp_.objective, x);
      const double gap = static_cast<double>(m) / t;
      if (m == 0 && centered) {
        out.converged = true;
        break;
      }
      if (gap <= std::max(st_.gap_tolerance * std::abs(fx), st_.gap_floor)) {
        out.converged = centered;
        break;
      }
      if (out.newton >= st_.max_newton) break;
      t *= st_.t_multiplier;
    }
    out.x = std::move(x);
    out.t = t;
    return out;
  }

  // 1/(t s) linearized along one more Newton step; far less sensitive to the
  // last bits of centering error than 1/(t s) itself.
  Eigen::VectorXd multipliers(const Eigen::VectorXd& x, double t) {
    const Index m = qp_.num_constraints();
    const Eigen::VectorXd s = qp_.slacks(x);
    Eigen::VectorXd lambda = (t * s.array()).inverse().matrix();
    if (m == 0) return lambda;
    Eigen::MatrixXd grads(qp_.num_vars, m);
    for (Index j = 0; j < m; ++j) grads.col(j) = qp_.gradient(qp_.constraints[static_cast<std::size_t>(j)], x);
    const Eigen::VectorXd inv_s = s.cwiseInverse();
    const Eigen::VectorXd g = t * qp_.gradient(qp_.objective, x) + grads * inv_s;
    Eigen::VectorXd dx;
    if (!newton_direction(t, inv_s, s, grads, g, dx)) return lambda;
    const Eigen::VectorXd corrected =
        (lambda.array() * (1.0 + (grads.transpose() * dx).array() * inv_s.array())).matrix();
    return corrected.allFinite() ? Eigen::VectorXd(corrected.cwiseMax(0.0)) : lambda;
  }

  // Least-squares fit of t grad f0 + grad barrier = 0, the usual heuristic.
  double initial_t(const Eigen::VectorXd& x, double f0) const {
    const Index m = qp_.num_constraints();
    if (m == 0) return 1.0;
    const Eigen::VectorXd s = qp_.slacks(x);
    Eigen::VectorXd gb = Eigen::VectorXd::Zero(qp_.num_vars);
    for (Index j = 0; j < m; ++j) gb += qp_.gradient(qp_.constraints[static_cast<std::size_t>(j)], x) / s(j);
    const Eigen::VectorXd g0 = qp_.gradient(qp_.objective, x);
    const double denom = g0.squaredNorm();
    const double fallback = static_cast<double>(m) / std::max(std::abs(f0), 1.0);
    if (!(denom > 0.0)) return fallback;
    const double t = -g0.dot(gb) / denom;
    if (!(std::isfinite(t) && t > 0.0)) return fallback;
    // Never assume a gap smaller than |f0| at the start: a large t from a
    // start near the boundary means a long damped phase.
    const double cap = std::abs(f0) > 0.0 ? static_cast<double>(m) / std::abs(f0) : t;
    return std::max(std::min(t, cap), 1e-3 * fallback);
  }

  double phi(const Eigen::VectorXd& x, double t) const {
    const Eigen::VectorXd s = qp_.slacks(x);
    if ((s.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
    return t * qp_.value(qp_.objective, x) - s.array().log().sum();
  }

 private:
  // Returns true when the Newton decrement fell below tolerance.
  bool center(Eigen::VectorXd& x, double t, BarrierRun& out, double stop_below) {
    const Index n = qp_.num_vars;
    const Index m = qp_.num_constraints();
    for (int steps = 0; out.newton < st_.max_newton; ++steps) {
      if (steps == kMaxCenteringSteps) return false;
      const Eigen::VectorXd s = qp_.slacks(x);
      Eigen::MatrixXd grads(n, m);
      for (Index j = 0; j < m; ++j) grads.col(j) = qp_.gradient(qp_.constraints[static_cast<std::size_t>(j)], x);
      const Eigen::VectorXd inv_s = s.cwiseInverse();
      const Eigen::VectorXd g = t * qp_.gradient(qp_.objective, x) + grads * inv_s;

      Eigen::VectorXd dx;
      if (!newton_direction(t, inv_s, s, grads, g, dx)) return false;
      const double decrement = -g.dot(dx);
      ++out.newton;
      const double f_t = t * qp_.value(qp_.objective, x);
      const double phi0 = f_t - s.array().log().sum();
      // Below this the barrier value cannot resolve further decrease.
      const double resolution = 64.0 * std::numeric_limits<double>::epsilon() *
                                (std::abs(f_t) + s.array().log().abs().sum());
      if (!(decrement >= 0.0) || decrement / 2.0 <= std::max(st_.newton_tolerance, resolution)) return true;

      double step = 1.0;
      bool accepted = false;
      Eigen::VectorXd trial;
      for (int k = 0; k < st_.max_backtracks; ++k, step *= 0.5) {
        trial = x + step * dx;
        const double p = phi(trial, t);
        if (p <= phi0 - 0.25 * step * decrement) {
          accepted = true;
          break;
        }
      }
      if (!accepted) return decrement / 2.0 <= 1e-6;
      x = std::move(trial);
      out.trace.back().push_back(phi(x, t));
      if (qp_.value(qp_.objective, x) < stop_below) {
        out.stopped_early = true;
        return true;
      }
    }
    return false;
  }

  bool newton_direction(double t, const Eigen::VectorXd& inv_s, const Eigen::VectorXd& s,
                        const Eigen::MatrixXd& grads, const Eigen::VectorXd& g, Eigen::VectorXd& dx) {
    const Index m = qp_.num_constraints();
    const std::size_t nb = qp_.block_start.size();

    std::vector<Index> dense_vars = free_vars_;
    std::vector<Eigen::MatrixXd> dense_blocks;  // Hessian blocks we could not factor
    std::vector<Index> dense_block_ids;
    std::vector<Eigen::LLT<Eigen::MatrixXd>> factors(nb);
    std::vector<bool> factored(nb, false);

    Eigen::MatrixXd schur = s.cwiseAbs2().asDiagonal();
    Eigen::VectorXd ry = Eigen::VectorXd::Zero(m);
    std::vector<Eigen::MatrixXd> dinv_g(nb);
    std::vector<Eigen::VectorXd> dinv_r(nb);

    for (std::size_t b = 0; b < nb; ++b) {
      const Index start = qp_.block_start[b];
      const Index size = qp_.block_size[b];
      Eigen::MatrixXd d = Eigen::MatrixXd::Zero(size, size);
      for (const auto& term : terms_[b])
        add_quad_scaled(*term.quad, term.function < 0 ? t : inv_s(term.function), d);
      bool ok = false;
      if (!terms_[b].empty()) {
        factors[b].compute(d);
        ok = factors[b].info() == Eigen::Success;
        if (!ok) {
          d.diagonal().array() += st_.psd_ridge * (1.0 + d.diagonal().cwiseAbs().maxCoeff());
          factors[b].compute(d);
          ok = factors[b].info() == Eigen::Success;
        }
      }
      if (!ok) {
        dense_block_ids.push_back(static_cast<Index>(b));
        dense_blocks.push_back(std::move(d));
        continue;
      }
      factored[b] = true;
      const auto gb = grads.middleRows(start, size);
      dinv_g[b] = factors[b].solve(gb);
      dinv_r[b] = factors[b].solve(g.segment(start, size));
      schur.noalias() += gb.transpose() * dinv_g[b];
      ry.noalias() += gb.transpose() * dinv_r[b];
    }

    // Variables kept in the small indefinite system.
    std::vector<Index> kept = dense_vars;
    for (std::size_t k = 0; k < dense_block_ids.size(); ++k) {
      const auto b = static_cast<std::size_t>(dense_block_ids[k]);
      for (Index v = 0; v < qp_.block_size[b]; ++v) kept.push_back(qp_.block_start[b] + v);
    }
    const Index nv = static_cast<Index>(kept.size());
    Eigen::MatrixXd k_mat = Eigen::MatrixXd::Zero(nv + m, nv + m);
    Eigen::VectorXd k_rhs(nv + m);
    Index offset = static_cast<Index>(dense_vars.size());
    for (std::size_t k = 0; k < dense_blocks.size(); ++k) {
      const Index size = dense_blocks[k].rows();
      k_mat.block(offset, offset, size, size) = dense_blocks[k];
      offset += size;
    }
    for (Index r = 0; r < nv; ++r) {
      const Index v = kept[static_cast<std::size_t>(r)];
      k_mat.block(r, nv, 1, m) = grads.row(v);
      k_mat.block(nv, r, m, 1) = grads.row(v).transpose();
      k_rhs(r) = -g(v);
    }
    k_mat.bottomRightCorner(m, m) = -schur;
    k_rhs.tail(m) = ry;

    Eigen::VectorXd sol;
    if (nv + m > 0) {
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(k_mat);
      sol = lu.solve(k_rhs);
      if (!sol.allFinite()) return false;
    }
    const Eigen::VectorXd y = sol.tail(m);
    dx.resize(qp_.num_vars);
    for (Index r = 0; r < nv; ++r) dx(kept[static_cast<std::size_t>(r)]) = sol(r);
    for (std::size_t b = 0; b < nb; ++b) {
      if (!factored[b]) continue;
      dx.segment(qp_.block_start[b], qp_.block_size[b]) = -dinv_r[b] - dinv_g[b] * y;
    }
    return dx.allFinite();
  }

  static constexpr int kMaxCenteringSteps = 60;

  const ConvexQcqp& qp_;
  const SolverSettings& st_;
  std::vector<std::vector<BlockTerm>> terms_;
  std::vector<Index> free_vars_;
};

double constraint_scale(double b) { return 1.0 + std::abs(b); }

// Least-squares multipliers on the near-active constraints, kept when they are
// nonnegative and reduce the stationarity residual. At large t the slacks are
// so small that 1/(t s) carries their rounding error.
Eigen::VectorXd refine_multipliers(const ConvexQcqp& qp, const Eigen::VectorXd& x, Eigen::VectorXd lambda) {
  const Index m = qp.num_constraints();
  if (m == 0) return lambda;
  const Eigen::VectorXd s = qp.slacks(x);
  std::vector<Index> active;
  for (Index j = 0; j < m; ++j)
    if (s(j) <= 1e-6 * constraint_scale(qp.rhs[static_cast<std::size_t>(j)])) active.push_back(j);
  if (active.empty() || static_cast<Index>(active.size()) > qp.num_vars) return lambda;
  Eigen::VectorXd rhs = -qp.gradient(qp.objective, x);
  Eigen::MatrixXd ga(qp.num_vars, static_cast<Index>(active.size()));
  std::vector<bool> is_active(static_cast<std::size_t>(m), false);
  for (std::size_t a = 0; a < active.size(); ++a) {
    ga.col(static_cast<Index>(a)) = qp.gradient(qp.constraints[static_cast<std::size_t>(active[a])], x);
    is_active[static_cast<std::size_t>(active[a])] = true;
  }
  Eigen::VectorXd before = -rhs;
  for (Index j = 0; j < m; ++j) {
    const Eigen::VectorXd gj = qp.gradient(qp.constraints[static_cast<std::size_t>(j)], x);
    before += lambda(j) * gj;
    if (!is_active[static_cast<std::size_t>(j)]) rhs -= lambda(j) * gj;
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(ga);
  if (qr.rank() < ga.cols()) return lambda;
  const Eigen::VectorXd la = qr.solve(rhs);
  if ((la.array() < 0.0).any()) return lambda;
  if ((ga * la - rhs).norm() >= before.norm()) return lambda;
  for (std::size_t a = 0; a < active.size(); ++a) lambda(active[a]) = la(static_cast<Index>(a));
  return lambda;
}

QcqpSolution finish(const ConvexQcqp& qp, Barrier& barrier, BarrierRun&& run, bool phase_one, bool relaxed) {
  QcqpSolution sol;
  sol.x = std::move(run.x);
  sol.objective = qp.value(qp.objective, sol.x);
  sol.multipliers = refine_multipliers(qp, sol.x, barrier.multipliers(sol.x, run.t));
  sol.gap = static_cast<double>(qp.num_constraints()) / run.t;
  sol.newton_steps = run.newton;
  sol.status = run.converged ? SolveStatus::kOptimal : SolveStatus::kIterationLimit;
  sol.used_phase_one = phase_one;
  sol.relaxed = relaxed;
  sol.centering_trace = std::move(run.trace);
  return sol;
}

}  // namespace

QcqpSolution solve_qcqp(const ConvexQcqp& qp, const SolverSettings& settings, const Eigen::VectorXd& x0) {
  settings.validate();
  qp.validate(std::max(settings.psd_ridge, 1e-9));
  if (x0.size() != qp.num_vars || !x0.allFinite()) {
    QcqpSolution bad;
    bad.status = SolveStatus::kInvalidStart;
    bad.x = x0;
    return bad;
  }
  const Index m = qp.num_constraints();
  const Eigen::VectorXd s0 = qp.slacks(x0);
  double margin = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < m; ++j) margin = std::min(margin, s0(j) / constraint_scale(qp.rhs[static_cast<std::size_t>(j)]));
  // Starts hugging the boundary cost many damped Newton steps; recentre them.
  if (m == 0 || margin >= settings.interior_margin) {
    Barrier barrier(qp, settings);
    return finish(qp, barrier, barrier.run(x0, -std::numeric_limits<double>::infinity()), false, false);
  }

  // Phase one: minimize sigma subject to f_j(x) - w_j sigma <= b_j, sigma >= -1.
  const Index n = qp.num_vars;
  ConvexQcqp p1(n + 1);
  p1.block_start = qp.block_start;
  p1.block_size = qp.block_size;
  p1.objective.linear(n) = 1.0;
  double sigma0 = -std::numeric_limits<double>::infinity();
  for (Index j = 0; j < m; ++j) {
    const auto& f = qp.constraints[static_cast<std::size_t>(j)];
    const double b = qp.rhs[static_cast<std::size_t>(j)];
    ConvexFunction g;
    g.quad = f.quad;
    g.constant = f.constant;
    g.linear.resize(n + 1);
    g.linear.head(n) = f.linear;
    g.linear(n) = -constraint_scale(b);
    sigma0 = std::max(sigma0, -s0(j) / constraint_scale(b));
    p1.add_constraint(std::move(g), b);
  }
  ConvexFunction floor;
  floor.linear = Eigen::VectorXd::Zero(n + 1);
  floor.linear(n) = -1.0;
  p1.add_constraint(std::move(floor), 1.0, "sigma floor");

  Eigen::VectorXd z(n + 1);
  z.head(n) = x0;
  z(n) = sigma0 + 1.0;
  SolverSettings p1_settings = settings;
  p1_settings.initial_t = 0.0;
  p1_settings.gap_floor = 0.1 * settings.feasibility_tolerance;
  Barrier phase_one(p1, p1_settings);
  BarrierRun r1 = phase_one.run(z, -1e-4);
  const double sigma = r1.x(n);
  const int p1_newton = r1.newton;
  const Eigen::VectorXd x1 = r1.x.head(n);

  if (sigma > settings.feasibility_tolerance) {
    QcqpSolution sol;
    sol.status = SolveStatus::kInfeasible;
    sol.x = x1;
    sol.objective = qp.value(qp.objective, x1);
    sol.newton_steps = p1_newton;
    sol.used_phase_one = true;
    return sol;
  }

  SolverSettings p2_settings = settings;
  p2_settings.max_newton = std::max(1, settings.max_newton - p1_newton);
  if (qp.slacks(x1).minCoeff() > 0.0 && sigma < -settings.feasibility_tolerance) {
    Barrier barrier(qp, p2_settings);
    QcqpSolution sol = finish(qp, barrier, barrier.run(x1, -std::numeric_limits<double>::infinity()), true, false);
    sol.newton_steps += p1_newton;
    return sol;
  }

  // No usable interior: relax every row by the feasibility tolerance.
  ConvexQcqp relaxed = qp;
  for (Index j = 0; j < m; ++j)
    relaxed.rhs[static_cast<std::size_t>(j)] +=
        constraint_scale(qp.rhs[static_cast<std::size_t>(j)]) * (std::max(sigma, 0.0) + settings.feasibility_tolerance);
  Barrier barrier(relaxed, p2_settings);
  BarrierRun r2 = barrier.run(x1, -std::numeric_limits<double>::infinity());
  QcqpSolution sol = finish(relaxed, barrier, std::move(r2), true, true);
  sol.newton_steps += p1_newton;
  return sol;
}

double KktReport::max() const { return std::max({stationarity, primal, dual, complementarity}); }

KktReport verify_kkt(const ConvexQcqp& qp, const Eigen::VectorXd& x, const Eigen::VectorXd& multipliers) {
  KktReport rep;
  const Index m = qp.num_constraints();
  const Eigen::VectorXd g0 = qp.gradient(qp.objective, x);
  Eigen::VectorXd lagrangian = g0;
  double scale = g0.cwiseAbs().maxCoeff();
  double comp = 0.0;
  const Eigen::VectorXd s = qp.slacks(x);
  for (Index j = 0; j < m; ++j) {
    const Eigen::VectorXd gj = qp.gradient(qp.constraints[static_cast<std::size_t>(j)], x);
    lagrangian += multipliers(j) * gj;
    scale = std::max(scale, std::abs(multipliers(j)) * gj.cwiseAbs().maxCoeff());
    const double b = qp.rhs[static_cast<std::size_t>(j)];
    rep.primal = std::max(rep.primal, -s(j) / (1.0 + std::abs(b)));
    rep.dual = std::max(rep.dual, -multipliers(j));
    comp += std::abs(multipliers(j) * s(j));
  }
  rep.stationarity = scale > 0.0 ? lagrangian.cwiseAbs().maxCoeff() / scale : 0.0;
  rep.complementarity = comp / std::max(1.0, std::abs(qp.value(qp.objective, x)));
  return rep;
}

void write_debug_dump(const ConvexQcqp& qp, std::ostream& out) {
  out.precision(17);
  out << "qcqp " << qp.num_vars << ' ' << qp.num_constraints() << ' ' << qp.block_start.size() << '\n';
  for (std::size_t b = 0; b < qp.block_start.size(); ++b)
    out << "block " << qp.block_start[b] << ' ' << qp.block_size[b] << '\n';
  auto dump = [&](const ConvexFunction& f) {
    out << "constant " << f.constant << '\n';
    Index nnz = 0;
    for (Index v = 0; v < f.linear.size(); ++v) nnz += f.linear(v) != 0.0;
    out << "linear " << nnz << '\n';
    for (Index v = 0; v < f.linear.size(); ++v)
      if (f.linear(v) != 0.0) out << v << ' ' << f.linear(v) << '\n';
    for (const auto& q : f.quad) {
      if (q.diagonal.size() > 0) {
        out << "quad " << q.block << " diag\n" << q.diagonal.transpose() << '\n';
      } else {
        out << "quad " << q.block << " dense\n";
        for (Index r = 0; r < q.dense.rows(); ++r) out << q.dense.row(r) << '\n';
      }
    }
  };
  out << "function objective\n";
  dump(qp.objective);
  for (Index j = 0; j < qp.num_constraints(); ++j) {
    const auto sj = static_cast<std::size_t>(j);
    out << "function constraint " << j << ' ' << qp.rhs[sj] << ' ' << (qp.labels[sj].empty() ? "-" : qp.labels[sj]) << '\n';
    dump(qp.constraints[sj]);
  }
}

}  // namespace fran::convex
