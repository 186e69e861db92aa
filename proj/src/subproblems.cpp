#include "fran/subproblems.hpp"

#include "fran/convex/embed.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fran {

namespace {

double uncached(const Scenario& s, Index p, Index i) { return s.cache.cached(p, i) != 0 ? 0.0 : 1.0; }

Eigen::MatrixXcd hermitian_part(const Eigen::MatrixXcd& m) { return 0.5 * (m + m.adjoint()); }

}  // namespace

double reweight_c1(double tau1) { return 1.0 / std::log1p(1.0 / tau1); }

double reweight_c2(const ScenarioConfig& cfg) {
  if (cfg.c2_rule == C2Rule::kLiteral) return 1.0 / std::log1p(1.0 / (cfg.tau1 * cfg.tau1));
  return 1.0 / std::log1p(1.0 / cfg.tau2);
}

ReweightState initial_weights(const PrecoderStack& f, const ScenarioConfig& cfg) {
  ReweightState w;
  w.tau1 = cfg.tau1;
  w.tau2 = cfg.tau2;
  w.c1 = reweight_c1(cfg.tau1);
  w.c2 = reweight_c2(cfg);
  return update_weights(f, w);
}

ReweightState update_weights(const PrecoderStack& f, const ReweightState& state) {
  ReweightState w = state;
  const Eigen::MatrixXd e = link_energy(f);
  w.mu = (w.c1 / (e.array() + w.tau1)).matrix();
  w.theta = (w.c2 / (transmit_power(f).array() + w.tau2)).matrix();
  return w;
}

ApproxCoefficients build_coefficients(const ReweightState& w, const DdrAllocation& r, const Scenario& s,
                                      const PrecoderStack& f) {
  const ScenarioConfig& cfg = s.config;
  const Index kr = s.num_errh(), ku = s.num_ue(), mm = s.subfiles();
  const Eigen::MatrixXd e = link_energy(f);
  ApproxCoefficients c;
  c.upsilon = cfg.amplifier_slope + w.theta.cwiseProduct(cfg.active_power - cfg.sleep_power);
  c.vartheta = Eigen::MatrixXd::Zero(ku, kr);
  c.q = Eigen::MatrixXd::Zero(ku * mm, kr);
  c.fronthaul = Eigen::MatrixXd::Zero(ku * mm, kr);
  for (Index k = 0; k < ku; ++k)
    for (Index i = 0; i < kr; ++i)
      for (Index m = 0; m < mm; ++m) {
        const Index p = k * mm + m;
        const double miss = uncached(s, p, i);
        c.vartheta(k, i) += w.mu(k, i) * miss * r.rates(p);
        c.fronthaul(p, i) = w.mu(k, i) * e(k, i) * miss;
        c.q(p, i) = cfg.fronthaul_slope(i) * c.fronthaul(p, i);
      }
  c.tau = c.vartheta * cfg.fronthaul_slope.asDiagonal();
  c.tau.rowwise() += c.upsilon.transpose();
  c.b = cfg.sleep_power.sum() + c.upsilon.dot(transmit_power(f));
  return c;
}

double approx_total_power(const ApproxCoefficients& c, const PrecoderStack& f, const Scenario& s) {
  return c.tau.cwiseProduct(link_energy(f)).sum() + s.config.sleep_power.sum();
}

double approx_total_power(const ApproxCoefficients& c, const DdrAllocation& r) {
  return c.b + (r.rates.transpose() * c.q).sum();
}

double objective_p2(const ReweightState& w, const PrecoderStack& f, const DdrAllocation& r, const Scenario& s) {
  const ApproxCoefficients c = build_coefficients(w, r, s, f);
  return sum_rate(r) - s.config.eta * approx_total_power(c, r);
}

double objective_p3(const ApproxCoefficients& c, const PrecoderStack& f, const Scenario& s) {
  return s.config.eta * c.tau.cwiseProduct(link_energy(f)).sum();
}

RateLpResult solve_rate_lp(const ApproxCoefficients& c, const Eigen::VectorXd& g, const Scenario& s,
                           const convex::SolverSettings& settings, const RateLpOptions& options) {
  const ScenarioConfig& cfg = s.config;
  const Index n = c.q.rows();
  const Index kr = s.num_errh(), mm = s.subfiles();
  if (g.size() != n) throw std::invalid_argument("solve_rate_lp: achievable-rate vector has wrong size");

  RateLpResult out;
  convex::LinearProgram lp(n);
  for (Index p = 0; p < n; ++p) {
    lp.c(p) = -(1.0 - cfg.eta * c.q.row(p).sum());
    const double cap = std::max(0.0, g(p));
    if (cap < cfg.qos_rate) out.clamped.push_back(p);
    lp.lower(p) = std::min(cfg.qos_rate, cap);
    lp.upper(p) = std::min(cfg.subfile_rate_cap, cap);
  }
  for (Index i = 0; i < kr; ++i) {
    if (options.approximate_fronthaul && c.fronthaul.col(i).maxCoeff() > 0.0)
      lp.add_row(c.fronthaul.col(i), cfg.fronthaul_capacity(i));
    if (options.exact_fronthaul != nullptr) {
      Eigen::VectorXd row(n);
      for (Index p = 0; p < n; ++p) row(p) = (*options.exact_fronthaul)(p / mm, i) * uncached(s, p, i);
      if (row.maxCoeff() > 0.0) lp.add_row(row, cfg.fronthaul_capacity(i));
    }
  }
  const convex::LpSolution sol = convex::solve_lp(lp, settings);
  out.status = sol.status;
  if (sol.status == convex::SolveStatus::kInfeasible) return out;
  // Interior-point solutions sit a hair inside the box; snap to it.
  out.rates.rates = sol.x.cwiseMax(lp.lower).cwiseMin(lp.upper);
  out.objective = sum_rate(out.rates) - cfg.eta * approx_total_power(c, out.rates);
  return out;
}

std::vector<Index> interfering_set(Index p, Index num_ue, Index subfiles) {
  const Index k = p / subfiles;
  std::vector<Index> out;
  for (Index q = 0; q < num_ue * subfiles; ++q)
    if (q / subfiles != k || q >= p) out.push_back(q);
  return out;
}

Surrogate build_surrogate(const PrecoderStack& f, const Scenario& s) {
  const Index ku = s.num_ue(), mm = s.subfiles(), n = ku * mm;
  const double noise = s.channels.noise_power;
  Surrogate sur;
  sur.expansion = f;
  sur.scale = s.config.bandwidth / std::numbers::ln2;
  sur.rate = achievable_rates(f, s);
  sur.constant.resize(n);
  for (Index p = 0; p < n; ++p) {
    const Index k = p / mm, m = p % mm;
    const Eigen::MatrixXcd& h = s.channels.channels[static_cast<std::size_t>(k)];
    Eigen::MatrixXcd xi = interference_covariance(f, h, noise, k, m);
    const Eigen::MatrixXcd pi = h * f[p];
    Eigen::LLT<Eigen::MatrixXcd> llt(xi);
    if (llt.info() != Eigen::Success) {
      xi.diagonal().array() += 1e-10 * noise;
      llt.compute(xi);
      sur.regularized = true;
    }
    const Eigen::MatrixXcd lin = llt.solve(pi);
    Eigen::MatrixXcd inner = Eigen::MatrixXcd::Identity(pi.cols(), pi.cols()) + pi.adjoint() * lin;
    inner = hermitian_part(inner);
    const Eigen::MatrixXcd penalty = hermitian_part(lin * inner.llt().solve(lin.adjoint()));
    const double c = (pi.adjoint() * lin).trace().real();
    sur.constant(p) = sur.rate(p) / sur.scale - c - noise * penalty.trace().real();
    sur.pi.push_back(pi);
    sur.phi.push_back(hermitian_part(xi + pi * pi.adjoint()));
    sur.xi.push_back(std::move(xi));
    sur.linear.push_back(lin);
    sur.penalty_tx.push_back(hermitian_part(h.adjoint() * penalty * h));
    sur.penalty.push_back(penalty);
  }
  return sur;
}

double Surrogate::value(Index p, const PrecoderStack& f, const Scenario& s) const {
  const Index mm = s.subfiles();
  const Eigen::MatrixXcd& h = s.channels.channels[static_cast<std::size_t>(p / mm)];
  const auto& lin = linear[static_cast<std::size_t>(p)];
  const auto& b = penalty_tx[static_cast<std::size_t>(p)];
  // Expanded around the expansion point: the constant and the quadratic terms
  // nearly cancel there, so the direct form loses digits at high SNR.
  const Eigen::MatrixXcd dp = f[p] - expansion[p];
  double v = 2.0 * (lin.adjoint() * h * dp).trace().real();
  for (Index q : interfering_set(p, s.num_ue(), mm)) {
    const Eigen::MatrixXcd dq = f[q] - expansion[q];
    v -= 2.0 * (expansion[q].adjoint() * b * dq).trace().real() + (dq.adjoint() * b * dq).trace().real();
  }
  return rate(p) + scale * v;
}

PrecoderLayout::PrecoderLayout(const Scenario& s, const Association& support)
    : num_ue_(s.num_ue()), subfiles_(s.subfiles()), streams_(s.streams()), errh_antennas_(s.errh_antennas()),
      num_errh_(s.num_errh()), support_(support) {
  if (support.rows() != num_ue_ || support.cols() != num_errh_)
    throw std::invalid_argument("PrecoderLayout: support matrix has wrong shape");
  rows_.resize(static_cast<std::size_t>(num_ue_));
  for (Index k = 0; k < num_ue_; ++k) {
    for (Index i = 0; i < num_errh_; ++i)
      if (support(k, i) != 0)
        for (Index a = 0; a < errh_antennas_; ++a) rows_[static_cast<std::size_t>(k)].push_back(i * errh_antennas_ + a);
    if (rows_[static_cast<std::size_t>(k)].empty())
      throw std::invalid_argument("PrecoderLayout: UE " + std::to_string(k) + " has no supporting eRRH");
  }
  for (Index p = 0; p < num_ue_ * subfiles_; ++p)
    for (Index col = 0; col < streams_; ++col) {
      starts_.push_back(num_vars_);
      num_vars_ += block_size(p);
    }
}

Eigen::VectorXd PrecoderLayout::embed(const PrecoderStack& f) const {
  Eigen::VectorXd x(num_vars_);
  for (Index p = 0; p < num_ue_ * subfiles_; ++p) {
    const auto& rows = rows_[static_cast<std::size_t>(p / subfiles_)];
    const Index n = static_cast<Index>(rows.size());
    for (Index col = 0; col < streams_; ++col) {
      const Index at = block_start(p, col);
      for (Index r = 0; r < n; ++r) {
        const auto v = f[p](rows[static_cast<std::size_t>(r)], col);
        x(at + r) = v.real();
        x(at + n + r) = v.imag();
      }
    }
  }
  return x;
}

PrecoderStack PrecoderLayout::unembed(const Eigen::VectorXd& x) const {
  PrecoderStack f(num_ue_, subfiles_, num_errh_, errh_antennas_, streams_);
  for (Index p = 0; p < num_ue_ * subfiles_; ++p) {
    const auto& rows = rows_[static_cast<std::size_t>(p / subfiles_)];
    const Index n = static_cast<Index>(rows.size());
    for (Index col = 0; col < streams_; ++col) {
      const Index at = block_start(p, col);
      for (Index r = 0; r < n; ++r) f[p](rows[static_cast<std::size_t>(r)], col) = {x(at + r), x(at + n + r)};
    }
  }
  return f;
}

Eigen::MatrixXd PrecoderLayout::embed_form(Index ue, const Eigen::MatrixXcd& b) const {
  const auto& rows = rows_[static_cast<std::size_t>(ue)];
  return convex::embed_hermitian(hermitian_part(b(rows, rows)));
}

Eigen::VectorXd PrecoderLayout::energy_diagonal(Index ue, const Eigen::VectorXd& weights) const {
  const auto& rows = rows_[static_cast<std::size_t>(ue)];
  const Index n = static_cast<Index>(rows.size());
  Eigen::VectorXd d(2 * n);
  for (Index r = 0; r < n; ++r) d(r) = d(n + r) = 2.0 * weights(rows[static_cast<std::size_t>(r)] / errh_antennas_);
  return d;
}

void PrecoderLayout::add_blocks(convex::ConvexQcqp& qp) const {
  for (Index p = 0; p < num_ue_ * subfiles_; ++p)
    for (Index col = 0; col < streams_; ++col) qp.add_block(block_start(p, col), block_size(p));
}

namespace {

// Weighted per-eRRH energy sum_k w(k, i) e_ki as a function on the layout.
convex::ConvexFunction energy_function(const PrecoderLayout& layout, const Scenario& s, const Eigen::MatrixXd& w,
                                       Index num_vars) {
  convex::ConvexFunction fn;
  fn.linear = Eigen::VectorXd::Zero(num_vars);
  for (Index p = 0; p < s.num_ue() * s.subfiles(); ++p) {
    const Eigen::VectorXd d = layout.energy_diagonal(p / s.subfiles(), w.row(p / s.subfiles()).transpose());
    if (d.maxCoeff() <= 0.0) continue;
    for (Index col = 0; col < s.streams(); ++col) fn.quad.push_back({layout.block(p, col), {}, d});
  }
  return fn;
}

// Per-eRRH constraints shared by the precoder and feasibility programs.
void add_errh_constraints(convex::ConvexQcqp& qp, const PrecoderLayout& layout, const ApproxCoefficients& c,
                          const Scenario& s) {
  const Index kr = s.num_errh(), ku = s.num_ue();
  for (Index i = 0; i < kr; ++i) {
    if (c.vartheta.col(i).maxCoeff() <= 0.0) continue;
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(ku, kr);
    w.col(i) = c.vartheta.col(i);
    qp.add_constraint(energy_function(layout, s, w, qp.num_vars), s.config.fronthaul_capacity(i),
                      "fronthaul " + std::to_string(i));
  }
  for (Index i = 0; i < kr; ++i) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(ku, kr);
    w.col(i).setOnes();
    convex::ConvexFunction fn = energy_function(layout, s, w, qp.num_vars);
    if (fn.quad.empty()) continue;
    qp.add_constraint(std::move(fn), s.config.tx_power_budget(i), "power " + std::to_string(i));
  }
}

// sum_q tr(F_qᴴ B F_q) - 2 Re tr(Lᴴ H F_p), in nats; Gamma_p = scale * (constant - this).
convex::ConvexFunction rate_function(const Surrogate& sur, const PrecoderLayout& layout, const Scenario& s, Index p,
                                     Index num_vars) {
  const Index mm = s.subfiles();
  const Eigen::MatrixXcd& h = s.channels.channels[static_cast<std::size_t>(p / mm)];
  const auto& b = sur.penalty_tx[static_cast<std::size_t>(p)];
  convex::ConvexFunction fn;
  fn.linear = Eigen::VectorXd::Zero(num_vars);
  for (Index q : interfering_set(p, s.num_ue(), mm)) {
    const Eigen::MatrixXd form = layout.embed_form(q / mm, b);
    for (Index col = 0; col < s.streams(); ++col) fn.quad.push_back({layout.block(q, col), form, {}});
  }
  const Eigen::MatrixXcd grad = h.adjoint() * sur.linear[static_cast<std::size_t>(p)];
  const auto& rows = layout.rows(p / mm);
  for (Index col = 0; col < s.streams(); ++col) {
    const Eigen::VectorXcd g = grad.col(col)(rows);
    fn.linear.segment(layout.block_start(p, col), layout.block_size(p)) = -2.0 * convex::embed_linear(g);
  }
  return fn;
}

}  // namespace

PrecoderProgram build_precoder_qcqp(const Surrogate& sur, const ApproxCoefficients& c, const DdrAllocation& r,
                                    const Scenario& s, const Association& support) {
  PrecoderProgram prog;
  prog.layout = PrecoderLayout(s, support);
  const Index n = prog.layout.num_vars();
  prog.qp = convex::ConvexQcqp(n);
  prog.layout.add_blocks(prog.qp);
  prog.qp.objective = energy_function(prog.layout, s, s.config.eta * c.tau, n);
  add_errh_constraints(prog.qp, prog.layout, c, s);
  for (Index p = 0; p < r.rates.size(); ++p)
    prog.qp.add_constraint(rate_function(sur, prog.layout, s, p, n), sur.constant(p) - r.rates(p) / sur.scale,
                           "rate " + std::to_string(p));
  return prog;
}

PrecoderProgram build_feasibility_qcqp(const Surrogate& sur, const ApproxCoefficients& c, const DdrAllocation& r,
                                       const Scenario& s, const Association& support) {
  PrecoderProgram prog;
  prog.layout = PrecoderLayout(s, support);
  const Index n = prog.layout.num_vars() + 1;
  prog.epigraph = n - 1;
  prog.qp = convex::ConvexQcqp(n);
  prog.layout.add_blocks(prog.qp);
  prog.qp.objective.linear = Eigen::VectorXd::Zero(n);
  prog.qp.objective.linear(prog.epigraph) = -1.0;
  add_errh_constraints(prog.qp, prog.layout, c, s);
  for (Index p = 0; p < r.rates.size(); ++p) {
    convex::ConvexFunction fn = rate_function(sur, prog.layout, s, p, n);
    fn.linear(prog.epigraph) = r.rates(p) / sur.scale;
    prog.qp.add_constraint(std::move(fn), sur.constant(p), "ratio " + std::to_string(p));
  }
  return prog;
}

}  // namespace fran
