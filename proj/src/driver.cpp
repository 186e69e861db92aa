#include "fran/driver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace fran {

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::kAlg1Cache: return "alg1-c";
    case Scheme::kAlg1NoCache: return "alg1-nc";
    case Scheme::kSpdc: return "spdc";
  }
  return "unknown";
}

Scheme parse_scheme(const std::string& name) {
  if (name == "alg1-c") return Scheme::kAlg1Cache;
  if (name == "alg1-nc") return Scheme::kAlg1NoCache;
  if (name == "spdc") return Scheme::kSpdc;
  throw std::invalid_argument("unknown scheme '" + name + "' (expected alg1-c, alg1-nc or spdc)");
}

std::string to_string(LoopLevel level) {
  switch (level) {
    case LoopLevel::kInit: return "init";
    case LoopLevel::kInner: return "inner";
    case LoopLevel::kMiddle: return "middle";
    case LoopLevel::kOuter: return "outer";
  }
  return "unknown";
}

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::kConverged: return "converged";
    case RunStatus::kIterationLimit: return "iteration_limit";
    case RunStatus::kInfeasible: return "infeasible";
    case RunStatus::kSolverFailure: return "solver_failure";
  }
  return "unknown";
}

std::vector<double> IterateLog::series(LoopLevel level) const {
  std::vector<double> out;
  for (const auto& r : records)
    if (r.level == level && r.accepted) out.push_back(r.objective);
  return out;
}

FeasibilityReport check_iterate(const PrecoderStack& f, const DdrAllocation& r, const Scenario& s, double tol,
                                bool all_links) {
  if (!all_links) return check_feasibility(f, r, s, tol);
  const Association ones = Association::Ones(s.num_ue(), s.num_errh());
  return check_feasibility(f, r, s, tol, &ones);
}

namespace {

using Clock = std::chrono::steady_clock;

constexpr double kAcceptTolerance = 1e-6;

double millis_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double relative_change(double now, double before) {
  return std::abs(now - before) / std::max(std::abs(before), 1e-300);
}

PrecoderStack random_stack(const Scenario& s, std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x1a2bu};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
  PrecoderStack f = PrecoderStack::zeros(s);
  for (auto& b : f.precoders)
    for (Index c = 0; c < b.cols(); ++c)
      for (Index r = 0; r < b.rows(); ++r) b(r, c) = {nd(rng), nd(rng)};
  return f;
}

double max_block_energy(const PrecoderStack& f) {
  double e = 0.0;
  for (Index p = 0; p < f.size(); ++p)
    for (Index i = 0; i < f.num_errh(); ++i) e = std::max(e, f.block_energy(p, i));
  return e;
}

// Zeroes the eRRH rows that the support pins.
void apply_support(PrecoderStack& f, const Association& support) {
  for (Index p = 0; p < f.size(); ++p)
    for (Index i = 0; i < f.num_errh(); ++i)
      if (support(p / f.subfiles, i) == 0) f.errh_block(p, i).setZero();
}

// Thresholded association restricted to the support; every UE keeps its
// strongest link.
Association shrink_support(const PrecoderStack& f, const Association& support, double threshold) {
  const Eigen::MatrixXd e = link_energy(f);
  Association out = support;
  for (Index k = 0; k < out.rows(); ++k) {
    Index best = 0;
    e.row(k).maxCoeff(&best);
    for (Index i = 0; i < out.cols(); ++i)
      if (e(k, i) <= threshold && i != best) out(k, i) = 0;
  }
  return out;
}

double min_ratio(const Eigen::VectorXd& g, const DdrAllocation& r) {
  return (g.array() / r.rates.array()).minCoeff();
}

// Feasibility of the constraints the precoder programs carry: R <= g, power,
// and the weighted fronthaul rows.
bool precoder_step_feasible(const PrecoderStack& f, const DdrAllocation& r, const ApproxCoefficients& c,
                            const Scenario& s) {
  const Eigen::VectorXd g = achievable_rates(f, s);
  if (((r.rates - g).array() > kAcceptTolerance).any()) return false;
  const Eigen::VectorXd tx = transmit_power(f);
  if (((tx - s.config.tx_power_budget).array() > kAcceptTolerance).any()) return false;
  const Eigen::MatrixXd e = link_energy(f);
  for (Index i = 0; i < s.num_errh(); ++i)
    if (c.vartheta.col(i).dot(e.col(i)) > s.config.fronthaul_capacity(i) + kAcceptTolerance) return false;
  return true;
}

// Shrinks each precoder by the smallest factor in (0, 1] that keeps its own
// rate at R. Shrinking precoder p lowers only g_p; every other rate either
// gains or is unaffected, so a sweep keeps R <= g throughout.
PrecoderStack scale_to_rates(PrecoderStack f, const DdrAllocation& r, const Scenario& s) {
  const double noise = s.channels.noise_power, bw = s.config.bandwidth;
  const Index mm = s.subfiles();
  for (int sweep = 0; sweep < 3; ++sweep) {
    for (Index p = 0; p < f.size(); ++p) {
      const Index k = p / mm, m = p % mm;
      const Eigen::MatrixXcd& h = s.channels.channels[static_cast<std::size_t>(k)];
      const auto original = f[p];
      auto fits = [&](double a) {
        f[p] = a * original;
        return achievable_rate(f, h, noise, k, m, bw) >= r.rates(p);
      };
      if (!fits(1.0)) {
        f[p] = original;
        continue;
      }
      double lo = 0.0, hi = 1.0;
      for (int it = 0; it < 50 && hi - lo > 1e-9; ++it) {
        const double mid = 0.5 * (lo + hi);
        (fits(mid) ? hi : lo) = mid;
      }
      f[p] = hi * original;
    }
  }
  return f;
}

struct MaxMinOutcome {
  PrecoderStack f;
  std::vector<double> ratios;
  bool failed = false;
};

// Repeats the max-min ratio program until its value settles.
MaxMinOutcome max_min_passes(const Scenario& s, PrecoderStack f, const DdrAllocation& r, const ReweightState& w,
                             const Association& support, const DriverOptions& opt, int max_passes) {
  const ScenarioConfig& cfg = s.config;
  MaxMinOutcome out;
  double ratio = min_ratio(achievable_rates(f, s), r);
  for (int n = 0; n < max_passes; ++n) {
    const Surrogate sur = build_surrogate(f, s);
    const ApproxCoefficients c = build_coefficients(w, r, s, f);
    const PrecoderProgram prog = build_feasibility_qcqp(sur, c, r, s, support);
    Eigen::VectorXd x0(prog.qp.num_vars);
    x0.head(prog.layout.num_vars()) = prog.layout.embed(f);
    x0(prog.epigraph) = ratio - 1e-3 * std::max(1.0, std::abs(ratio));
    const convex::QcqpSolution sol = convex::solve_qcqp(prog.qp, opt.solver, x0);
    if (sol.status == convex::SolveStatus::kInfeasible || sol.status == convex::SolveStatus::kInvalidStart) {
      out.failed = true;
      break;
    }
    PrecoderStack next = prog.layout.unembed(sol.x.head(prog.layout.num_vars()));
    const double next_ratio = min_ratio(achievable_rates(next, s), r);
    if (!(next_ratio >= ratio - 1e-9 * std::abs(ratio))) break;
    f = std::move(next);
    const double before = ratio;
    ratio = next_ratio;
    out.ratios.push_back(ratio);
    if (relative_change(ratio, before) <= cfg.epsilon4) break;
  }
  out.f = std::move(f);
  if (out.ratios.empty()) out.ratios.push_back(ratio);
  return out;
}

InitResult initialize(const Scenario& s, const DriverOptions& opt, bool spdc) {
  const ScenarioConfig& cfg = s.config;
  const Index ku = s.num_ue(), kr = s.num_errh();
  const Association ones = Association::Ones(ku, kr);
  InitResult out;

  PrecoderStack f = random_stack(s, opt.init_seed);
  const double pbar = cfg.tx_power_budget.minCoeff() / static_cast<double>(s.subfiles() * ku);
  const double scale = std::sqrt(pbar / max_block_energy(f));
  for (auto& b : f.precoders) b *= scale;

  ReweightState w = initial_weights(f, cfg);
  if (spdc) w.mu.setZero();

  DdrAllocation zero;
  zero.rates = Eigen::VectorXd::Zero(ku * s.subfiles());
  RateLpOptions lp_opt;
  const Association a_ran = association_from_precoders(f, cfg.association_threshold);
  if (spdc) lp_opt.exact_fronthaul = &ones;
  else if (opt.exact_fronthaul) lp_opt.exact_fronthaul = &a_ran;
  const RateLpResult lp =
      solve_rate_lp(build_coefficients(w, zero, s, f), achievable_rates(f, s), s, opt.solver, lp_opt);
  if (lp.status == convex::SolveStatus::kInfeasible) {
    out.message = "rate LP infeasible at the random stack";
    return out;
  }
  DdrAllocation r = lp.rates;
  // Subfiles clamped below the floor become QoS targets for the ratio program.
  r.rates = r.rates.cwiseMax(cfg.qos_rate);

  for (int halvings = 0; halvings < 60; ++halvings) {
    const ApproxCoefficients c = build_coefficients(w, r, s, f);
    const Eigen::MatrixXd e = link_energy(f);
    bool ok = true;
    for (Index i = 0; i < kr; ++i)
      if (c.vartheta.col(i).dot(e.col(i)) > cfg.fronthaul_capacity(i)) ok = false;
    if (ok) break;
    for (auto& b : f.precoders) b *= 0.5;
  }

  for (int attempt = 0; attempt < 2; ++attempt) {
    MaxMinOutcome mm = max_min_passes(s, f, r, w, ones, opt, cfg.max_inner);
    out.ratio_trace.insert(out.ratio_trace.end(), mm.ratios.begin(), mm.ratios.end());
    f = std::move(mm.f);
    const Eigen::VectorXd g = achievable_rates(f, s);
    const double ratio = min_ratio(g, r);
    if (ratio >= 1.0) {
      out.status = RunStatus::kConverged;
      break;
    }
    if (attempt == 1 || (g.array() < cfg.qos_rate).any()) {
      out.message = "max-min ratio " + std::to_string(ratio) + " < 1";
      break;
    }
    r.rates = (r.rates * ratio).cwiseMax(cfg.qos_rate).cwiseMin(g);
    out.rates_reduced = true;
  }
  out.precoders = std::move(f);
  out.rates = std::move(r);
  out.weights = update_weights(out.precoders, w);
  if (spdc) out.weights.mu.setZero();
  return out;
}

class Runner {
 public:
  Runner(const Scenario& s, const InitResult& init, const DriverOptions& opt, Scheme scheme)
      : s_(s), opt_(opt), scheme_(scheme), spdc_(scheme == Scheme::kSpdc), f_(init.precoders), r_(init.rates),
        w_(init.weights) {
    const Index ku = s.num_ue(), kr = s.num_errh();
    support_ = Association::Ones(ku, kr);
    pin_suppressed();
  }

  RunResult run();

 private:
  // Every link still allowed to carry energy. Contains the thresholded
  // association, so the exact fronthaul rows stay conservative.
  Association lp_association() const {
    if (spdc_) return Association::Ones(s_.num_ue(), s_.num_errh());
    if (opt_.pin_suppressed) return support_;
    return association_from_precoders(f_, s_.config.association_threshold);
  }
  // Pins links whose energy fell to the threshold, one at a time, as long as
  // zeroing them keeps every rate constraint satisfied.
  void pin_suppressed() {
    if (!opt_.pin_suppressed || spdc_) return;
    const Association candidate = shrink_support(f_, support_, s_.config.association_threshold);
    for (Index k = 0; k < candidate.rows(); ++k)
      for (Index i = 0; i < candidate.cols(); ++i) {
        if (candidate(k, i) != 0 || support_(k, i) == 0) continue;
        Association next = support_;
        next(k, i) = 0;
        PrecoderStack f = f_;
        apply_support(f, next);
        if (!model_feasible(f)) continue;
        support_ = std::move(next);
        f_ = std::move(f);
      }
  }
  bool model_feasible(const PrecoderStack& f) const { return check_iterate(f, r_, s_, 1e-6, spdc_).feasible(); }
  double min_slack() const { return check_iterate(f_, r_, s_, 0.0, spdc_).worst_slack(); }
  void record(LoopLevel level, double objective, double millis, bool accepted = true) {
    log_.records.push_back({level, outer_, middle_, inner_, objective, min_slack(), millis, accepted});
  }
  // Returns false on solver failure.
  bool precoder_step();
  bool rate_step();
  bool headroom_step();
  PrecoderStack expansion_point() const {
    PrecoderStack f = f_;
    apply_support(f, support_);
    return f;
  }

  const Scenario& s_;
  DriverOptions opt_;
  Scheme scheme_;
  bool spdc_;
  PrecoderStack f_;
  DdrAllocation r_;
  ReweightState w_;
  Association support_;
  IterateLog log_;
  int outer_ = 0, middle_ = 0, inner_ = 0;
  std::string failure_;
};

bool Runner::precoder_step() {
  const ScenarioConfig& cfg = s_.config;
  const ApproxCoefficients c = build_coefficients(w_, r_, s_, f_);
  double p3 = objective_p3(c, f_, s_);
  inner_ = 0;
  record(LoopLevel::kInner, p3, 0.0);
  for (int n = 1; n <= cfg.max_inner; ++n) {
    inner_ = n;
    const auto t0 = Clock::now();
    const PrecoderStack start = expansion_point();
    const Surrogate sur = build_surrogate(start, s_);
    const PrecoderProgram prog = build_precoder_qcqp(sur, c, r_, s_, support_);
    const convex::QcqpSolution sol = convex::solve_qcqp(prog.qp, opt_.solver, prog.layout.embed(start));
    ++log_.inner_iterations;
    if (sol.status == convex::SolveStatus::kInfeasible || sol.status == convex::SolveStatus::kInvalidStart) {
      failure_ = "precoder program: " + convex::to_string(sol.status);
      record(LoopLevel::kInner, p3, millis_since(t0), false);
      ++log_.rejected_steps;
      return false;
    }
    PrecoderStack next = prog.layout.unembed(sol.x);
    if (opt_.scale_step) next = scale_to_rates(next, r_, s_);
    const double next_p3 = objective_p3(c, next, s_);
    const bool decreased = next_p3 <= p3 + 1e-12 * std::abs(p3);
    if (!decreased || !precoder_step_feasible(next, r_, c, s_) || !model_feasible(next)) {
      record(LoopLevel::kInner, next_p3, millis_since(t0), false);
      ++log_.rejected_steps;
      break;
    }
    f_ = std::move(next);
    pin_suppressed();
    const double before = p3;
    p3 = next_p3;
    record(LoopLevel::kInner, p3, millis_since(t0));
    if (relative_change(p3, before) <= cfg.epsilon3) break;
  }
  return true;
}

bool Runner::rate_step() {
  const ApproxCoefficients c = build_coefficients(w_, r_, s_, f_);
  const Association a = lp_association();
  RateLpOptions lp_opt;
  if (spdc_ || opt_.exact_fronthaul) lp_opt.exact_fronthaul = &a;
  const RateLpResult lp = solve_rate_lp(c, achievable_rates(f_, s_), s_, opt_.solver, lp_opt);
  if (lp.status == convex::SolveStatus::kInfeasible || lp.status == convex::SolveStatus::kInvalidStart) {
    failure_ = "rate LP: " + convex::to_string(lp.status);
    ++log_.rejected_steps;
    return false;
  }
  const double before = objective_p2(w_, f_, r_, s_);
  const double after = objective_p2(w_, f_, lp.rates, s_);
  if (after >= before - 1e-12 * std::abs(before)) r_ = lp.rates;
  else ++log_.rejected_steps;
  return true;
}

bool Runner::headroom_step() {
  const auto t0 = Clock::now();
  MaxMinOutcome mm = max_min_passes(s_, expansion_point(), r_, w_, support_, opt_, opt_.headroom_passes);
  log_.inner_iterations += static_cast<int>(mm.ratios.size());
  if (mm.failed) return true;
  const ApproxCoefficients c = build_coefficients(w_, r_, s_, mm.f);
  if (!precoder_step_feasible(mm.f, r_, c, s_) || !model_feasible(mm.f)) return true;
  f_ = std::move(mm.f);
  pin_suppressed();
  record(LoopLevel::kInit, mm.ratios.back(), millis_since(t0));
  return true;
}

RunResult Runner::run() {
  const ScenarioConfig& cfg = s_.config;
  RunResult out;
  out.scheme = scheme_;
  out.status = RunStatus::kIterationLimit;
  auto p1 = [&] {
    const Association a = spdc_ ? Association::Ones(s_.num_ue(), s_.num_errh())
                                : association_from_precoders(f_, cfg.association_threshold);
    return objective_p1(f_, a, r_, s_);
  };
  double p1_value = p1();
  record(LoopLevel::kOuter, p1_value, 0.0);

  bool failed = false;
  for (outer_ = 1; outer_ <= cfg.max_outer && !failed; ++outer_) {
    ++log_.outer_iterations;
    const auto t_outer = Clock::now();
    if (opt_.rate_headroom && outer_ > 1) headroom_step();
    middle_ = 0;
    inner_ = 0;
    double p2 = objective_p2(w_, f_, r_, s_);
    record(LoopLevel::kMiddle, p2, 0.0);
    for (middle_ = 1; middle_ <= cfg.max_middle; ++middle_) {
      ++log_.middle_iterations;
      const auto t_mid = Clock::now();
      bool ok = true;
      if (opt_.order == MiddleOrder::kRateFirst) ok = rate_step() && precoder_step();
      else ok = precoder_step() && rate_step();
      const double before = p2;
      p2 = objective_p2(w_, f_, r_, s_);
      inner_ = 0;
      record(LoopLevel::kMiddle, p2, millis_since(t_mid));
      if (!ok) {
        failed = true;
        break;
      }
      if (relative_change(p2, before) <= cfg.epsilon2) break;
    }
    if (failed) break;
    w_ = update_weights(f_, w_);
    if (spdc_) w_.mu.setZero();
    const double before = p1_value;
    p1_value = p1();
    middle_ = 0;
    record(LoopLevel::kOuter, p1_value, millis_since(t_outer));
    if (relative_change(p1_value, before) <= cfg.epsilon1) {
      out.status = RunStatus::kConverged;
      break;
    }
  }
  if (failed) {
    out.status = RunStatus::kSolverFailure;
    out.message = failure_;
  }

  out.precoders = f_;
  out.rates = r_;
  out.association = spdc_ ? Association::Ones(s_.num_ue(), s_.num_errh())
                          : association_from_precoders(f_, cfg.association_threshold);
  const PowerBreakdown power = total_power(f_, out.association, r_, s_);
  out.sum_rate = sum_rate(r_);
  out.total_power = power.total;
  out.busy_power = power.busy;
  out.objective = out.sum_rate - cfg.eta * power.total;
  out.fronthaul_rates = power.fronthaul_rate;
  out.log = std::move(log_);
  return out;
}

RunResult failed_run(Scheme scheme, const InitResult& init) {
  RunResult out;
  out.scheme = scheme;
  out.status = RunStatus::kInfeasible;
  out.message = init.message;
  return out;
}

}  // namespace

InitResult algorithm2_init(const Scenario& s, const DriverOptions& opt) { return initialize(s, opt, false); }

InitResult algorithm2_init_spdc(const Scenario& s, const DriverOptions& opt) { return initialize(s, opt, true); }

RunResult algorithm1(const Scenario& s, const InitResult& init, const DriverOptions& opt) {
  if (init.status == RunStatus::kInfeasible) return failed_run(Scheme::kAlg1Cache, init);
  return Runner(s, init, opt, Scheme::kAlg1Cache).run();
}

RunResult baseline_spdc(const Scenario& s, const InitResult& init, const DriverOptions& opt) {
  if (init.status == RunStatus::kInfeasible) return failed_run(Scheme::kSpdc, init);
  return Runner(s, init, opt, Scheme::kSpdc).run();
}

RunResult baseline_nocache(const Scenario& s, const DriverOptions& opt) {
  const Scenario bare = without_cache(s);
  const InitResult init = algorithm2_init(bare, opt);
  if (init.status == RunStatus::kInfeasible) return failed_run(Scheme::kAlg1NoCache, init);
  return Runner(bare, init, opt, Scheme::kAlg1NoCache).run();
}

RunResult run_scheme(Scheme scheme, const Scenario& s, const DriverOptions& opt) {
  switch (scheme) {
    case Scheme::kAlg1Cache: return algorithm1(s, algorithm2_init(s, opt), opt);
    case Scheme::kSpdc: return baseline_spdc(s, algorithm2_init_spdc(s, opt), opt);
    case Scheme::kAlg1NoCache: return baseline_nocache(s, opt);
  }
  throw std::invalid_argument("run_scheme: unknown scheme");
}

}  // namespace fran
