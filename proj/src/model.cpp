#include "fran/model.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace fran {

Eigen::MatrixXd link_energy(const PrecoderStack& f) {
  const Index kr = f.num_errh();
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(f.num_ue, kr);
  for (Index k = 0; k < f.num_ue; ++k)
    for (Index m = 0; m < f.subfiles; ++m)
      for (Index i = 0; i < kr; ++i) e(k, i) += f.block_energy(f.index(k, m), i);
  return e;
}

Eigen::VectorXd transmit_power(const PrecoderStack& f) {
  return link_energy(f).colwise().sum().transpose();
}

Association association_from_precoders(const PrecoderStack& f, double energy_threshold) {
  return (link_energy(f).array() > energy_threshold).cast<int>().matrix();
}

double fronthaul_rate(const Association& a, const DdrAllocation& r, const CacheState& cache,
                      Index errh) {
  const Index m_count = cache.subfiles_per_file;
  double load = 0.0;
  for (Index k = 0; k < a.rows(); ++k) {
    if (a(k, errh) == 0) continue;
    for (Index m = 0; m < m_count; ++m)
      if (!cache.is_cached(errh, k, m)) load += r.rates(k * m_count + m);
  }
  return load;
}

Eigen::VectorXd fronthaul_rates(const Association& a, const DdrAllocation& r,
                                const CacheState& cache) {
  Eigen::VectorXd out(a.cols());
  for (Index i = 0; i < a.cols(); ++i) out(i) = fronthaul_rate(a, r, cache, i);
  return out;
}

Eigen::MatrixXcd interference_covariance(const PrecoderStack& f, const Eigen::MatrixXcd& h,
                                         double noise_power, Index ue, Index m) {
  const Index nu = h.rows();
  Eigen::MatrixXcd xi = noise_power * Eigen::MatrixXcd::Identity(nu, nu);
  for (Index k = 0; k < f.num_ue; ++k) {
    for (Index q = 0; q < f.subfiles; ++q) {
      if (k == ue && q <= m) continue;
      const Eigen::MatrixXcd pi = h * f.at(k, q);
      xi.noalias() += pi * pi.adjoint();
    }
  }
  return xi;
}

double log_det_hpd(const Eigen::MatrixXcd& m) {
  Eigen::LLT<Eigen::MatrixXcd> llt(m);
  if (llt.info() != Eigen::Success) throw std::domain_error("log_det_hpd: matrix is not positive definite");
  return 2.0 * llt.matrixLLT().diagonal().real().array().log().sum();
}

double achievable_rate(const PrecoderStack& f, const Eigen::MatrixXcd& h, double noise_power,
                       Index ue, Index m, double bandwidth_mhz) {
  if (!h.allFinite() || !f.all_finite())
    throw std::domain_error("achievable_rate: non-finite channel or precoder entries");
  const Eigen::MatrixXcd xi = interference_covariance(f, h, noise_power, ue, m);
  const Eigen::MatrixXcd pi = h * f.at(ue, m);
  const Eigen::MatrixXcd phi = xi + pi * pi.adjoint();
  const double nats = log_det_hpd(phi) - log_det_hpd(xi);
  return std::max(0.0, bandwidth_mhz * nats / std::numbers::ln2);
}

Eigen::VectorXd achievable_rates(const PrecoderStack& f, const Scenario& s) {
  Eigen::VectorXd g(f.size());
  for (Index k = 0; k < f.num_ue; ++k)
    for (Index m = 0; m < f.subfiles; ++m)
      g(f.index(k, m)) = achievable_rate(f, s.channels.channels[static_cast<std::size_t>(k)],
                                         s.channels.noise_power, k, m, s.config.bandwidth);
  return g;
}

PowerBreakdown total_power(const PrecoderStack& f, const Association& a, const DdrAllocation& r,
                           const Scenario& s) {
  const ScenarioConfig& cfg = s.config;
  PowerBreakdown out;
  out.tx = transmit_power(f);
  out.fronthaul_rate = fronthaul_rates(a, r, s.cache);
  out.fronthaul = cfg.fronthaul_slope.cwiseProduct(out.fronthaul_rate);
  out.errh.resize(cfg.num_errh);
  out.budget_violated.assign(static_cast<std::size_t>(cfg.num_errh), false);
  for (Index i = 0; i < cfg.num_errh; ++i) {
    const bool active = out.tx(i) > cfg.association_threshold;
    out.errh(i) = active ? cfg.amplifier_slope(i) * out.tx(i) + cfg.active_power(i) : cfg.sleep_power(i);
    out.budget_violated[static_cast<std::size_t>(i)] = out.tx(i) > cfg.tx_power_budget(i);
  }
  out.total = out.errh.sum() + out.fronthaul.sum();
  out.busy = out.total - cfg.sleep_power.sum();
  return out;
}

double sum_rate(const DdrAllocation& r) { return r.rates.sum(); }

double objective_p1(const PrecoderStack& f, const Association& a, const DdrAllocation& r,
                    const Scenario& s) {
  return sum_rate(r) - s.config.eta * total_power(f, a, r, s).total;
}

std::string to_string(ConstraintFamily family) {
  switch (family) {
    case ConstraintFamily::kRateBounds: return "rate_bounds";
    case ConstraintFamily::kFronthaul: return "fronthaul";
    case ConstraintFamily::kAchievable: return "achievable_rate";
    case ConstraintFamily::kPower: return "power";
  }
  return "unknown";
}

double FeasibilityReport::worst_slack() const {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& c : slacks) worst = std::min(worst, c.slack);
  return worst;
}

double FeasibilityReport::worst_slack(ConstraintFamily family) const {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& c : slacks)
    if (c.family == family) worst = std::min(worst, c.slack);
  return worst;
}

FeasibilityReport check_feasibility(const PrecoderStack& f, const DdrAllocation& r,
                                    const Scenario& s, double tol, const Association* association) {
  const ScenarioConfig& cfg = s.config;
  FeasibilityReport rep;
  rep.tolerance = tol;
  auto add = [&](ConstraintFamily fam, Index idx, double slack) {
    rep.slacks.push_back({fam, idx, slack});
    if (slack < -tol) rep.violations.push_back({fam, idx, slack});
  };

  for (Index p = 0; p < r.rates.size(); ++p)
    add(ConstraintFamily::kRateBounds, p,
        std::min(r.rates(p) - cfg.qos_rate, cfg.subfile_rate_cap - r.rates(p)));

  const Association a = association ? *association : association_from_precoders(f, cfg.association_threshold);
  const Eigen::VectorXd fh = fronthaul_rates(a, r, s.cache);
  for (Index i = 0; i < cfg.num_errh; ++i) add(ConstraintFamily::kFronthaul, i, cfg.fronthaul_capacity(i) - fh(i));

  const Eigen::VectorXd g = achievable_rates(f, s);
  for (Index p = 0; p < g.size(); ++p) add(ConstraintFamily::kAchievable, p, g(p) - r.rates(p));

  const Eigen::VectorXd tx = transmit_power(f);
  for (Index i = 0; i < cfg.num_errh; ++i) add(ConstraintFamily::kPower, i, cfg.tx_power_budget(i) - tx(i));
  return rep;
}

}  // namespace fran
