#pragma once

#include "fran/convex/lp.hpp"
#include "fran/convex/qcqp.hpp"
#include "fran/model.hpp"
#include "fran/scenario.hpp"

#include <Eigen/Dense>

#include <vector>

namespace fran {

/// Reweighted-l1 weights. mu(k, i) weighs the UE k / eRRH i link energy,
/// theta(i) the total energy of eRRH i.
struct ReweightState {
  Eigen::MatrixXd mu;
  Eigen::VectorXd theta;
  double c1 = 0.0;
  double c2 = 0.0;
  double tau1 = 0.0;
  double tau2 = 0.0;
};

/// c1 = 1/ln(1 + 1/tau1).
double reweight_c1(double tau1);
/// 1/ln(1 + 1/tau2) for the symmetric rule, 1/ln(1 + tau1^-2) for the literal one.
double reweight_c2(const ScenarioConfig& cfg);

/// Constants from the config, weights evaluated at `f`.
ReweightState initial_weights(const PrecoderStack& f, const ScenarioConfig& cfg);
/// mu = c1/(e + tau1), theta = c2/(P_tx + tau2), constants kept from `state`.
ReweightState update_weights(const PrecoderStack& f, const ReweightState& state);

struct ApproxCoefficients {
  Eigen::VectorXd upsilon;   // beta_i + theta_i P_delta_i, per eRRH
  Eigen::MatrixXd vartheta;  // (k, i): mu_ki * sum_m (1 - c) R
  Eigen::MatrixXd tau;       // (k, i): upsilon_i + alpha_i vartheta_ki
  /// (p, i): alpha_i mu_ki e_ki (1 - c^i_p). The rate LP pays eta * sum_i q(p, i)
  /// per unit of R_p.
  Eigen::MatrixXd q;
  /// (p, i): mu_ki e_ki (1 - c^i_p), the fronthaul row of the rate LP. Equals
  /// the precoder-side fronthaul constraint evaluated at the fixed stack.
  Eigen::MatrixXd fronthaul;
  double b = 0.0;            // P_s + sum_i upsilon_i P_i^tx
};

ApproxCoefficients build_coefficients(const ReweightState& w, const DdrAllocation& r, const Scenario& s,
                                      const PrecoderStack& f);

/// sum_{i,k} tau_ki e_ki + P_s: the approximated total power as a function of
/// the stack.
double approx_total_power(const ApproxCoefficients& c, const PrecoderStack& f, const Scenario& s);
/// b + sum q R: the same quantity as a function of the rates.
double approx_total_power(const ApproxCoefficients& c, const DdrAllocation& r);

/// Objective of the alternating problem at fixed weights: sum R - eta *
/// approximated power.
double objective_p2(const ReweightState& w, const PrecoderStack& f, const DdrAllocation& r, const Scenario& s);
/// Objective of the precoder subproblem: eta * sum tau e.
double objective_p3(const ApproxCoefficients& c, const PrecoderStack& f, const Scenario& s);

struct RateLpOptions {
  /// When set, adds the exact fronthaul rows sum_k a_ki sum_m (1 - c) R <= C_i.
  const Association* exact_fronthaul = nullptr;
  /// Keeps the approximated (weight-based) fronthaul rows.
  bool approximate_fronthaul = true;
};

struct RateLpResult {
  convex::SolveStatus status = convex::SolveStatus::kIterationLimit;
  DdrAllocation rates;
  double objective = 0.0;
  /// Subfiles whose achievable rate fell below the QoS floor; their lower
  /// bound was clamped to g.
  std::vector<Index> clamped;
};

RateLpResult solve_rate_lp(const ApproxCoefficients& c, const Eigen::VectorXd& g, const Scenario& s,
                           const convex::SolverSettings& settings, const RateLpOptions& options = {});

/// Fixed matrices of the concave minorant of every g_p around a stack.
struct Surrogate {
  PrecoderStack expansion;
  Eigen::VectorXd rate;                   // g_p at the expansion point, Mb/s
  std::vector<Eigen::MatrixXcd> pi;       // H_k F_p
  std::vector<Eigen::MatrixXcd> xi;
  std::vector<Eigen::MatrixXcd> phi;      // xi + pi piᴴ
  std::vector<Eigen::MatrixXcd> linear;   // xi⁻¹ pi
  std::vector<Eigen::MatrixXcd> penalty;  // xi⁻¹ - phi⁻¹, Hermitian PSD
  std::vector<Eigen::MatrixXcd> penalty_tx;  // H_kᴴ penalty H_k
  Eigen::VectorXd constant;               // nats; Gamma_p without F-dependent terms
  double scale = 0.0;                     // W / ln 2
  bool regularized = false;

  /// Gamma_p(f) in Mb/s.
  double value(Index p, const PrecoderStack& f, const Scenario& s) const;
};

/// Precoders inside Phi_p: p itself, later subfiles of the same UE, and every
/// subfile of every other UE.
std::vector<Index> interfering_set(Index p, Index num_ue, Index subfiles);

Surrogate build_surrogate(const PrecoderStack& f, const Scenario& s);

/// Real variable layout over the free eRRH rows of every precoder column.
/// support(k, i) = 0 pins the eRRH-i rows of UE k's precoders to zero.
class PrecoderLayout {
 public:
  PrecoderLayout() = default;
  PrecoderLayout(const Scenario& s, const Association& support);

  Index num_vars() const { return num_vars_; }
  Index block(Index p, Index col) const { return p * streams_ + col; }
  Index block_start(Index p, Index col) const { return starts_[static_cast<std::size_t>(block(p, col))]; }
  Index block_size(Index p) const { return 2 * static_cast<Index>(rows_[static_cast<std::size_t>(p / subfiles_)].size()); }
  /// Free stack rows of UE k's precoders.
  const std::vector<Index>& rows(Index ue) const { return rows_[static_cast<std::size_t>(ue)]; }
  const Association& support() const { return support_; }

  Eigen::VectorXd embed(const PrecoderStack& f) const;
  PrecoderStack unembed(const Eigen::VectorXd& x) const;
  /// Restriction of an N_R x N_R Hermitian form to UE k's free rows, embedded.
  Eigen::MatrixXd embed_form(Index ue, const Eigen::MatrixXcd& b) const;
  /// Diagonal of the embedded per-eRRH energy, each free row of eRRH i
  /// weighted by weights(i).
  Eigen::VectorXd energy_diagonal(Index ue, const Eigen::VectorXd& weights) const;

  void add_blocks(convex::ConvexQcqp& qp) const;

 private:
  Index num_ue_ = 0, subfiles_ = 0, streams_ = 0, errh_antennas_ = 0, num_errh_ = 0;
  Index num_vars_ = 0;
  Association support_;
  std::vector<std::vector<Index>> rows_;
  std::vector<Index> starts_;
};

struct PrecoderProgram {
  convex::ConvexQcqp qp;
  PrecoderLayout layout;
  /// Index of the epigraph variable, or -1.
  Index epigraph = -1;
};

/// Convex QCQP: minimize eta sum tau e subject to the weighted fronthaul rows,
/// R_p <= Gamma_p(F) and the per-eRRH power budgets.
PrecoderProgram build_precoder_qcqp(const Surrogate& sur, const ApproxCoefficients& c, const DdrAllocation& r,
                                    const Scenario& s, const Association& support);

/// Epigraph form of the max-min ratio program: maximize t subject to
/// R_p t <= Gamma_p(F), the weighted fronthaul rows and the power budgets.
PrecoderProgram build_feasibility_qcqp(const Surrogate& sur, const ApproxCoefficients& c, const DdrAllocation& r,
                                       const Scenario& s, const Association& support);

}  // namespace fran
