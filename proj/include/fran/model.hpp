#pragma once

#include "fran/scenario.hpp"

#include <Eigen/Dense>

#include <complex>
#include <string>
#include <vector>

namespace fran {

/// Stacked precoders, one N_R x d matrix per requested (UE, subfile) pair.
/// Precoder p = k*M + m carries subfile m of the file requested by UE k.
template <typename Scalar>
struct PrecoderStackT {
  using Complex = std::complex<Scalar>;
  using Block = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;

  Index num_ue = 0;
  Index subfiles = 0;
  Index errh_antennas = 0;
  std::vector<Block> precoders;

  PrecoderStackT() = default;
  PrecoderStackT(Index ue, Index m, Index num_errh, Index nr, Index d)
      : num_ue(ue), subfiles(m), errh_antennas(nr),
        precoders(static_cast<std::size_t>(ue * m), Block::Zero(num_errh * nr, d)) {}

  static PrecoderStackT zeros(const Scenario& s) {
    return PrecoderStackT(s.num_ue(), s.subfiles(), s.num_errh(), s.errh_antennas(), s.streams());
  }

  Index size() const { return static_cast<Index>(precoders.size()); }
  Index index(Index ue, Index m) const { return ue * subfiles + m; }
  Index num_errh() const { return precoders.empty() ? 0 : precoders.front().rows() / errh_antennas; }
  Index streams() const { return precoders.empty() ? 0 : precoders.front().cols(); }

  Block& operator[](Index p) { return precoders[static_cast<std::size_t>(p)]; }
  const Block& operator[](Index p) const { return precoders[static_cast<std::size_t>(p)]; }
  Block& at(Index ue, Index m) { return (*this)[index(ue, m)]; }
  const Block& at(Index ue, Index m) const { return (*this)[index(ue, m)]; }

  /// Rows of eRRH i inside precoder p.
  auto errh_block(Index p, Index i) { return (*this)[p].middleRows(i * errh_antennas, errh_antennas); }
  auto errh_block(Index p, Index i) const {
    return (*this)[p].middleRows(i * errh_antennas, errh_antennas);
  }

  /// trace(F^i_p F^i_pᴴ).
  Scalar block_energy(Index p, Index i) const { return errh_block(p, i).squaredNorm(); }

  bool all_finite() const {
    for (const auto& b : precoders)
      if (!b.allFinite()) return false;
    return true;
  }
};

using PrecoderStack = PrecoderStackT<double>;

/// Per-subfile delivery rates, entry p = k*M + m (Mb/s).
struct DdrAllocation {
  Eigen::VectorXd rates;
};

/// a(k, i) = 1 iff eRRH i serves UE k.
using Association = Eigen::MatrixXi;

struct PowerBreakdown {
  Eigen::VectorXd tx;        // P_i^tx, W
  Eigen::VectorXd errh;      // P_i^eRRH, W
  Eigen::VectorXd fronthaul; // P_i^FH, W
  Eigen::VectorXd fronthaul_rate;  // Mb/s
  std::vector<bool> budget_violated;
  double total = 0.0;
  double busy = 0.0;  // total minus the sleep power of every eRRH
};

/// e(k, i) = sum over m of the eRRH-i block energy of UE k's precoders.
Eigen::MatrixXd link_energy(const PrecoderStack& f);
/// P_i^tx for every eRRH.
Eigen::VectorXd transmit_power(const PrecoderStack& f);

Association association_from_precoders(const PrecoderStack& f, double energy_threshold);

/// Fronthaul load of eRRH i: the missing part of every associated UE's file.
double fronthaul_rate(const Association& a, const DdrAllocation& r, const CacheState& cache, Index errh);
Eigen::VectorXd fronthaul_rates(const Association& a, const DdrAllocation& r, const CacheState& cache);

/// Xi for precoder (ue, m): later own subfiles, every other UE's subfiles, noise.
Eigen::MatrixXcd interference_covariance(const PrecoderStack& f, const Eigen::MatrixXcd& h,
                                         double noise_power, Index ue, Index m);

/// W log2|I + Pi Piᴴ Xi⁻¹| in Mb/s, via the Cholesky log-det difference.
double achievable_rate(const PrecoderStack& f, const Eigen::MatrixXcd& h, double noise_power,
                       Index ue, Index m, double bandwidth_mhz);
/// Every g_p, indexed like DdrAllocation.
Eigen::VectorXd achievable_rates(const PrecoderStack& f, const Scenario& s);

/// log det of a Hermitian positive definite matrix.
double log_det_hpd(const Eigen::MatrixXcd& m);

PowerBreakdown total_power(const PrecoderStack& f, const Association& a, const DdrAllocation& r,
                           const Scenario& s);

double sum_rate(const DdrAllocation& r);
double objective_p1(const PrecoderStack& f, const Association& a, const DdrAllocation& r,
                    const Scenario& s);

enum class ConstraintFamily { kRateBounds, kFronthaul, kAchievable, kPower };

std::string to_string(ConstraintFamily family);

struct ConstraintSlack {
  ConstraintFamily family;
  Index index;    // subfile p or eRRH i
  double slack;   // >= 0 when satisfied
};

struct FeasibilityReport {
  std::vector<ConstraintSlack> slacks;
  std::vector<ConstraintSlack> violations;
  double tolerance = 0.0;

  bool feasible() const { return violations.empty(); }
  double worst_slack() const;
  double worst_slack(ConstraintFamily family) const;
};

/// Evaluates rate bounds, fronthaul capacity, R <= g and per-eRRH power. The
/// fronthaul rows use `association` when given, else the thresholded
/// association of `f`. Slacks are absolute, in Mb/s or W.
FeasibilityReport check_feasibility(const PrecoderStack& f, const DdrAllocation& r,
                                    const Scenario& s, double tol,
                                    const Association* association = nullptr);

}  // namespace fran
