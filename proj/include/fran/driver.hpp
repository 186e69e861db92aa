#pragma once

#include "fran/convex/qcqp.hpp"
#include "fran/model.hpp"
#include "fran/scenario.hpp"
#include "fran/subproblems.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fran {

enum class Scheme { kAlg1Cache, kAlg1NoCache, kSpdc };

std::string to_string(Scheme s);
/// Accepts "alg1-c", "alg1-nc", "spdc".
Scheme parse_scheme(const std::string& name);

/// Order of the two blocks inside one middle-loop pass.
enum class MiddleOrder { kPrecoderFirst, kRateFirst };

struct DriverOptions {
  convex::SolverSettings solver;
  MiddleOrder order = MiddleOrder::kRateFirst;
  /// Adds the exact fronthaul rows, evaluated at the current thresholded
  /// association, to every rate LP.
  bool exact_fronthaul = true;
  /// Once a link's energy falls to the association threshold its precoder
  /// rows are pinned to zero for the rest of the run.
  bool pin_suppressed = true;
  /// Re-solves the max-min ratio program on the current support at the start
  /// of every outer iteration, so the rate step has room to move.
  bool rate_headroom = true;
  /// Max-min passes per headroom step.
  int headroom_passes = 1;
  /// After every accepted precoder step, shrinks each precoder by the
  /// smallest factor that keeps its rate constraint satisfied.
  bool scale_step = true;
  /// Seed of the random stack drawn by the initializer.
  std::uint64_t init_seed = 1;
};

enum class LoopLevel { kInit, kInner, kMiddle, kOuter };

std::string to_string(LoopLevel level);

struct IterateRecord {
  LoopLevel level = LoopLevel::kInner;
  int outer = 0;
  int middle = 0;
  int inner = 0;
  double objective = 0.0;
  /// Smallest constraint slack of the model constraints (negative when
  /// violated).
  double min_slack = 0.0;
  double millis = 0.0;
  bool accepted = true;
};

struct IterateLog {
  std::vector<IterateRecord> records;
  int outer_iterations = 0;
  int middle_iterations = 0;  // summed over outer iterations
  int inner_iterations = 0;   // summed over every middle iteration
  int rejected_steps = 0;

  std::vector<double> series(LoopLevel level) const;
  int total_iterations() const { return inner_iterations; }
};

enum class RunStatus { kConverged, kIterationLimit, kInfeasible, kSolverFailure };

std::string to_string(RunStatus s);

struct InitResult {
  RunStatus status = RunStatus::kInfeasible;
  PrecoderStack precoders;
  ReweightState weights;
  DdrAllocation rates;
  /// min_p g_p / R_p after every pass of the max-min program.
  std::vector<double> ratio_trace;
  bool rates_reduced = false;
  std::string message;
};

struct RunResult {
  Scheme scheme = Scheme::kAlg1Cache;
  RunStatus status = RunStatus::kConverged;
  PrecoderStack precoders;
  DdrAllocation rates;
  Association association;
  double sum_rate = 0.0;
  double total_power = 0.0;
  double busy_power = 0.0;
  double objective = 0.0;  // P1
  Eigen::VectorXd fronthaul_rates;
  IterateLog log;
  std::string message;
};

/// Finds a point satisfying every model constraint: scaled random stack, rate
/// LP, then the max-min ratio program until its value settles.
InitResult algorithm2_init(const Scenario& s, const DriverOptions& opt = {});
/// Variant used by the SPD-C baseline: link weights frozen at zero, every
/// eRRH serving every UE.
InitResult algorithm2_init_spdc(const Scenario& s, const DriverOptions& opt = {});

RunResult algorithm1(const Scenario& s, const InitResult& init, const DriverOptions& opt = {});
RunResult baseline_spdc(const Scenario& s, const InitResult& init, const DriverOptions& opt = {});
/// Runs the initializer and algorithm1 on the scenario with every cache cleared.
RunResult baseline_nocache(const Scenario& s, const DriverOptions& opt = {});

/// Runs the initializer appropriate for the scheme, then the scheme.
RunResult run_scheme(Scheme scheme, const Scenario& s, const DriverOptions& opt = {});

/// Checks the model constraints of an accepted iterate. SPD-C evaluates the
/// fronthaul rows with every link active.
FeasibilityReport check_iterate(const PrecoderStack& f, const DdrAllocation& r, const Scenario& s, double tol,
                                bool all_links);

}  // namespace fran
