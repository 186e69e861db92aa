#pragma once

#include "fran/driver.hpp"
#include "fran/scenario.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fran {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Axes and bookkeeping of a Monte-Carlo sweep.
struct SweepSpec {
  std::vector<double> eta{1e-6, 1e-5, 1e-4, 1e-3, 1e-2};
  std::vector<double> fronthaul_mbps{50.0, 1000.0};
  int trials = 20;
  std::vector<Scheme> schemes{Scheme::kAlg1Cache, Scheme::kAlg1NoCache, Scheme::kSpdc};
  std::uint64_t seed_base = 1;
  std::filesystem::path out_dir = "out";
  /// Write convergence_<trial>.csv for every run.
  bool trace = false;
  /// Worker threads; 0 uses the hardware concurrency.
  int jobs = 0;

  /// Throws ConfigError on empty axes or trials < 1.
  void validate() const;
};

/// JSON object with keys eta, fronthaul_mbps, trials, schemes, seed_base,
/// out_dir, trace, jobs. Missing keys keep their defaults.
SweepSpec parse_sweep_spec(const std::string& text);
SweepSpec load_sweep_spec(const std::filesystem::path& path);

struct TrialRecord {
  Scheme scheme = Scheme::kAlg1Cache;
  double eta = 0.0;
  double fronthaul_mbps = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  RunStatus status = RunStatus::kConverged;
  bool failed = false;
  std::string message;
  double sum_rate = 0.0;
  double total_power = 0.0;
  double busy_power = 0.0;
  double objective = 0.0;
  int outer_iterations = 0;
  int middle_iterations = 0;
  int inner_iterations = 0;
  int active_errh = 0;
  int active_links = 0;
  /// Largest block energy among links outside the association (W).
  double max_suppressed_energy = 0.0;
  /// Smallest model slack over the initial point and every accepted iterate.
  double min_iterate_slack = 0.0;
  bool monotone_inner = true;
  bool monotone_middle = true;
};

struct AggregateRow {
  Scheme scheme = Scheme::kAlg1Cache;
  double eta = 0.0;
  double fronthaul_mbps = 0.0;
  int trials = 0;
  int failures = 0;
  double sum_rate_mean = 0.0, sum_rate_std = 0.0;
  double busy_power_mean = 0.0, busy_power_std = 0.0;
  double objective_mean = 0.0, objective_std = 0.0;
  double outer_mean = 0.0, middle_mean = 0.0, inner_mean = 0.0;
  double active_errh_mean = 0.0;
};

struct SweepResult {
  std::vector<TrialRecord> trials;
  std::vector<AggregateRow> aggregates;
};

/// Scenario of one sweep point: the base config with eta and every fronthaul
/// capacity replaced, drawn from `seed`.
Scenario sweep_scenario(const ScenarioConfig& base, double eta, double fronthaul_mbps, std::uint64_t seed);

/// Summarizes a finished run; `init_slack` is the smallest model slack of the
/// initial point.
TrialRecord summarize_run(const RunResult& run, const Scenario& s, double init_slack);

/// Called once per finished run, from the worker that ran it.
using RunObserver = std::function<void(const TrialRecord&, const RunResult&)>;

/// Runs every (scheme, eta, fronthaul, trial) job on a worker pool. All
/// schemes of one trial index see the same channels and cache. Nothing is
/// written to disk.
SweepResult run_sweep(const SweepSpec& spec, const ScenarioConfig& base, const DriverOptions& opt = {},
                      const RunObserver& observer = {});

/// Means exclude failed trials; standard deviations are sample deviations.
std::vector<AggregateRow> aggregate(const std::vector<TrialRecord>& trials, const SweepSpec& spec);

std::string trials_csv(const std::vector<TrialRecord>& trials);
std::string aggregate_csv(const std::vector<AggregateRow>& rows);
/// Three sections (inner, middle, outer), each a header line naming the loop
/// followed by accepted records in order.
std::string convergence_csv(const RunResult& run);

inline constexpr const char* kTrialsHeader =
    "scheme,eta,fronthaul_mbps,trial,seed,status,failed,sum_rate,total_power,busy_power,objective,"
    "outer_iterations,middle_iterations,inner_iterations,active_errh,active_links";
inline constexpr const char* kAggregateHeader =
    "scheme,eta,fronthaul_mbps,trials,failures,sum_rate_mean,sum_rate_std,busy_power_mean,busy_power_std,"
    "objective_mean,objective_std,outer_mean,middle_mean,inner_mean,active_errh_mean";
inline constexpr const char* kConvergenceHeader = "loop,outer,middle,inner,objective,min_slack,millis";

/// Writes to a temporary sibling and renames it into place. Throws IoError
/// and leaves no file behind on failure.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

void emit_convergence(const RunResult& run, const std::filesystem::path& path);

/// Label used in convergence file names for one sweep job.
std::string trial_label(const TrialRecord& t);

}  // namespace fran
