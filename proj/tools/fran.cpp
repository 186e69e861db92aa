// Experiment harness: single runs, eta/fronthaul sweeps and initializer checks.

#include "fran/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

using namespace fran;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> set;
  std::uint64_t seed = 1;
  std::optional<int> trials;
  std::vector<double> eta;
  std::vector<double> fronthaul;
  std::vector<std::string> schemes;
  std::string out = "out";
  bool trace = false;
  int jobs = 0;
};

void add_common(CLI::App* app, Common& c, bool with_trials) {
  app->add_option("--config", c.config, "Scenario config (flat JSON)")->check(CLI::ExistingFile);
  app->add_option("--set", c.set, "Config override key=value (repeatable)");
  app->add_option("--seed", c.seed, "Seed of the first trial");
  if (with_trials) app->add_option("--trials", c.trials, "Channel draws per point (default 20)")->check(CLI::PositiveNumber);
  app->add_option("--eta", c.eta, "Energy weight(s)");
  app->add_option("--fronthaul-mbps", c.fronthaul, "Fronthaul capacity of every link, Mb/s");
  app->add_option("--scheme", c.schemes, "alg1-c, alg1-nc or spdc (repeatable)");
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--jobs", c.jobs, "Worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
}

ScenarioConfig base_config(const Common& c) {
  ScenarioConfig cfg = c.config.empty() ? ScenarioConfig{} : load_config(c.config);
  for (const std::string& kv : c.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.broadcast_per_errh();
  cfg.validate();
  return cfg;
}

std::vector<Scheme> schemes_of(const Common& c, std::vector<Scheme> fallback) {
  if (c.schemes.empty()) return fallback;
  std::vector<Scheme> out;
  for (const auto& s : c.schemes) out.push_back(parse_scheme(s));
  return out;
}

int write_sweep(const SweepSpec& spec, const ScenarioConfig& cfg) {
  std::filesystem::create_directories(spec.out_dir);
  std::size_t done = 0;
  const std::size_t total =
      spec.eta.size() * spec.fronthaul_mbps.size() * spec.schemes.size() * static_cast<std::size_t>(spec.trials);
  const SweepResult res = run_sweep(spec, cfg, {}, [&](const TrialRecord& t, const RunResult& run) {
    ++done;
    std::fprintf(stderr, "[%zu/%zu] %s eta=%g C=%g trial=%d: %s rate=%.3f busy=%.2f W iters=%d\n", done, total,
                 to_string(t.scheme).c_str(), t.eta, t.fronthaul_mbps, t.trial, to_string(t.status).c_str(), t.sum_rate,
                 t.busy_power, t.inner_iterations);
    if (t.failed && !t.message.empty()) std::fprintf(stderr, "  %s\n", t.message.c_str());
    if (spec.trace && t.status != RunStatus::kInfeasible)
      emit_convergence(run, spec.out_dir / ("convergence_" + trial_label(t) + ".csv"));
  });
  write_atomic(spec.out_dir / "trials.csv", trials_csv(res.trials));
  write_atomic(spec.out_dir / "aggregate.csv", aggregate_csv(res.aggregates));
  std::cout << aggregate_csv(res.aggregates);
  int failures = 0;
  for (const auto& r : res.aggregates) failures += r.failures;
  return failures == 0 ? 0 : 3;
}

int init_check(const Common& c) {
  const ScenarioConfig base = base_config(c);
  const std::vector<Scheme> schemes = schemes_of(c, {Scheme::kAlg1Cache});
  const double eta = c.eta.empty() ? base.eta : c.eta.front();
  const double cap = c.fronthaul.empty() ? base.fronthaul_capacity.maxCoeff() : c.fronthaul.front();
  const int trials = c.trials.value_or(20);
  std::string csv = "scheme,trial,seed,status,passes,final_ratio,rates_reduced,worst_slack,feasible\n";
  int bad = 0;
  for (Scheme sc : schemes)
    for (int t = 0; t < trials; ++t) {
      const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(t);
      const Scenario full = sweep_scenario(base, eta, cap, seed);
      const Scenario s = sc == Scheme::kAlg1NoCache ? without_cache(full) : full;
      const bool spdc = sc == Scheme::kSpdc;
      const InitResult init = spdc ? algorithm2_init_spdc(s) : algorithm2_init(s);
      double slack = std::nan("");
      bool feasible = false;
      if (init.status != RunStatus::kInfeasible) {
        const FeasibilityReport rep = check_iterate(init.precoders, init.rates, s, 1e-6, spdc);
        slack = rep.worst_slack();
        feasible = rep.feasible();
      }
      if (!feasible) ++bad;
      char line[256];
      std::snprintf(line, sizeof line, "%s,%d,%llu,%s,%zu,%.10g,%d,%.10g,%d\n", to_string(sc).c_str(), t,
                    static_cast<unsigned long long>(seed), to_string(init.status).c_str(), init.ratio_trace.size(),
                    init.ratio_trace.empty() ? std::nan("") : init.ratio_trace.back(), init.rates_reduced ? 1 : 0,
                    slack, feasible ? 1 : 0);
      csv += line;
      std::cout << line << std::flush;
    }
  std::filesystem::create_directories(c.out);
  write_atomic(std::filesystem::path(c.out) / "init_check.csv", csv);
  return bad == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint caching-aware association, rate and precoder design for fog radio access networks"};
  app.require_subcommand(1);

  Common run_opt, sweep_opt, init_opt;
  CLI::App* run = app.add_subcommand("run", "Run the chosen schemes on one scenario");
  add_common(run, run_opt, false);
  run->add_flag("--trace", run_opt.trace, "Write convergence_<trial>.csv");

  std::string spec_path;
  bool paper_trials = false;
  CLI::App* sweep = app.add_subcommand("sweep", "Monte-Carlo sweep over eta and fronthaul capacity");
  sweep->add_option("spec", spec_path, "Sweep spec (JSON)")->check(CLI::ExistingFile);
  add_common(sweep, sweep_opt, true);
  sweep->add_flag("--trace", sweep_opt.trace, "Write convergence_<trial>.csv for every run");
  sweep->add_flag("--paper-trials", paper_trials, "Use 100 trials per point");

  CLI::App* init = app.add_subcommand("init-check", "Run only the initializer and report feasibility");
  add_common(init, init_opt, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const ScenarioConfig cfg = base_config(run_opt);
      SweepSpec spec;
      spec.eta = {run_opt.eta.empty() ? cfg.eta : run_opt.eta.front()};
      spec.fronthaul_mbps = {run_opt.fronthaul.empty() ? cfg.fronthaul_capacity.maxCoeff() : run_opt.fronthaul.front()};
      spec.trials = 1;
      spec.schemes = schemes_of(run_opt, {Scheme::kAlg1Cache});
      spec.seed_base = run_opt.seed;
      spec.out_dir = run_opt.out;
      spec.trace = run_opt.trace;
      spec.jobs = run_opt.jobs;
      return write_sweep(spec, cfg);
    }
    if (sweep->parsed()) {
      const ScenarioConfig cfg = base_config(sweep_opt);
      SweepSpec spec = spec_path.empty() ? SweepSpec{} : load_sweep_spec(spec_path);
      if (!sweep_opt.eta.empty()) spec.eta = sweep_opt.eta;
      if (!sweep_opt.fronthaul.empty()) spec.fronthaul_mbps = sweep_opt.fronthaul;
      if (!sweep_opt.schemes.empty()) spec.schemes = schemes_of(sweep_opt, {});
      if (sweep_opt.trials) spec.trials = *sweep_opt.trials;
      if (paper_trials) spec.trials = 100;
      if (sweep->count("--seed")) spec.seed_base = sweep_opt.seed;
      if (sweep->count("--out") || spec_path.empty()) spec.out_dir = sweep_opt.out;
      if (sweep_opt.trace) spec.trace = true;
      if (sweep->count("--jobs")) spec.jobs = sweep_opt.jobs;
      spec.validate();
      return write_sweep(spec, cfg);
    }
    return init_check(init_opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  }
}
