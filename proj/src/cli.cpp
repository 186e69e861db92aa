#include "fran/cli.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace fran {

using json = nlohmann::json;

void SweepSpec::validate() const {
  if (eta.empty()) throw ConfigError("sweep: 'eta' must not be empty");
  if (fronthaul_mbps.empty()) throw ConfigError("sweep: 'fronthaul_mbps' must not be empty");
  if (schemes.empty()) throw ConfigError("sweep: 'schemes' must not be empty");
  if (trials < 1) throw ConfigError("sweep: 'trials' must be at least 1");
  if (jobs < 0) throw ConfigError("sweep: 'jobs' must be non-negative");
  for (double e : eta)
    if (!(e >= 0.0) || !std::isfinite(e)) throw ConfigError("sweep: 'eta' entries must be finite and >= 0");
  for (double c : fronthaul_mbps)
    if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("sweep: 'fronthaul_mbps' entries must be positive");
}

SweepSpec parse_sweep_spec(const std::string& text) {
  SweepSpec spec;
  json doc;
  try {
    doc = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("sweep spec is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("sweep spec must be a JSON object");
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "eta") spec.eta = value.get<std::vector<double>>();
      else if (key == "fronthaul_mbps") spec.fronthaul_mbps = value.get<std::vector<double>>();
      else if (key == "trials") spec.trials = value.get<int>();
      else if (key == "seed_base") spec.seed_base = value.get<std::uint64_t>();
      else if (key == "out_dir") spec.out_dir = value.get<std::string>();
      else if (key == "trace") spec.trace = value.get<bool>();
      else if (key == "jobs") spec.jobs = value.get<int>();
      else if (key == "schemes") {
        spec.schemes.clear();
        for (const auto& name : value) spec.schemes.push_back(parse_scheme(name.get<std::string>()));
      } else {
        throw ConfigError("sweep: unknown key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sweep: wrong value type: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("sweep: ") + e.what());
  }
  spec.validate();
  return spec;
}

SweepSpec load_sweep_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open sweep spec '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_sweep_spec(buf.str());
}

Scenario sweep_scenario(const ScenarioConfig& base, double eta, double fronthaul_mbps, std::uint64_t seed) {
  ScenarioConfig cfg = base;
  cfg.eta = eta;
  cfg.fronthaul_capacity.setConstant(fronthaul_mbps);
  cfg.validate();
  return make_scenario(cfg, seed);
}

namespace {

// Each run of records at `level` restarts when the index of the loop below
// returns to 0.
bool monotone(const IterateLog& log, LoopLevel level, double sign) {
  bool have = false;
  double last = 0.0;
  for (const auto& r : log.records) {
    if (r.level != level || !r.accepted) continue;
    const int index = level == LoopLevel::kInner ? r.inner : r.middle;
    if (have && index != 0 && sign * (r.objective - last) > 1e-8 * (1.0 + std::abs(last))) return false;
    have = true;
    last = r.objective;
  }
  return true;
}

bool is_failure(RunStatus s) { return s == RunStatus::kInfeasible || s == RunStatus::kSolverFailure; }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

TrialRecord summarize_run(const RunResult& run, const Scenario& s, double init_slack) {
  TrialRecord t;
  t.scheme = run.scheme;
  t.eta = s.config.eta;
  t.status = run.status;
  t.failed = is_failure(run.status);
  t.message = run.message;
  t.min_iterate_slack = init_slack;
  if (run.status == RunStatus::kInfeasible) return t;
  t.sum_rate = run.sum_rate;
  t.total_power = run.total_power;
  t.busy_power = run.busy_power;
  t.objective = run.objective;
  t.outer_iterations = run.log.outer_iterations;
  t.middle_iterations = run.log.middle_iterations;
  t.inner_iterations = run.log.inner_iterations;
  t.active_links = static_cast<int>(run.association.sum());
  t.active_errh = static_cast<int>((run.association.colwise().maxCoeff().array() > 0).count());
  const Eigen::MatrixXd e = link_energy(run.precoders);
  for (Index k = 0; k < e.rows(); ++k)
    for (Index i = 0; i < e.cols(); ++i)
      if (run.association(k, i) == 0) t.max_suppressed_energy = std::max(t.max_suppressed_energy, e(k, i));
  for (const auto& r : run.log.records)
    if (r.accepted) t.min_iterate_slack = std::min(t.min_iterate_slack, r.min_slack);
  t.monotone_inner = monotone(run.log, LoopLevel::kInner, 1.0);
  t.monotone_middle = monotone(run.log, LoopLevel::kMiddle, -1.0);
  return t;
}

SweepResult run_sweep(const SweepSpec& spec, const ScenarioConfig& base, const DriverOptions& opt,
                      const RunObserver& observer) {
  spec.validate();
  struct Job {
    Scheme scheme;
    double eta, fronthaul;
    int trial;
  };
  std::vector<Job> jobs;
  for (double c : spec.fronthaul_mbps)
    for (double e : spec.eta)
      for (Scheme sc : spec.schemes)
        for (int t = 0; t < spec.trials; ++t) jobs.push_back({sc, e, c, t});

  SweepResult out;
  out.trials.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex observer_mutex;
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const Job& job = jobs[j];
      const std::uint64_t seed = spec.seed_base + static_cast<std::uint64_t>(job.trial);
      TrialRecord rec;
      RunResult run;
      run.scheme = job.scheme;
      try {
        const Scenario full = sweep_scenario(base, job.eta, job.fronthaul, seed);
        const Scenario s = job.scheme == Scheme::kAlg1NoCache ? without_cache(full) : full;
        const bool spdc = job.scheme == Scheme::kSpdc;
        const InitResult init = spdc ? algorithm2_init_spdc(s, opt) : algorithm2_init(s, opt);
        double init_slack = -1e300;
        if (init.status != RunStatus::kInfeasible)
          init_slack = check_iterate(init.precoders, init.rates, s, 0.0, spdc).worst_slack();
        run = spdc ? baseline_spdc(s, init, opt) : algorithm1(s, init, opt);
        run.scheme = job.scheme;
        rec = summarize_run(run, s, init_slack);
      } catch (const std::exception& e) {
        rec.failed = true;
        rec.status = RunStatus::kSolverFailure;
        rec.message = e.what();
      }
      rec.scheme = job.scheme;
      rec.eta = job.eta;
      rec.fronthaul_mbps = job.fronthaul;
      rec.trial = job.trial;
      rec.seed = seed;
      if (observer) {
        std::lock_guard lock(observer_mutex);
        observer(rec, run);
      }
      out.trials[j] = std::move(rec);
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n = std::min<std::size_t>(spec.jobs > 0 ? static_cast<std::size_t>(spec.jobs) : hw, jobs.size());
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  out.aggregates = aggregate(out.trials, spec);
  return out;
}

std::vector<AggregateRow> aggregate(const std::vector<TrialRecord>& trials, const SweepSpec& spec) {
  std::vector<AggregateRow> rows;
  for (double c : spec.fronthaul_mbps)
    for (double e : spec.eta)
      for (Scheme sc : spec.schemes) {
        AggregateRow row;
        row.scheme = sc;
        row.eta = e;
        row.fronthaul_mbps = c;
        std::vector<const TrialRecord*> ok;
        for (const auto& t : trials) {
          if (t.scheme != sc || t.eta != e || t.fronthaul_mbps != c) continue;
          ++row.trials;
          if (t.failed) ++row.failures;
          else ok.push_back(&t);
        }
        const double n = static_cast<double>(ok.size());
        auto mean = [&](auto field) {
          if (ok.empty()) return std::nan("");
          double sum = 0.0;
          for (const TrialRecord* t : ok) sum += field(*t);
          return sum / n;
        };
        auto stddev = [&](auto field, double m) {
          if (ok.empty()) return std::nan("");
          if (ok.size() == 1) return 0.0;
          double sum = 0.0;
          for (const TrialRecord* t : ok) sum += (field(*t) - m) * (field(*t) - m);
          return std::sqrt(sum / (n - 1.0));
        };
        auto rate = [](const TrialRecord& t) { return t.sum_rate; };
        auto busy = [](const TrialRecord& t) { return t.busy_power; };
        auto obj = [](const TrialRecord& t) { return t.objective; };
        row.sum_rate_mean = mean(rate);
        row.sum_rate_std = stddev(rate, row.sum_rate_mean);
        row.busy_power_mean = mean(busy);
        row.busy_power_std = stddev(busy, row.busy_power_mean);
        row.objective_mean = mean(obj);
        row.objective_std = stddev(obj, row.objective_mean);
        row.outer_mean = mean([](const TrialRecord& t) { return double(t.outer_iterations); });
        row.middle_mean = mean([](const TrialRecord& t) { return double(t.middle_iterations); });
        row.inner_mean = mean([](const TrialRecord& t) { return double(t.inner_iterations); });
        row.active_errh_mean = mean([](const TrialRecord& t) { return double(t.active_errh); });
        rows.push_back(row);
      }
  return rows;
}

std::string trials_csv(const std::vector<TrialRecord>& trials) {
  std::string out = std::string(kTrialsHeader) + "\n";
  for (const auto& t : trials) {
    out += to_string(t.scheme) + "," + num(t.eta) + "," + num(t.fronthaul_mbps) + "," + std::to_string(t.trial) + "," +
           std::to_string(t.seed) + "," + to_string(t.status) + "," + (t.failed ? "1" : "0") + "," +
           num(t.sum_rate) + "," + num(t.total_power) + "," + num(t.busy_power) + "," + num(t.objective) + "," +
           std::to_string(t.outer_iterations) + "," + std::to_string(t.middle_iterations) + "," +
           std::to_string(t.inner_iterations) + "," + std::to_string(t.active_errh) + "," +
           std::to_string(t.active_links) + "\n";
  }
  return out;
}

std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
  std::string out = std::string(kAggregateHeader) + "\n";
  for (const auto& r : rows) {
    out += to_string(r.scheme) + "," + num(r.eta) + "," + num(r.fronthaul_mbps) + "," + std::to_string(r.trials) +
           "," + std::to_string(r.failures) + "," + num(r.sum_rate_mean) + "," + num(r.sum_rate_std) + "," +
           num(r.busy_power_mean) + "," + num(r.busy_power_std) + "," + num(r.objective_mean) + "," +
           num(r.objective_std) + "," + num(r.outer_mean) + "," + num(r.middle_mean) + "," + num(r.inner_mean) +
           "," + num(r.active_errh_mean) + "\n";
  }
  return out;
}

std::string convergence_csv(const RunResult& run) {
  std::string out;
  for (LoopLevel level : {LoopLevel::kInner, LoopLevel::kMiddle, LoopLevel::kOuter}) {
    out += "# " + to_string(level) + "\n" + kConvergenceHeader + "\n";
    for (const auto& r : run.log.records) {
      if (r.level != level || !r.accepted) continue;
      out += to_string(level) + "," + std::to_string(r.outer) + "," + std::to_string(r.middle) + "," +
             std::to_string(r.inner) + "," + num(r.objective) + "," + num(r.min_slack) + "," + num(r.millis) + "\n";
    }
  }
  return out;
}

void write_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write '" + path.string() + "'");
    f << contents;
    f.flush();
    if (!f) {
      f.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("write failed for '" + path.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into '" + path.string() + "'");
  }
}

void emit_convergence(const RunResult& run, const std::filesystem::path& path) {
  write_atomic(path, convergence_csv(run));
}

std::string trial_label(const TrialRecord& t) {
  return to_string(t.scheme) + "_eta" + num(t.eta) + "_c" + num(t.fronthaul_mbps) + "_" + std::to_string(t.trial);
}

}  // namespace fran
