// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include "fran/cli.hpp"
#include "fran/subproblems.hpp"
#include "oracles.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <sstream>
#include <string>

using namespace fran;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failed_count = 0;

void report(int id, bool pass, const std::string& detail) {
  if (!pass) ++failed_count;
  std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

PrecoderStack random_stack(const Scenario& s, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  PrecoderStack f = PrecoderStack::zeros(s);
  for (auto& b : f.precoders)
    for (Index r = 0; r < b.rows(); ++r)
      for (Index c = 0; c < b.cols(); ++c) b(r, c) = {n(rng), n(rng)};
  return f;
}

// Surrogate tightness at the expansion point and minorization around it.
void criterion1() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_tight = 0.0, worst_minor = -1e300;
  for (int draw = 0; draw < 200; ++draw) {
    ScenarioConfig cfg;
    cfg.num_ue = 1 + draw % 3;
    cfg.streams = 1 + (draw / 3) % 2;
    const Scenario s = make_scenario(cfg, 1000 + static_cast<std::uint64_t>(draw));
    const double scale = std::pow(10.0, -3.0 + 3.0 * u(rng));
    const PrecoderStack f = random_stack(s, rng, scale);
    const Surrogate sur = build_surrogate(f, s);
    const Eigen::VectorXd g = achievable_rates(f, s);
    for (Index p = 0; p < f.size(); ++p) worst_tight = std::max(worst_tight, std::abs(sur.value(p, f, s) - g(p)));
    for (int j = 0; j < 50; ++j) {
      PrecoderStack h = f;
      const double step = scale * std::pow(10.0, -3.0 + 3.5 * u(rng));
      const PrecoderStack d = random_stack(s, rng, step);
      for (std::size_t b = 0; b < h.precoders.size(); ++b) h.precoders[b] += d.precoders[b];
      const Eigen::VectorXd gh = achievable_rates(h, s);
      for (Index p = 0; p < h.size(); ++p) worst_minor = std::max(worst_minor, sur.value(p, h, s) - gh(p));
    }
  }
  const double secs = seconds_since(t0);
  report(1, worst_tight <= 1e-8 && worst_minor <= 1e-8 && secs < 60.0,
         fmt("max |Gamma-g| at expansion %.3g, max Gamma-g on perturbed stacks %.3g, %.1f s", worst_tight,
             worst_minor, secs));
}

convex::ConvexFunction sphere(Index n, const Eigen::VectorXd& center, double weight = 1.0) {
  convex::ConvexFunction f;
  convex::QuadBlock q;
  q.block = 0;
  q.diagonal = Eigen::VectorXd::Constant(n, 2.0 * weight);
  f.quad.push_back(q);
  f.linear = -2.0 * weight * center;
  f.constant = weight * center.squaredNorm();
  return f;
}

// Best feasible objective found by uniform sampling in a box followed by a
// shrinking-radius local search.
double random_search(const convex::ConvexQcqp& qp, std::mt19937_64& rng, double box) {
  const Index n = qp.num_vars;
  std::uniform_real_distribution<double> u(-box, box);
  std::normal_distribution<double> nd(0.0, 1.0);
  auto feasible = [&](const Eigen::VectorXd& x) { return qp.slacks(x).minCoeff() >= 0.0; };
  Eigen::VectorXd best = Eigen::VectorXd::Zero(n);
  double best_v = feasible(best) ? qp.value(qp.objective, best) : 1e300;
  for (int k = 0; k < 200000; ++k) {
    Eigen::VectorXd x(n);
    for (Index i = 0; i < n; ++i) x(i) = u(rng);
    if (!feasible(x)) continue;
    const double v = qp.value(qp.objective, x);
    if (v < best_v) best_v = v, best = x;
  }
  for (double radius = box / 4.0; radius > 1e-9; radius *= 0.7)
    for (int k = 0; k < 400; ++k) {
      Eigen::VectorXd x = best;
      for (Index i = 0; i < n; ++i) x(i) += radius * nd(rng);
      if (!feasible(x)) continue;
      const double v = qp.value(qp.objective, x);
      if (v < best_v) best_v = v, best = x;
    }
  return best_v;
}

void criterion4() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const convex::SolverSettings settings;

  double lp_err = 0.0;
  int lp_bad = 0;
  for (int k = 0; k < 50; ++k) {
    const Index n = 2 + k % 5;
    convex::LinearProgram lp(n);
    for (Index v = 0; v < n; ++v) {
      lp.c(v) = u(rng);
      lp.lower(v) = -1.0 - std::abs(u(rng));
      lp.upper(v) = 1.0 + std::abs(u(rng));
    }
    for (Index r = 0; r < 2 + k % 4; ++r) {
      Eigen::VectorXd row(n);
      for (Index v = 0; v < n; ++v) row(v) = u(rng);
      lp.add_row(row, 0.2 + std::abs(u(rng)));
    }
    const auto ref = oracle::enumerate_vertices(lp);
    const convex::LpSolution sol = convex::solve_lp(lp, settings);
    if (sol.status != convex::SolveStatus::kOptimal) ++lp_bad;
    else lp_err = std::max(lp_err, std::abs(sol.objective - ref.objective));
  }

  double ball_err = 0.0;
  int ball_bad = 0;
  for (int k = 0; k < 20; ++k) {
    const Index n = 2 + k % 5;
    Eigen::VectorXd y(n), c(n);
    for (Index i = 0; i < n; ++i) y(i) = 3.0 * u(rng), c(i) = u(rng);
    const double r = 0.2 + 0.5 * std::abs(u(rng));
    if ((y - c).norm() <= r) y = c + (r + 1.0) * (y - c).normalized();
    convex::ConvexQcqp qp(n);
    qp.add_block(0, n);
    qp.objective = sphere(n, y);
    qp.add_constraint(sphere(n, c), r * r, "ball");
    const convex::QcqpSolution sol = convex::solve_qcqp(qp, settings, c);
    const Eigen::VectorXd x = c + r * (y - c).normalized();
    const double opt = ((y - c).norm() - r) * ((y - c).norm() - r);
    if (sol.status != convex::SolveStatus::kOptimal) ++ball_bad;
    else ball_err = std::max({ball_err, std::abs(sol.objective - opt), (sol.x - x).norm()});
  }

  double search_err = 0.0;
  int search_bad = 0;
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int k = 0; k < 10; ++k) {
    const Index n = 2 + k % 2;
    convex::ConvexQcqp qp(n);
    qp.add_block(0, n);
    Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return nd(rng); });
    convex::QuadBlock q;
    q.block = 0;
    q.dense = a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
    qp.objective.quad.push_back(q);
    qp.objective.linear = Eigen::VectorXd::NullaryExpr(n, [&] { return 2.0 * nd(rng); });
    for (int j = 0; j < 2; ++j) {
      Eigen::VectorXd center = Eigen::VectorXd::NullaryExpr(n, [&] { return 0.5 * nd(rng); });
      qp.add_constraint(sphere(n, center, 1.0 + std::abs(nd(rng))), 1.0 + center.squaredNorm());
    }
    const convex::QcqpSolution sol = convex::solve_qcqp(qp, settings, Eigen::VectorXd::Zero(n));
    const double ref = random_search(qp, rng, 2.5);
    if (sol.status != convex::SolveStatus::kOptimal) ++search_bad;
    else search_err = std::max(search_err, std::abs(sol.objective - ref));
  }
  const double secs = seconds_since(t0);
  report(4,
         lp_bad + ball_bad + search_bad == 0 && lp_err <= 1e-6 && ball_err <= 1e-8 && search_err <= 1e-3 &&
             secs < 120.0,
         fmt("LP vs vertices %.2g (50 LPs), ball projection %.2g (20), random search %.2g (10), "
             "non-optimal %d, %.1f s",
             lp_err, ball_err, search_err, lp_bad + ball_bad + search_bad, secs));
}

bool run_unit_suite(const std::string& exe, std::string& detail) {
  if (exe.empty()) {
    detail = "unit test binary not given";
    return false;
  }
  const std::string cmd = "\"" + exe + "\" --source-file=*test_model*,*test_scenario*,*test_subproblems* "
                          "--minimal --no-intro > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  detail = rc == 0 ? "model, scenario and subproblem unit tests pass" : "unit tests failed (" + std::to_string(rc) + ")";
  return rc == 0;
}

void criterion8(const std::string& unit_tests) {
  const ScenarioConfig cfg;
  bool ok = true;
  std::string bad;
  auto near = [&](const char* what, double got, double want, double rel) {
    if (std::abs(got - want) > rel * std::abs(want)) ok = false, bad += std::string(" ") + what;
  };
  near("path loss at 0.3 km", path_loss_db(0.3), 121.51, 1e-4);
  near("noise power", noise_power_w(cfg.noise_psd, cfg.bandwidth), 3.98e-14, 1e-3);
  near("24 dBm budget", cfg.tx_power_budget(0), 0.2512, 1e-3);
  near("per-precoder power", cfg.tx_power_budget(0) / static_cast<double>(cfg.subfiles_per_file * cfg.num_ue),
       0.04187, 1e-3);
  const Scenario s = make_scenario(cfg, 1);
  const PrecoderStack zero = PrecoderStack::zeros(s);
  const Association none = Association::Zero(cfg.num_ue, cfg.num_errh);
  DdrAllocation r{Eigen::VectorXd::Zero(cfg.num_ue * cfg.subfiles_per_file)};
  near("all-asleep power", total_power(zero, none, r, s).total, 7.0 * 56.0, 1e-15);
  std::string unit;
  const bool units = run_unit_suite(unit_tests, unit);
  report(8, ok && units, (ok ? std::string("constants reproduce") : "mismatch:" + bad) + "; " + unit);
}

struct SweepPart {
  SweepResult result;
  double seconds = 0.0;
};

SweepPart sweep(std::vector<Scheme> schemes, double eta, double cap, int trials, std::uint64_t seed, int jobs) {
  SweepSpec spec;
  spec.eta = {eta};
  spec.fronthaul_mbps = {cap};
  spec.schemes = std::move(schemes);
  spec.trials = trials;
  spec.seed_base = seed;
  spec.jobs = jobs;
  const auto t0 = Clock::now();
  SweepPart out;
  out.result = run_sweep(spec, ScenarioConfig{}, {}, [](const TrialRecord& t, const RunResult&) {
    std::fprintf(stderr, "  %s eta=%g C=%g trial %d: %s rate %.2f busy %.1f W links %d iters %d\n",
                 to_string(t.scheme).c_str(), t.eta, t.fronthaul_mbps, t.trial, to_string(t.status).c_str(),
                 t.sum_rate, t.busy_power, t.active_links, t.inner_iterations);
  });
  out.seconds = seconds_since(t0);
  return out;
}

const AggregateRow& row(const SweepResult& r, Scheme s) {
  for (const auto& a : r.aggregates)
    if (a.scheme == s) return a;
  throw std::logic_error("scheme missing from sweep");
}

std::vector<const TrialRecord*> records(const SweepResult& r, Scheme s) {
  std::vector<const TrialRecord*> out;
  for (const auto& t : r.trials)
    if (t.scheme == s) out.push_back(&t);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  int trials = 20;
  int jobs = 0;
  std::uint64_t seed = 1;
  std::string unit_tests;
  double small_eta = 1e-6, large_eta = 1e-2;
  app.add_option("--trials", trials, "Paired trials per Monte-Carlo criterion")->check(CLI::PositiveNumber);
  app.add_option("--jobs", jobs, "Worker threads (0: all cores)");
  app.add_option("--seed", seed, "Seed of the first trial");
  app.add_option("--unit-tests", unit_tests, "Path of the unit test binary");
  app.add_option("--small-eta", small_eta);
  app.add_option("--large-eta", large_eta);
  CLI11_PARSE(app, argc, argv);

  criterion1();

  std::fprintf(stderr, "default scenario, alg1-c\n");
  const SweepPart base = sweep({Scheme::kAlg1Cache}, small_eta, 50.0, trials, seed, jobs);
  {
    std::vector<int> iters;
    int inner_bad = 0, middle_bad = 0, fails = 0;
    for (const auto& t : base.result.trials) {
      if (t.failed) ++fails;
      if (!t.monotone_inner) ++inner_bad;
      if (!t.monotone_middle) ++middle_bad;
      iters.push_back(t.inner_iterations);
    }
    std::sort(iters.begin(), iters.end());
    const double median = iters.size() % 2 ? iters[iters.size() / 2]
                                           : 0.5 * (iters[iters.size() / 2 - 1] + iters[iters.size() / 2]);
    report(2, inner_bad == 0 && middle_bad == 0 && fails == 0 && median <= 60.0 && base.seconds < 600.0,
           fmt("%d runs, inner non-monotone in %d, middle non-monotone in %d, failures %d, median iterations %.1f "
               "(range %d-%d), %.0f s",
               trials, inner_bad, middle_bad, fails, median, iters.front(), iters.back(), base.seconds));
  }

  criterion4();

  std::fprintf(stderr, "C=50, small eta, spdc\n");
  const SweepPart small_spdc = sweep({Scheme::kSpdc}, small_eta, 50.0, trials, seed, jobs);
  std::fprintf(stderr, "C=50, large eta\n");
  const SweepPart large = sweep({Scheme::kAlg1Cache, Scheme::kSpdc}, large_eta, 50.0, trials, seed, jobs);
  std::fprintf(stderr, "C=1000, small eta\n");
  const SweepPart ample = sweep({Scheme::kAlg1Cache, Scheme::kAlg1NoCache}, small_eta, 1000.0, trials, seed, jobs);

  {
    double worst = 1e300;
    int fails = 0, runs = 0;
    for (const SweepPart* part : {&base, &small_spdc, &large, &ample})
      for (const auto& t : part->result.trials) {
        ++runs;
        if (t.failed) ++fails;
        worst = std::min(worst, t.min_iterate_slack);
      }
    report(3, fails == 0 && worst >= -1e-5,
           fmt("%d runs, %d failed, smallest slack over initial points and accepted iterates %.3g", runs, fails,
               worst));
  }
  {
    const double alg = row(base.result, Scheme::kAlg1Cache).sum_rate_mean;
    const double spdc = row(small_spdc.result, Scheme::kSpdc).sum_rate_mean;
    const double secs = base.seconds + small_spdc.seconds;
    report(5, alg >= 1.2 * spdc && secs < 1800.0,
           fmt("eta %g, %d paired trials: Alg1-C %.2f Mb/s vs SPD-C %.2f Mb/s, ratio %.3f, %.0f s", small_eta, trials,
               alg, spdc, alg / spdc, secs));
  }
  {
    const double small_ratio =
        row(base.result, Scheme::kAlg1Cache).busy_power_mean / row(small_spdc.result, Scheme::kSpdc).busy_power_mean;
    const double large_ratio =
        row(large.result, Scheme::kAlg1Cache).busy_power_mean / row(large.result, Scheme::kSpdc).busy_power_mean;
    report(6, large_ratio <= 0.6 && small_ratio <= 0.5,
           fmt("busy power Alg1-C / SPD-C: %.3f at eta %g (limit 0.6), %.3f at eta %g (limit 0.5)", large_ratio,
               large_eta, small_ratio, small_eta));
  }
  {
    const double c = row(ample.result, Scheme::kAlg1Cache).sum_rate_mean;
    const double nc = row(ample.result, Scheme::kAlg1NoCache).sum_rate_mean;
    const double diff = std::abs(c - nc);
    report(7, diff <= 0.05 * std::min(c, nc),
           fmt("C=1000 Mb/s: Alg1-C %.2f vs Alg1-NC %.2f Mb/s, difference %.2f%%", c, nc,
               100.0 * diff / std::min(c, nc)));
  }

  criterion8(unit_tests);

  {
    const auto alg = records(large.result, Scheme::kAlg1Cache);
    const auto spdc = records(large.result, Scheme::kSpdc);
    int sparser = 0;
    double worst_energy = 0.0;
    for (std::size_t k = 0; k < alg.size(); ++k) {
      if (!alg[k]->failed && !spdc[k]->failed && alg[k]->active_links < spdc[k]->active_links) ++sparser;
      worst_energy = std::max(worst_energy, alg[k]->max_suppressed_energy);
    }
    const double share = static_cast<double>(sparser) / static_cast<double>(alg.size());
    report(9, share >= 0.9 && worst_energy < 1e-6,
           fmt("eta %g: fewer active links than SPD-C in %d/%zu trials, largest suppressed block energy %.3g W",
               large_eta, sparser, alg.size(), worst_energy));
  }

  std::printf("%d of 9 criteria failed\n", failed_count);
  return failed_count;
}
