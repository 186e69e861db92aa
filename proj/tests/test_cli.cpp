#include "fran/cli.hpp"

#include <doctest.h>

#include <filesystem>
#include <sstream>

using namespace fran;

namespace {

ScenarioConfig quick_config() {
  ScenarioConfig cfg;
  cfg.epsilon1 = cfg.epsilon2 = cfg.epsilon3 = 1e9;
  return cfg;
}

SweepSpec one_point(std::vector<Scheme> schemes, int trials) {
  SweepSpec spec;
  spec.eta = {1e-6};
  spec.fronthaul_mbps = {50.0};
  spec.schemes = std::move(schemes);
  spec.trials = trials;
  spec.seed_base = 21;
  spec.jobs = 1;
  return spec;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("golden CSV headers") {
  CHECK(lines(trials_csv({})).front() ==
        "scheme,eta,fronthaul_mbps,trial,seed,status,failed,sum_rate,total_power,busy_power,objective,"
        "outer_iterations,middle_iterations,inner_iterations,active_errh,active_links");
  CHECK(lines(aggregate_csv({})).front() ==
        "scheme,eta,fronthaul_mbps,trials,failures,sum_rate_mean,sum_rate_std,busy_power_mean,busy_power_std,"
        "objective_mean,objective_std,outer_mean,middle_mean,inner_mean,active_errh_mean");
  const std::vector<std::string> conv = lines(convergence_csv(RunResult{}));
  REQUIRE(conv.size() == 6);
  CHECK(conv[0] == "# inner");
  CHECK(conv[1] == "loop,outer,middle,inner,objective,min_slack,millis");
  CHECK(conv[2] == "# middle");
  CHECK(conv[4] == "# outer");
}

TEST_CASE("sweep spec parsing") {
  const SweepSpec spec = parse_sweep_spec(R"({"eta": [0.01], "trials": 3, "schemes": ["spdc", "alg1-nc"]})");
  CHECK(spec.eta == std::vector<double>{0.01});
  CHECK(spec.trials == 3);
  CHECK(spec.schemes == std::vector<Scheme>{Scheme::kSpdc, Scheme::kAlg1NoCache});
  CHECK(spec.fronthaul_mbps == std::vector<double>{50.0, 1000.0});
  CHECK_THROWS_AS(parse_sweep_spec(R"({"eta": []})"), ConfigError);
  CHECK_THROWS_AS(parse_sweep_spec(R"({"trials": 0})"), ConfigError);
  CHECK_THROWS_AS(parse_sweep_spec(R"({"etas": [1]})"), ConfigError);
  CHECK_THROWS_AS(parse_sweep_spec(R"({"schemes": ["alg2"]})"), ConfigError);
}

TEST_CASE("aggregation excludes failed trials and counts them") {
  std::vector<TrialRecord> t(3);
  for (auto& r : t) {
    r.eta = 1e-6;
    r.fronthaul_mbps = 50.0;
    r.outer_iterations = r.middle_iterations = r.inner_iterations = 1;
  }
  t[0].sum_rate = 10.0;
  t[1].sum_rate = 14.0;
  t[2].sum_rate = 1e6;
  t[2].failed = true;
  const std::vector<AggregateRow> rows = aggregate(t, one_point({Scheme::kAlg1Cache}, 3));
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].trials == 3);
  CHECK(rows[0].failures == 1);
  CHECK(rows[0].sum_rate_mean == doctest::Approx(12.0));
  CHECK(rows[0].sum_rate_std == doctest::Approx(std::sqrt(8.0)));
}

TEST_CASE("paired trials share channels and cache across sweep points") {
  const ScenarioConfig cfg;
  const Scenario a = sweep_scenario(cfg, 1e-6, 50.0, 4);
  const Scenario b = sweep_scenario(cfg, 1e-2, 1000.0, 4);
  for (std::size_t k = 0; k < a.channels.channels.size(); ++k) CHECK(a.channels.channels[k] == b.channels.channels[k]);
  CHECK(a.cache.cached == b.cache.cached);
  CHECK((b.config.fronthaul_capacity.array() == 1000.0).all());
  CHECK(b.config.eta == 1e-2);
}

TEST_CASE("single-point sweep") {
  const SweepResult res = run_sweep(one_point({Scheme::kAlg1Cache}, 1), quick_config());
  REQUIRE(res.trials.size() == 1);
  REQUIRE(res.aggregates.size() == 1);
  CHECK(res.aggregates[0].failures == 0);
  CHECK(res.aggregates[0].sum_rate_std == 0.0);
  CHECK(res.aggregates[0].busy_power_std == 0.0);
  CHECK(res.trials[0].seed == 21);
  CHECK(lines(aggregate_csv(res.aggregates)).size() == 2);
}

TEST_CASE("same seed base gives identical CSV bytes") {
  const SweepSpec spec = one_point({Scheme::kAlg1Cache, Scheme::kSpdc}, 1);
  const SweepResult a = run_sweep(spec, quick_config());
  const SweepResult b = run_sweep(spec, quick_config());
  CHECK(trials_csv(a.trials) == trials_csv(b.trials));
  CHECK(aggregate_csv(a.aggregates) == aggregate_csv(b.aggregates));
}

TEST_CASE("convergence output") {
  const Scenario s = make_scenario(quick_config(), 8);
  const RunResult run = algorithm1(s, algorithm2_init(s));
  REQUIRE(run.status == RunStatus::kConverged);
  const auto dir = std::filesystem::temp_directory_path() / "fran_cli_test";
  std::filesystem::create_directories(dir);

  SUBCASE("single pass leaves one row beyond the initial value per section") {
    const std::vector<std::string> l = lines(convergence_csv(run));
    int section = -1;
    int rows[3] = {0, 0, 0};
    for (const auto& line : l) {
      if (line.rfind("# ", 0) == 0) ++section;
      else if (line.rfind("loop,", 0) != 0) ++rows[section];
    }
    CHECK(section == 2);
    for (int r : rows) CHECK(r == 2);
  }
  SUBCASE("file is written atomically") {
    const auto path = dir / "convergence_0.csv";
    emit_convergence(run, path);
    CHECK(std::filesystem::exists(path));
    CHECK(!std::filesystem::exists(dir / "convergence_0.csv.tmp"));
  }
  SUBCASE("malformed path leaves nothing behind") {
    const auto path = dir / "missing" / "convergence_0.csv";
    CHECK_THROWS_AS(emit_convergence(run, path), IoError);
    CHECK(!std::filesystem::exists(path));
    CHECK(!std::filesystem::exists(dir / "missing"));
  }
}
