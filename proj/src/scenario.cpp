#include "fran/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

namespace fran {

namespace {

using nlohmann::json;

// Independent, reproducible stream per (seed, purpose).
std::mt19937_64 make_stream(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

constexpr std::uint32_t kTopologyStream = 0x70f0u;
constexpr std::uint32_t kChannelStream = 0xc4a1u;
constexpr std::uint32_t kCacheStream = 0xcac4u;

double as_number(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("key '" + key + "': expected a number");
  return v.get<double>();
}

Index as_count(const json& v, const std::string& key) {
  if (!v.is_number_integer() && !(v.is_number() && std::floor(v.get<double>()) == v.get<double>()))
    throw ConfigError("key '" + key + "': expected an integer");
  return static_cast<Index>(v.get<double>());
}

Eigen::VectorXd as_per_errh(const json& v, const std::string& key) {
  if (v.is_number()) return Eigen::VectorXd::Constant(1, v.get<double>());
  if (!v.is_array() || v.empty())
    throw ConfigError("key '" + key + "': expected a number or a non-empty array");
  Eigen::VectorXd out(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Index>(i)) = as_number(v[i], key);
  return out;
}

Eigen::MatrixX2d as_positions(const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError("key '" + key + "': expected an array of [x, y] pairs");
  Eigen::MatrixX2d out(static_cast<Index>(v.size()), 2);
  for (std::size_t r = 0; r < v.size(); ++r) {
    if (!v[r].is_array() || v[r].size() != 2)
      throw ConfigError("key '" + key + "': every entry must be an [x, y] pair");
    out(static_cast<Index>(r), 0) = as_number(v[r][0], key);
    out(static_cast<Index>(r), 1) = as_number(v[r][1], key);
  }
  return out;
}

using Setter = std::function<void(ScenarioConfig&, const json&, const std::string&)>;

// A per-eRRH value given as a single number is kept as a length-1 vector and
// broadcast once num_errh is known.
const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"num_errh", [](auto& c, const json& v, const auto& k) { c.num_errh = as_count(v, k); }},
      {"num_ue", [](auto& c, const json& v, const auto& k) { c.num_ue = as_count(v, k); }},
      {"antennas_errh", [](auto& c, const json& v, const auto& k) { c.antennas_errh = as_count(v, k); }},
      {"antennas_ue", [](auto& c, const json& v, const auto& k) { c.antennas_ue = as_count(v, k); }},
      {"streams", [](auto& c, const json& v, const auto& k) { c.streams = as_count(v, k); }},
      {"library_size", [](auto& c, const json& v, const auto& k) { c.library_size = as_count(v, k); }},
      {"subfiles_per_file", [](auto& c, const json& v, const auto& k) { c.subfiles_per_file = as_count(v, k); }},
      {"file_size", [](auto& c, const json& v, const auto& k) { c.file_size = as_number(v, k); }},
      {"qos_rate", [](auto& c, const json& v, const auto& k) { c.qos_rate = as_number(v, k); }},
      {"subfile_rate_cap", [](auto& c, const json& v, const auto& k) { c.subfile_rate_cap = as_number(v, k); }},
      {"fronthaul_capacity", [](auto& c, const json& v, const auto& k) { c.fronthaul_capacity = as_per_errh(v, k); }},
      {"tx_power_budget", [](auto& c, const json& v, const auto& k) { c.tx_power_budget = as_per_errh(v, k); }},
      {"active_power", [](auto& c, const json& v, const auto& k) { c.active_power = as_per_errh(v, k); }},
      {"sleep_power", [](auto& c, const json& v, const auto& k) { c.sleep_power = as_per_errh(v, k); }},
      {"amplifier_slope", [](auto& c, const json& v, const auto& k) { c.amplifier_slope = as_per_errh(v, k); }},
      {"fronthaul_slope", [](auto& c, const json& v, const auto& k) { c.fronthaul_slope = as_per_errh(v, k); }},
      {"cache_fraction", [](auto& c, const json& v, const auto& k) { c.cache_fraction = as_number(v, k); }},
      {"bandwidth", [](auto& c, const json& v, const auto& k) { c.bandwidth = as_number(v, k); }},
      {"noise_psd", [](auto& c, const json& v, const auto& k) { c.noise_psd = as_number(v, k); }},
      {"shadowing_std", [](auto& c, const json& v, const auto& k) { c.shadowing_std = as_number(v, k); }},
      {"inter_errh_distance", [](auto& c, const json& v, const auto& k) { c.inter_errh_distance = as_number(v, k); }},
      {"ue_radius", [](auto& c, const json& v, const auto& k) { c.ue_radius = as_number(v, k); }},
      {"small_scale_fading",
       [](auto& c, const json& v, const auto& k) {
         if (v == "rayleigh") c.small_scale = SmallScaleFading::kRayleigh;
         else if (v == "unit") c.small_scale = SmallScaleFading::kUnit;
         else throw ConfigError("key '" + k + "': expected \"rayleigh\" or \"unit\"");
       }},
      {"eta", [](auto& c, const json& v, const auto& k) { c.eta = as_number(v, k); }},
      {"epsilon1", [](auto& c, const json& v, const auto& k) { c.epsilon1 = as_number(v, k); }},
      {"epsilon2", [](auto& c, const json& v, const auto& k) { c.epsilon2 = as_number(v, k); }},
      {"epsilon3", [](auto& c, const json& v, const auto& k) { c.epsilon3 = as_number(v, k); }},
      {"epsilon4", [](auto& c, const json& v, const auto& k) { c.epsilon4 = as_number(v, k); }},
      {"tau1", [](auto& c, const json& v, const auto& k) { c.tau1 = as_number(v, k); }},
      {"tau2", [](auto& c, const json& v, const auto& k) { c.tau2 = as_number(v, k); }},
      {"c2_rule",
       [](auto& c, const json& v, const auto& k) {
         if (v == "symmetric") c.c2_rule = C2Rule::kSymmetric;
         else if (v == "literal") c.c2_rule = C2Rule::kLiteral;
         else throw ConfigError("key '" + k + "': expected \"symmetric\" or \"literal\"");
       }},
      {"association_threshold", [](auto& c, const json& v, const auto& k) { c.association_threshold = as_number(v, k); }},
      {"max_outer", [](auto& c, const json& v, const auto& k) { c.max_outer = static_cast<int>(as_count(v, k)); }},
      {"max_middle", [](auto& c, const json& v, const auto& k) { c.max_middle = static_cast<int>(as_count(v, k)); }},
      {"max_inner", [](auto& c, const json& v, const auto& k) { c.max_inner = static_cast<int>(as_count(v, k)); }},
      {"rng_seed",
       [](auto& c, const json& v, const auto& k) {
         if (!v.is_number_integer() || v.get<long long>() < 0)
           throw ConfigError("key '" + k + "': expected a non-negative integer");
         c.rng_seed = v.get<std::uint64_t>();
       }},
      {"errh_positions", [](auto& c, const json& v, const auto& k) { c.errh_positions = as_positions(v, k); }},
      {"ue_positions", [](auto& c, const json& v, const auto& k) { c.ue_positions = as_positions(v, k); }},
      {"cache_override",
       [](auto& c, const json& v, const auto& k) {
         if (v.is_null()) {
           c.cache_override.reset();
           return;
         }
         if (v == "reference") {
           c.cache_override = reference_cache_block();
           return;
         }
         if (!v.is_array() || v.empty() || !v[0].is_array())
           throw ConfigError("key '" + k + "': expected a 0/1 matrix (array of rows) or \"reference\"");
         Eigen::MatrixXi m(static_cast<Index>(v.size()), static_cast<Index>(v[0].size()));
         for (std::size_t r = 0; r < v.size(); ++r) {
           if (!v[r].is_array() || v[r].size() != v[0].size())
             throw ConfigError("key '" + k + "': rows must have equal length");
           for (std::size_t col = 0; col < v[r].size(); ++col) {
             if (!v[r][col].is_number_integer())
               throw ConfigError("key '" + k + "': entries must be 0 or 1");
             m(static_cast<Index>(r), static_cast<Index>(col)) = v[r][col].get<int>();
           }
         }
         c.cache_override = m;
       }},
      {"requests",
       [](auto& c, const json& v, const auto& k) {
         if (!v.is_array()) throw ConfigError("key '" + k + "': expected an array of file ids");
         c.requests_override.clear();
         for (const auto& e : v) c.requests_override.push_back(as_count(e, k));
       }},
  };
  return table;
}

void apply_json(ScenarioConfig& cfg, const std::string& key, const json& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown key '" + key + "'");
  it->second(cfg, value, key);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

ScenarioConfig::ScenarioConfig() {
  fronthaul_capacity = Eigen::VectorXd::Constant(num_errh, 50.0);
  tx_power_budget = Eigen::VectorXd::Constant(num_errh, dbm_to_w(24.0));
  active_power = Eigen::VectorXd::Constant(num_errh, 84.0);
  sleep_power = Eigen::VectorXd::Constant(num_errh, 56.0);
  amplifier_slope = Eigen::VectorXd::Constant(num_errh, 2.8);
  fronthaul_slope = Eigen::VectorXd::Constant(num_errh, 5.0);
}

Index ScenarioConfig::cache_slots() const {
  const double slots = cache_fraction * static_cast<double>(library_size * subfiles_per_file);
  return static_cast<Index>(std::floor(slots + 1e-9));
}

void ScenarioConfig::broadcast_per_errh() {
  for (Eigen::VectorXd* v : {&fronthaul_capacity, &tx_power_budget, &active_power, &sleep_power,
                             &amplifier_slope, &fronthaul_slope}) {
    if (v->size() == 1 && num_errh != 1) *v = Eigen::VectorXd::Constant(num_errh, (*v)(0));
  }
}

void ScenarioConfig::validate() const {
  const std::pair<const char*, Index> counts[] = {
      {"num_errh", num_errh},           {"num_ue", num_ue},
      {"antennas_errh", antennas_errh}, {"antennas_ue", antennas_ue},
      {"streams", streams},             {"library_size", library_size},
      {"subfiles_per_file", subfiles_per_file}};
  for (const auto& [name, value] : counts)
    require(value >= 1, std::string("key '") + name + "' must be >= 1");

  require(streams <= std::min(antennas_ue, antennas_errh),
          "key 'streams' must not exceed min(antennas_ue, antennas_errh)");
  require(num_ue <= library_size,
          "keys 'num_ue' and 'library_size': distinct requests need num_ue <= library_size");
  require(cache_fraction >= 0.0 && cache_fraction <= 1.0, "key 'cache_fraction' must lie in [0, 1]");
  require(qos_rate >= 0.0, "key 'qos_rate' must be >= 0");
  require(qos_rate <= subfile_rate_cap,
          "keys 'qos_rate' and 'subfile_rate_cap': qos_rate must not exceed subfile_rate_cap");
  require(file_size > 0.0, "key 'file_size' must be > 0");
  require(bandwidth > 0.0, "key 'bandwidth' must be > 0");
  require(std::isfinite(noise_psd), "key 'noise_psd' must be finite");
  require(shadowing_std >= 0.0, "key 'shadowing_std' must be >= 0");
  require(inter_errh_distance > 0.0, "key 'inter_errh_distance' must be > 0");
  require(ue_radius >= 0.0, "key 'ue_radius' must be >= 0");
  require(eta >= 0.0, "key 'eta' must be >= 0");
  for (const auto& [name, value] : {std::pair{"epsilon1", epsilon1}, std::pair{"epsilon2", epsilon2},
                                    std::pair{"epsilon3", epsilon3}, std::pair{"epsilon4", epsilon4},
                                    std::pair{"tau1", tau1}, std::pair{"tau2", tau2}})
    require(value > 0.0, std::string("key '") + name + "' must be > 0");
  require(association_threshold >= 0.0, "key 'association_threshold' must be >= 0");
  require(max_outer >= 1 && max_middle >= 1 && max_inner >= 1,
          "keys 'max_outer', 'max_middle', 'max_inner' must be >= 1");

  const std::pair<const char*, const Eigen::VectorXd*> per_errh[] = {
      {"fronthaul_capacity", &fronthaul_capacity}, {"tx_power_budget", &tx_power_budget},
      {"active_power", &active_power},             {"sleep_power", &sleep_power},
      {"amplifier_slope", &amplifier_slope},       {"fronthaul_slope", &fronthaul_slope}};
  for (const auto& [name, v] : per_errh) {
    require(v->size() == num_errh, std::string("key '") + name + "' must have num_errh entries");
    require((v->array() >= 0.0).all() && v->allFinite(),
            std::string("key '") + name + "' must be finite and >= 0");
  }
  require((sleep_power.array() < active_power.array()).all(),
          "keys 'sleep_power' and 'active_power': sleep power must be below active power");

  if (errh_positions.rows() > 0)
    require(errh_positions.rows() == num_errh && errh_positions.allFinite(),
            "key 'errh_positions' must list num_errh finite positions");
  if (ue_positions.rows() > 0)
    require(ue_positions.rows() == num_ue && ue_positions.allFinite(),
            "key 'ue_positions' must list num_ue finite positions");
  if (cache_override) {
    require(cache_override->rows() == num_ue * subfiles_per_file && cache_override->cols() == num_errh,
            "key 'cache_override' must be (num_ue*subfiles_per_file) x num_errh");
    require(((cache_override->array() == 0) || (cache_override->array() == 1)).all(),
            "key 'cache_override' entries must be 0 or 1");
  }
  if (!requests_override.empty()) {
    require(static_cast<Index>(requests_override.size()) == num_ue,
            "key 'requests' must list one file per UE");
    std::vector<Index> sorted = requests_override;
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
            "key 'requests' must list distinct files");
    require(sorted.front() >= 0 && sorted.back() < library_size,
            "key 'requests' entries must lie in [0, library_size)");
  }
}

ScenarioConfig parse_config(const std::string& text) {
  ScenarioConfig cfg;
  const bool blank = std::all_of(text.begin(), text.end(), [](unsigned char ch) { return std::isspace(ch); });
  if (!blank) {
    json doc;
    try {
      doc = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config must be a flat JSON object");
    // num_errh first so per-eRRH arrays can be checked against it.
    if (doc.contains("num_errh")) {
      apply_json(cfg, "num_errh", doc["num_errh"]);
      // Defaults not given in the file are broadcast to the new size.
      for (Eigen::VectorXd* v : {&cfg.fronthaul_capacity, &cfg.tx_power_budget, &cfg.active_power,
                                 &cfg.sleep_power, &cfg.amplifier_slope, &cfg.fronthaul_slope})
        v->conservativeResize(1);
    }
    for (const auto& [key, value] : doc.items()) {
      if (key == "num_errh") continue;
      apply_json(cfg, key, value);
    }
  }
  cfg.broadcast_per_errh();
  cfg.validate();
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

void apply_override(ScenarioConfig& cfg, const std::string& key, const std::string& value) {
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;  // bare words such as rayleigh / literal
  }
  const Index before = cfg.num_errh;
  apply_json(cfg, key, parsed);
  if (cfg.num_errh != before) {
    for (Eigen::VectorXd* v : {&cfg.fronthaul_capacity, &cfg.tx_power_budget, &cfg.active_power,
                               &cfg.sleep_power, &cfg.amplifier_slope, &cfg.fronthaul_slope})
      v->conservativeResize(1);
  }
  cfg.broadcast_per_errh();
  cfg.validate();
}

Topology build_topology(const ScenarioConfig& cfg, std::uint64_t seed) {
  Topology topo;
  if (cfg.errh_positions.rows() > 0) {
    topo.errh_positions = cfg.errh_positions;
  } else {
    if (cfg.num_errh != 7)
      throw ConfigError("key 'num_errh': the default layout has 7 eRRHs; supply 'errh_positions'");
    topo.errh_positions.resize(7, 2);
    topo.errh_positions.row(0).setZero();
    for (int j = 0; j < 6; ++j) {
      const double angle = std::numbers::pi / 3.0 * j;
      topo.errh_positions(j + 1, 0) = cfg.inter_errh_distance * std::cos(angle);
      topo.errh_positions(j + 1, 1) = cfg.inter_errh_distance * std::sin(angle);
    }
  }

  if (cfg.ue_positions.rows() > 0) {
    topo.ue_positions = cfg.ue_positions;
    return topo;
  }
  auto rng = make_stream(seed, kTopologyStream);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  topo.ue_positions.resize(cfg.num_ue, 2);
  for (Index k = 0; k < cfg.num_ue; ++k) {
    const double r = cfg.ue_radius * std::sqrt(unit(rng));
    const double angle = 2.0 * std::numbers::pi * unit(rng);
    topo.ue_positions(k, 0) = topo.errh_positions(0, 0) + r * std::cos(angle);
    topo.ue_positions(k, 1) = topo.errh_positions(0, 1) + r * std::sin(angle);
  }
  return topo;
}

double path_loss_db(double distance_km) { return 140.7 + 36.7 * std::log10(distance_km); }

double noise_power_w(double noise_psd_dbm_hz, double bandwidth_mhz) {
  return dbm_to_w(noise_psd_dbm_hz + 10.0 * std::log10(bandwidth_mhz * 1e6));
}

ChannelSet draw_channels(const ScenarioConfig& cfg, const Topology& topo, std::uint64_t seed) {
  constexpr double kMinDistanceKm = 1e-3;
  ChannelSet out;
  out.noise_power = noise_power_w(cfg.noise_psd, cfg.bandwidth);

  auto rng = make_stream(seed, kChannelStream);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index nu = cfg.antennas_ue;
  const Index nr = cfg.antennas_errh;
  out.channels.reserve(static_cast<std::size_t>(cfg.num_ue));
  for (Index k = 0; k < cfg.num_ue; ++k) {
    Eigen::MatrixXcd h(nu, cfg.num_errh * nr);
    for (Index i = 0; i < cfg.num_errh; ++i) {
      double dist = (topo.ue_positions.row(k) - topo.errh_positions.row(i)).norm();
      if (dist < kMinDistanceKm) {
        out.warnings.push_back("UE " + std::to_string(k + 1) + " to eRRH " + std::to_string(i + 1) +
                               " distance clamped to 1 m");
        dist = kMinDistanceKm;
      }
      const double shadow = cfg.shadowing_std * normal(rng);
      const double gain = std::pow(10.0, -(path_loss_db(dist) + shadow) / 10.0);
      const double amplitude = std::sqrt(gain);
      for (Index c = 0; c < nr; ++c) {
        for (Index r = 0; r < nu; ++r) {
          std::complex<double> w{1.0, 0.0};
          if (cfg.small_scale == SmallScaleFading::kRayleigh) {
            const double re = normal(rng);
            const double im = normal(rng);
            w = std::complex<double>(re, im) * std::sqrt(0.5);
          }
          h(r, i * nr + c) = amplitude * w;
        }
      }
    }
    out.channels.push_back(std::move(h));
  }
  return out;
}

Index CacheState::stored_count(Index errh) const {
  const auto& flags = stored[static_cast<std::size_t>(errh)];
  return static_cast<Index>(std::count(flags.begin(), flags.end(), true));
}

CacheState draw_cache_and_requests(const ScenarioConfig& cfg, std::uint64_t seed) {
  CacheState cs;
  cs.num_errh = cfg.num_errh;
  cs.library_size = cfg.library_size;
  cs.subfiles_per_file = cfg.subfiles_per_file;
  const Index library_subfiles = cfg.library_size * cfg.subfiles_per_file;

  auto rng = make_stream(seed, kCacheStream);
  const Index slots = std::min(cfg.cache_slots(), library_subfiles);
  cs.stored.assign(static_cast<std::size_t>(cfg.num_errh),
                   std::vector<bool>(static_cast<std::size_t>(library_subfiles), false));
  std::vector<Index> pool(static_cast<std::size_t>(library_subfiles));
  for (Index i = 0; i < cfg.num_errh; ++i) {
    std::iota(pool.begin(), pool.end(), Index{0});
    // Partial Fisher-Yates: the first `slots` entries are a uniform sample.
    for (Index s = 0; s < slots; ++s) {
      std::uniform_int_distribution<Index> pick(s, library_subfiles - 1);
      std::swap(pool[static_cast<std::size_t>(s)], pool[static_cast<std::size_t>(pick(rng))]);
      cs.stored[static_cast<std::size_t>(i)][static_cast<std::size_t>(pool[static_cast<std::size_t>(s)])] = true;
    }
  }

  if (!cfg.requests_override.empty()) {
    cs.requests = cfg.requests_override;
  } else {
    std::uniform_int_distribution<Index> file(0, cfg.library_size - 1);
    while (static_cast<Index>(cs.requests.size()) < cfg.num_ue) {
      const Index f = file(rng);
      if (std::find(cs.requests.begin(), cs.requests.end(), f) == cs.requests.end())
        cs.requests.push_back(f);
    }
  }

  const Index m_count = cfg.subfiles_per_file;
  cs.cached.resize(cfg.num_ue * m_count, cfg.num_errh);
  for (Index k = 0; k < cfg.num_ue; ++k)
    for (Index m = 0; m < m_count; ++m)
      for (Index i = 0; i < cfg.num_errh; ++i) {
        const Index lib = cs.requests[static_cast<std::size_t>(k)] * m_count + m;
        cs.cached(k * m_count + m, i) = cs.stored[static_cast<std::size_t>(i)][static_cast<std::size_t>(lib)] ? 1 : 0;
      }

  if (cfg.cache_override) {
    cs.cached = *cfg.cache_override;
    for (Index k = 0; k < cfg.num_ue; ++k)
      for (Index m = 0; m < m_count; ++m)
        for (Index i = 0; i < cfg.num_errh; ++i) {
          const Index lib = cs.requests[static_cast<std::size_t>(k)] * m_count + m;
          cs.stored[static_cast<std::size_t>(i)][static_cast<std::size_t>(lib)] = cs.cached(k * m_count + m, i) != 0;
        }
  }
  return cs;
}

Scenario make_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Scenario s;
  s.config = cfg;
  s.topology = build_topology(cfg, seed);
  s.channels = draw_channels(cfg, s.topology, seed);
  s.cache = draw_cache_and_requests(cfg, seed);
  return s;
}

Scenario without_cache(const Scenario& s) {
  Scenario out = s;
  out.cache.cached.setZero();
  for (auto& flags : out.cache.stored) std::fill(flags.begin(), flags.end(), false);
  return out;
}

Eigen::MatrixXi reference_cache_block() {
  Eigen::MatrixXi c(6, 7);
  // rows (f1,1), (f1,2), (f2,1), (f2,2), (f3,1), (f3,2); columns eRRH 1..7
  c << 1, 0, 0, 0, 1, 0, 0,
       1, 0, 1, 0, 0, 1, 0,
       1, 0, 0, 1, 0, 0, 0,
       1, 1, 0, 0, 0, 1, 1,
       1, 0, 1, 0, 1, 1, 0,
       1, 0, 0, 0, 0, 0, 1;
  return c;
}

}  // namespace fran
