#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fran {

using Index = Eigen::Index;

/// Raised for malformed or inconsistent scenario configuration. The message
/// always names the offending key(s).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SmallScaleFading { kRayleigh, kUnit };

/// Which constant the eRRH-activity reweighting uses.
///   kSymmetric: c2 = 1 / ln(1 + 1/tau2)
///   kLiteral:   c2 = 1 / ln(1 + tau1^-2)
enum class C2Rule { kSymmetric, kLiteral };

/// Everything needed to build one optimization-and-transmission block.
///
/// Rates are in Mb/s, powers in W, distances in km, bandwidth in MHz. Every
/// per-eRRH quantity is stored as a vector of length num_errh.
struct ScenarioConfig {
  Index num_errh = 7;
  Index num_ue = 3;
  Index antennas_errh = 5;
  Index antennas_ue = 2;
  Index streams = 2;
  Index library_size = 6;
  Index subfiles_per_file = 2;

  double file_size = 80.0;          // Mbit
  double qos_rate = 0.1;            // Mb/s
  double subfile_rate_cap = 40.0;   // Mb/s

  Eigen::VectorXd fronthaul_capacity;  // Mb/s
  Eigen::VectorXd tx_power_budget;     // W
  Eigen::VectorXd active_power;        // W
  Eigen::VectorXd sleep_power;         // W
  Eigen::VectorXd amplifier_slope;     // unitless
  Eigen::VectorXd fronthaul_slope;     // W per Mb/s

  double cache_fraction = 0.5;
  double bandwidth = 10.0;           // MHz
  double noise_psd = -174.0;         // dBm/Hz
  double shadowing_std = 10.0;       // dB
  double inter_errh_distance = 0.3;  // km
  double ue_radius = 0.05;           // km around eRRH 1
  SmallScaleFading small_scale = SmallScaleFading::kRayleigh;

  double eta = 1e-6;
  double epsilon1 = 1e-3;
  double epsilon2 = 1e-2;
  double epsilon3 = 1e-2;
  double epsilon4 = 1e-2;
  double tau1 = 1e-5;
  double tau2 = 1e-3;
  C2Rule c2_rule = C2Rule::kSymmetric;
  double association_threshold = 1e-6;  // W of block energy
  int max_outer = 30;
  int max_middle = 30;
  int max_inner = 5;

  std::uint64_t rng_seed = 1;

  /// Optional explicit topology (km). When empty the seven-cell layout is used.
  Eigen::MatrixX2d errh_positions;
  Eigen::MatrixX2d ue_positions;

  /// Optional explicit cache-state block, rows (k, m) in request order
  /// (row k*M + m), one column per eRRH, entries 0/1.
  std::optional<Eigen::MatrixXi> cache_override;
  /// Optional explicit request list (0-based file ids, one per UE).
  std::vector<Index> requests_override;

  ScenarioConfig();

  Index total_antennas() const { return num_errh * antennas_errh; }
  Index requested_subfiles() const { return num_ue * subfiles_per_file; }
  /// Per-eRRH cache capacity in subfiles.
  Index cache_slots() const;

  /// Throws ConfigError naming the violated key(s).
  void validate() const;

  /// Resize per-eRRH vectors after num_errh changed, broadcasting the first
  /// entry.
  void broadcast_per_errh();
};

/// Reads a flat JSON object whose keys are the ScenarioConfig field names.
/// An empty file yields the defaults. Per-eRRH keys accept a scalar or an
/// array of length num_errh.
ScenarioConfig load_config(const std::filesystem::path& path);
ScenarioConfig parse_config(const std::string& text);

/// Applies a single `key=value` override using the same schema as the file.
void apply_override(ScenarioConfig& cfg, const std::string& key,
                    const std::string& value);

struct Topology {
  Eigen::MatrixX2d errh_positions;  // km
  Eigen::MatrixX2d ue_positions;    // km
};

/// Seven-cell layout: eRRH 1 at the origin, six more on a hexagonal ring at
/// the inter-eRRH spacing; UEs uniform in a disk of radius ue_radius around
/// eRRH 1.
Topology build_topology(const ScenarioConfig& cfg, std::uint64_t seed);

struct ChannelSet {
  /// channels[k] is N_u x N_R, stacked [H_k1, ..., H_kKR].
  std::vector<Eigen::MatrixXcd> channels;
  double noise_power = 0.0;  // W per receive antenna
  std::vector<std::string> warnings;

  Index antennas_ue() const { return channels.empty() ? 0 : channels.front().rows(); }
};

double path_loss_db(double distance_km);
/// Noise power (W) over the band for a PSD given in dBm/Hz and a bandwidth in
/// MHz.
double noise_power_w(double noise_psd_dbm_hz, double bandwidth_mhz);
inline double dbm_to_w(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

ChannelSet draw_channels(const ScenarioConfig& cfg, const Topology& topo,
                         std::uint64_t seed);

struct CacheState {
  Index num_errh = 0;
  Index library_size = 0;
  Index subfiles_per_file = 0;
  /// requests[k] = file requested by UE k (0-based).
  std::vector<Index> requests;
  /// stored[i] = per-eRRH flags over the library, index f*M + m.
  std::vector<std::vector<bool>> stored;
  /// cached(k*M + m, i) = 1 iff subfile m of UE k's file is at eRRH i.
  Eigen::MatrixXi cached;

  bool is_cached(Index errh, Index ue, Index subfile) const {
    return cached(ue * subfiles_per_file + subfile, errh) != 0;
  }
  Index stored_count(Index errh) const;
};

CacheState draw_cache_and_requests(const ScenarioConfig& cfg, std::uint64_t seed);

/// Immutable bundle for one trial.
struct Scenario {
  ScenarioConfig config;
  Topology topology;
  ChannelSet channels;
  CacheState cache;

  Index num_errh() const { return config.num_errh; }
  Index num_ue() const { return config.num_ue; }
  Index subfiles() const { return config.subfiles_per_file; }
  Index errh_antennas() const { return config.antennas_errh; }
  Index streams() const { return config.streams; }
};

/// Builds topology, channels and cache from independent streams derived from
/// the seed.
Scenario make_scenario(const ScenarioConfig& cfg, std::uint64_t seed);

/// Same scenario with every cache entry cleared.
Scenario without_cache(const Scenario& s);

/// The example cache block from the reference simulation setup: three UEs,
/// two subfiles each, seven eRRHs.
Eigen::MatrixXi reference_cache_block();

}  // namespace fran
