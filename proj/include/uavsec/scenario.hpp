#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "uavsec/geometry.hpp"

namespace uavsec {

/// Which scheme the environment runs.
///   Sctpd - fairness-aware scheduling with a friendly jammer
///   Ben1  - fairness-blind scheduling (all fairness factors forced to 1)
///   Ben2  - fairness-aware scheduling without the jammer
enum class Mode { Sctpd, Ben1, Ben2 };

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);

/// Rotary-wing propulsion model constants.
struct RotorcraftParams {
  double p_blade_w = 79.86;
  double p_induced_w = 88.63;
  double tip_speed_mps = 120.0;
  double hover_induced_mps = 4.03;
  double body_drag_ratio = 0.6;
  double rotor_solidity = 0.05;
  double air_density_kg_m3 = 1.225;
  double disk_area_m2 = 0.503;
};

/// Per-term reward weights. Throughput terms use megabits.
struct RewardWeights {
  double k_ec = 0.001;
  double k_rd1 = 1.0;
  double k_rd2 = 10.0;
  double k_rd3 = 0.05;
  double k_ar = 100.0;
  double k_nar = -100.0;
  double k_th = 25.0;
  double k_nth = 1.0;
  double k_accel = -5.0;
  double k_sep = -10.0;
};

/// Trainer hyper-parameters.
struct TrainingParams {
  int episodes = 1500;
  std::vector<int> hidden{256, 128, 64};
  int expansion_dims = 2;
  int batch_size = 512;
  int buffer_capacity = 40000;
  double gamma = 0.9;
  double learning_rate = 1e-3;
  double tau = 0.01;
  double noise_std = 0.1;
  // Multiplicative per-episode decay of the exploration std; 1 keeps it fixed.
  double noise_decay = 1.0;
  int update_every = 1;
  int checkpoint_every = 100;
};

struct SimConfig {
  int schema_version = 1;

  int m_comm_uavs = 2;
  int k_users = 10;
  double altitude_m = 70.0;
  double slot_s = 1.0;
  double max_speed_mps = 20.0;
  double accel_min_mps2 = -5.0;
  double accel_max_mps2 = 5.0;
  double p_comm_max_w = 1.0;
  double p_jam_max_w = 0.3;
  double min_sep_m = 50.0;
  double e_max_j = 13000.0;
  double e0_compensation_j = 200.0;
  double fairness_target = 0.95;
  double decay_kgp = 0.1;
  double r_max_threshold_mbit = 150.0;
  double arrival_radius_m = 10.0;

  double bandwidth_hz = 1e6;
  double noise_psd_dbm_hz = -170.0;
  double beta0_db = -50.0;
  double carrier_hz = 2e9;
  double eta_a = 12.08;
  double eta_b = 0.11;
  double eta_los_db = 1.6;
  double eta_nlos_db = 23.0;

  std::vector<FlightPath> uav_paths{{{200.0, 0.0}, {200.0, 0.0}},
                                    {{300.0, 0.0}, {300.0, 0.0}}};
  FlightPath jammer_path{{250.0, 250.0}, {250.0, 250.0}};
  FlightPath eve_path{{0.0, 300.0}, {510.0, 300.0}};

  RewardWeights reward;
  Mode mode = Mode::Sctpd;
  std::uint64_t seed = 1;
  // Resolved by load_config when absent; see default_max_slots.
  int max_slots = 0;

  RotorcraftParams rotor;
  Box user_area{50.0, 50.0, 450.0, 250.0};
  // Optional pinned layout; when empty users are sampled from user_area.
  std::vector<Vec2> users;
  int kmeans_max_iters = 100;

  TrainingParams training;

  bool has_jammer() const { return mode != Mode::Ben2; }
  int agent_count() const { return m_comm_uavs + (has_jammer() ? 1 : 0); }
  double noise_w() const;
  double beta0_linear() const;
};

/// Raised for malformed documents or invariant violations. `field()` names
/// the offending key when one is known.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what);
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct UserLayout {
  std::vector<Vec2> positions;
};

inline constexpr int kSchemaVersion = 1;

/// Parse and validate a configuration document. Absent keys take defaults and
/// an absent or zero `max_slots` is resolved to default_max_slots().
SimConfig load_config(const nlohmann::json& doc);
SimConfig load_config_text(std::string_view text);
SimConfig load_config_file(const std::string& path,
                           const std::vector<std::string>& overrides = {});

/// Apply a `dotted.key=value` override in place. The value is parsed as JSON
/// when possible and kept as a string otherwise.
void apply_override(nlohmann::json& doc, std::string_view assignment);

nlohmann::json to_json(const SimConfig& cfg);

/// Throws ConfigError (with the field name) on the first violated invariant.
void validate(const SimConfig& cfg);

/// ceil(E_max / (P(v_mp) * slot)) + 20, v_mp the minimum-power speed.
int default_max_slots(const SimConfig& cfg);

/// Uniform user placement under cfg.seed with 1 m minimum spacing, or the
/// pinned list when cfg.users is set.
UserLayout place_users(const SimConfig& cfg);

/// Box covering every waypoint, the eavesdropper path and the user area.
Box arena_bounds(const SimConfig& cfg);

/// Git-style SHA-1 (over "blob <len>\0" + canonical JSON) of the config.
std::string config_hash(const SimConfig& cfg);

}  // namespace uavsec
