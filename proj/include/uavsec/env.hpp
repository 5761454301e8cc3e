#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "uavsec/channel.hpp"
#include "uavsec/clustering.hpp"
#include "uavsec/energy.hpp"
#include "uavsec/fairness.hpp"
#include "uavsec/kinematics.hpp"
#include "uavsec/scenario.hpp"

namespace uavsec {

enum class Role { Comm, Jammer };

/// Raw (unnormalized) per-agent observation.
///   [x,y] of every communication UAV, then the jammer (when present), then
///   the eavesdropper; COMM only: cumulative secrecy bits of each own-cluster
///   user; then distance to endpoint, speed, residual energy.
struct Observation {
  std::vector<double> values;
  Role role = Role::Comm;
  int uav = 0;
};

using RawAction = std::array<double, 3>;

struct ActionTriple {
  RawAction raw{};
  double speed_mps = 0.0;
  double azimuth_rad = 0.0;
  double power_w = 0.0;
};

/// Affine map of [-1, 1]^3 onto speed [0, v_max], azimuth [-pi, pi] and
/// power [0, p_max]. Raw values are clamped first.
ActionTriple map_action(const RawAction& raw, double max_speed_mps, double max_power_w);

struct AgentFlags {
  bool active = true;             // had energy at slot start
  bool near_depletion = false;    // energy at or below the return threshold
  bool accel_violated = false;
  bool separation_violated = false;
  bool arrived = false;           // within arrival radius on its final slot
  bool final_slot = false;        // energy ran out or the horizon was reached
};

/// Inputs for one agent's reward in one slot.
struct RewardContext {
  double power_w = 0.0;           // propulsion power over the slot
  double dt = 1.0;
  bool near_depletion = false;
  double dist_before_m = 0.0;     // to own endpoint, slot start
  double dist_after_m = 0.0;      // to own endpoint, slot end
  bool final_slot = false;
  bool arrived = false;
  double r_ins_mbit = 0.0;        // system fair secrecy throughput this slot
  bool accel_violated = false;
  bool separation_violated = false;
};

struct RewardTerms {
  double ec = 0.0;
  double rd = 0.0;
  double ar = 0.0;
  double sec = 0.0;
  double accel = 0.0;
  double sep = 0.0;

  double total() const { return ec + rd + ar + sec + accel + sep; }
};

RewardTerms reward_components(const RewardWeights& w, const RewardContext& ctx);

struct SlotMetrics {
  double r_ins_bits = 0.0;                  // fairness weighted; factor 1 in BEN1
  double st_bits = 0.0;                     // unweighted scheduled secrecy bits
  std::vector<int> selected_user;           // per cluster, global user id, -1 if none
  std::vector<double> selected_secrecy_bps; // per cluster
  std::vector<double> selected_factor;      // per cluster
  std::vector<double> power_w;              // per agent (transmit/jamming)
  std::vector<double> jain;                 // per cluster, after accrual
};

struct StepOutcome {
  std::vector<Observation> next_obs;
  std::vector<double> rewards;
  std::vector<RewardTerms> terms;
  std::vector<AgentFlags> flags;
  bool terminal = false;
  SlotMetrics metrics;
};

/// The multi-UAV secure-communication POMDP. Agents 0..M-1 are the
/// communication UAVs (UAV m serves cluster m); agent M is the jammer when
/// the mode has one.
class SecureUavEnv {
 public:
  /// `clusters` must have uav_of_cluster filled in.
  SecureUavEnv(const SimConfig& cfg, UserLayout users, const ClusterAssignment& clusters);

  /// Places users, clusters them and matches clusters to UAV start points.
  static SecureUavEnv build(const SimConfig& cfg);

  std::vector<Observation> reset();
  StepOutcome step(std::span<const RawAction> raw_actions);

  int agent_count() const { return static_cast<int>(agents_.size()); }
  Role role(int agent) const;
  std::size_t observation_dim(int agent) const;
  /// Multipliers that bring each raw observation entry to order one.
  std::vector<double> observation_scale(int agent) const;

  int slot() const { return slot_; }
  bool terminal() const { return terminal_; }
  const SimConfig& config() const { return cfg_; }
  const EnergyModel& energy_model() const { return energy_; }
  const UavKinState& agent_state(int agent) const { return agents_[static_cast<std::size_t>(agent)]; }
  Vec2 eve_position() const { return eve_; }
  const ThroughputLedger& ledger() const { return ledger_; }
  const std::vector<Vec2>& users() const { return users_; }
  /// Global user ids of cluster m, ascending.
  const std::vector<int>& cluster_users(int m) const { return clusters_[static_cast<std::size_t>(m)]; }
  const FlightPath& agent_path(int agent) const;
  bool agent_active(int agent) const { return active_[static_cast<std::size_t>(agent)] != 0; }
  double agent_power(int agent) const { return power_[static_cast<std::size_t>(agent)]; }

 private:
  Observation observe(int agent) const;
  double max_power(int agent) const;

  SimConfig cfg_;
  ChannelParams channel_;
  EnergyModel energy_;
  std::vector<Vec2> users_;
  std::vector<std::vector<int>> clusters_;
  ThroughputLedger ledger_;
  std::vector<UavKinState> agents_;
  std::vector<char> active_;
  std::vector<double> power_;
  Vec2 eve_;
  int slot_ = 0;
  bool terminal_ = true;
};

/// Episode-level metrics accumulated step by step.
class EpisodeStats {
 public:
  explicit EpisodeStats(const SecureUavEnv& env);
  void observe(const SecureUavEnv& env, const StepOutcome& out);

  int slots() const { return slots_; }
  const std::vector<double>& agent_rewards() const { return reward_sum_; }
  /// (1 / agents) * sum over slots and agents of r_i[n].
  double average_cumulative_reward() const;
  /// (1 / M) * sum_m R_m^cum, in megabits.
  double average_cumulative_st_mbit() const;
  double total_st_mbit() const { return st_bits_ * 1e-6; }
  double total_fst_mbit() const { return fst_bits_ * 1e-6; }
  /// (1 / (M N)) * sum_m sum_n jain_m[n].
  double average_fairness() const;
  double average_speed() const;
  double accel_violation_rate() const;
  double separation_violation_rate() const;
  const std::vector<char>& arrived() const { return arrived_; }

 private:
  int comm_uavs_;
  int slots_ = 0;
  std::vector<double> reward_sum_;
  double st_bits_ = 0.0;
  double fst_bits_ = 0.0;
  double jain_sum_ = 0.0;
  double speed_sum_ = 0.0;
  long active_agent_slots_ = 0;
  long accel_violations_ = 0;
  long sep_violations_ = 0;
  std::vector<char> arrived_;
};

/// Per-slot trace of one episode, written as CSV.
class EpisodeTrace {
 public:
  explicit EpisodeTrace(const SecureUavEnv& env);
  /// Record the post-reset state as slot 0.
  void record_reset(const SecureUavEnv& env);
  void record(const SecureUavEnv& env, const StepOutcome& out);

  std::vector<std::string> header() const;
  const std::vector<std::vector<double>>& rows() const { return rows_; }
  void write_csv(const std::string& path) const;

 private:
  int agents_;
  int clusters_;
  bool has_jammer_;
  std::vector<std::vector<double>> rows_;
};

}  // namespace uavsec
