#pragma once

#include <cstddef>
#include <vector>

#include "uavsec/geometry.hpp"
#include "uavsec/scenario.hpp"

namespace uavsec {

inline constexpr double kSpeedOfLight = 299792458.0;

/// Propagation constants pulled out of a SimConfig.
struct ChannelParams {
  double altitude_m;
  double eta_a;
  double eta_b;
  double eta_los_db;
  double eta_nlos_db;
  double carrier_hz;
  double beta0_db;
  double bandwidth_hz;
  double noise_w;

  static ChannelParams from(const SimConfig& cfg);
};

struct LinkBudget {
  double distance_3d_m;
  double p_los;
  double path_loss_db;
  double gain_linear;
};

/// Sigmoid LoS probability; elevation angle measured in degrees.
double los_probability(double horizontal_dist_m, double altitude_m, double eta_a, double eta_b);

/// 20 log10(d) + 20 log10(fc) + 20 log10(4 pi / c).
double free_space_loss_db(double distance_m, double carrier_hz);

/// Average air-to-ground path loss mixing LoS and NLoS excess losses.
LinkBudget a2g_gain(Vec2 uav_pos, Vec2 user_pos, const ChannelParams& ch);

/// Air-to-air gain beta0 / |a - b|^2 (common altitude, horizontal distance).
/// Throws std::domain_error for coincident positions.
double a2a_gain(Vec2 pos_a, Vec2 pos_b, double beta0_db);

/// Everything a receiver sees in one slot. Index i of `tx_powers_w` and
/// `gains_to_target` is communication UAV i; the jammer is separate.
struct RateInputs {
  std::vector<double> tx_powers_w;
  double jam_power_w = 0.0;
  std::vector<double> gains_to_target;
  double jam_gain = 0.0;
  double noise_w = 0.0;
  double bandwidth_hz = 0.0;
};

/// B log2(1 + p_m g_m / (N0 B + sum_{i != m} p_i g_i + p_J g_J)).
double user_rate(std::size_t target_uav, const RateInputs& in);

/// Same structure as user_rate with the receiver being the eavesdropper.
double eve_rate(std::size_t target_uav, const RateInputs& in);

/// [r_user - r_eve]^+.
double secrecy_rate(double r_user, double r_eve);

}  // namespace uavsec
