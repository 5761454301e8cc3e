#include "uavsec/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace uavsec {

ChannelParams ChannelParams::from(const SimConfig& cfg) {
  return {cfg.altitude_m, cfg.eta_a,     cfg.eta_b,        cfg.eta_los_db, cfg.eta_nlos_db,
          cfg.carrier_hz, cfg.beta0_db, cfg.bandwidth_hz, cfg.noise_w()};
}

double los_probability(double horizontal_dist_m, double altitude_m, double eta_a, double eta_b) {
  if (!(altitude_m > 0.0)) throw std::invalid_argument("los_probability: altitude must be > 0");
  const double d = std::hypot(altitude_m, horizontal_dist_m);
  const double elevation_deg = std::asin(altitude_m / d) * 180.0 / std::numbers::pi;
  return 1.0 / (1.0 + eta_a * std::exp(-eta_b * (elevation_deg - eta_a)));
}

double free_space_loss_db(double distance_m, double carrier_hz) {
  return 20.0 * std::log10(distance_m) + 20.0 * std::log10(carrier_hz) +
         20.0 * std::log10(4.0 * std::numbers::pi / kSpeedOfLight);
}

LinkBudget a2g_gain(Vec2 uav_pos, Vec2 user_pos, const ChannelParams& ch) {
  LinkBudget lb;
  const double horizontal = distance(uav_pos, user_pos);
  lb.distance_3d_m = std::hypot(ch.altitude_m, horizontal);
  lb.p_los = los_probability(horizontal, ch.altitude_m, ch.eta_a, ch.eta_b);
  lb.path_loss_db = free_space_loss_db(lb.distance_3d_m, ch.carrier_hz) +
                    (ch.eta_los_db - ch.eta_nlos_db) * lb.p_los + ch.eta_nlos_db;
  lb.gain_linear = std::pow(10.0, -lb.path_loss_db / 10.0);
  return lb;
}

double a2a_gain(Vec2 pos_a, Vec2 pos_b, double beta0_db) {
  const double d2 = (pos_a - pos_b).squared_norm();
  if (d2 == 0.0) throw std::domain_error("a2a_gain: coincident positions");
  return std::pow(10.0, beta0_db / 10.0) / d2;
}

namespace {

double sinr_rate(std::size_t target, const RateInputs& in) {
  if (target >= in.tx_powers_w.size() || in.gains_to_target.size() != in.tx_powers_w.size())
    throw std::invalid_argument("rate: inconsistent RateInputs");
  double interference = in.jam_power_w * in.jam_gain;
  for (std::size_t i = 0; i < in.tx_powers_w.size(); ++i)
    if (i != target) interference += in.tx_powers_w[i] * in.gains_to_target[i];
  const double signal = in.tx_powers_w[target] * in.gains_to_target[target];
  return in.bandwidth_hz * std::log2(1.0 + signal / (in.noise_w + interference));
}

}  // namespace

double user_rate(std::size_t target_uav, const RateInputs& in) { return sinr_rate(target_uav, in); }

double eve_rate(std::size_t target_uav, const RateInputs& in) { return sinr_rate(target_uav, in); }

double secrecy_rate(double r_user, double r_eve) { return std::max(r_user - r_eve, 0.0); }

}  // namespace uavsec
