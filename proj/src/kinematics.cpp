#include "uavsec/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace uavsec {

double normalize_heading(double rad) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(rad, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  if (r > std::numbers::pi) r -= two_pi;
  return r;
}

MotionOutcome step_motion(const UavKinState& state, double cmd_speed, double cmd_heading,
                          double dt, const MotionLimits& limits) {
  if (!(cmd_speed >= 0.0 && cmd_speed <= limits.max_speed_mps))
    throw std::invalid_argument("step_motion: commanded speed " + std::to_string(cmd_speed) +
                                " outside [0, v_max]");
  if (!(dt > 0.0)) throw std::invalid_argument("step_motion: dt must be positive");

  MotionOutcome out;
  const double raw = (cmd_speed - state.speed_mps) / dt;
  out.accel_violated = raw < limits.accel_min_mps2 || raw > limits.accel_max_mps2;
  out.clamped = out.accel_violated;
  const double accel = std::clamp(raw, limits.accel_min_mps2, limits.accel_max_mps2);
  out.implied_accel_mps2 = accel;

  const double travelled = state.speed_mps * dt + 0.5 * accel * dt * dt;
  const double heading = normalize_heading(cmd_heading);
  out.next = state;
  out.next.heading_rad = heading;
  out.next.speed_mps = out.clamped ? std::clamp(state.speed_mps + accel * dt, 0.0,
                                                limits.max_speed_mps)
                                   : cmd_speed;
  out.next.position = state.position + Vec2{std::cos(heading), std::sin(heading)} * travelled;
  return out;
}

Vec2 eavesdropper_position(int slot, const SimConfig& cfg) {
  const int n = std::clamp(slot, 0, cfg.max_slots);
  const double frac = static_cast<double>(n) / static_cast<double>(cfg.max_slots);
  return cfg.eve_path.start + (cfg.eve_path.end - cfg.eve_path.start) * frac;
}

std::vector<std::pair<int, int>> check_separation(std::span<const Vec2> positions,
                                                  double min_sep) {
  std::vector<std::pair<int, int>> pairs;
  const int n = static_cast<int>(positions.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (distance(positions[i], positions[j]) < min_sep) pairs.emplace_back(i, j);
  return pairs;
}

}  // namespace uavsec
