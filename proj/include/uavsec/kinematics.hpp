#pragma once

#include <span>
#include <utility>
#include <vector>

#include "uavsec/geometry.hpp"
#include "uavsec/scenario.hpp"

namespace uavsec {

/// Snapshot of one controllable UAV at a slot boundary.
struct UavKinState {
  Vec2 position;
  double speed_mps = 0.0;
  double heading_rad = 0.0;  // (-pi, pi]
  double energy_j = 0.0;
};

struct MotionLimits {
  double max_speed_mps;
  double accel_min_mps2;
  double accel_max_mps2;

  static MotionLimits from(const SimConfig& cfg) {
    return {cfg.max_speed_mps, cfg.accel_min_mps2, cfg.accel_max_mps2};
  }
};

struct MotionOutcome {
  UavKinState next;
  double implied_accel_mps2 = 0.0;  // the applied (clamped) acceleration
  bool accel_violated = false;      // raw acceleration outside [a_min, a_max]
  bool clamped = false;
};

/// Wrap an angle to (-pi, pi].
double normalize_heading(double rad);

/// One slot of constant-acceleration motion. The commanded speed sets the
/// raw acceleration; an out-of-range acceleration is clamped and flagged.
/// Displacement follows the commanded heading. Energy is carried unchanged.
MotionOutcome step_motion(const UavKinState& state, double cmd_speed, double cmd_heading,
                          double dt, const MotionLimits& limits);

/// Straight-line eavesdropper position at slot n of max_slots.
Vec2 eavesdropper_position(int slot, const SimConfig& cfg);

/// All pairs (i < j) closer than `min_sep`.
std::vector<std::pair<int, int>> check_separation(std::span<const Vec2> positions, double min_sep);

}  // namespace uavsec
