#pragma once

#include <functional>

#include "uavsec/geometry.hpp"
#include "uavsec/scenario.hpp"

namespace uavsec {

/// Rotary-wing propulsion power at horizontal speed `v` (blade profile +
/// induced + parasite).
double propulsion_power(double v, const RotorcraftParams& rotor);

/// prev - P(v) * dt. Callers decide what a negative result means.
double residual_energy(double prev_j, double v, double dt, const RotorcraftParams& rotor);

/// Golden-section search for the minimizer of a unimodal `f` on [lo, hi].
double golden_section_minimize(const std::function<double(double)>& f, double lo, double hi,
                               double tol);

/// argmin_v P(v) on [0, v_upper].
double min_power_speed(const RotorcraftParams& rotor, double v_upper);

/// argmin_{v>0} P(v)/v on (0, v_upper].
double max_range_speed(const RotorcraftParams& rotor, double v_upper);

/// Rotor model with the characteristic speeds computed once.
class EnergyModel {
 public:
  EnergyModel(const RotorcraftParams& rotor, double max_speed_mps);

  double power(double v) const { return propulsion_power(v, rotor_); }
  double min_power_speed() const { return v_min_power_; }
  double max_range_speed() const { return v_max_range_; }
  /// Energy per meter at the maximum-range speed.
  double energy_per_meter() const { return power_at_max_range_ / v_max_range_; }

  /// Return-trip reserve: P(v_mr) * |pos - endpoint| / v_mr + e0.
  double adaptive_threshold(Vec2 pos, Vec2 endpoint, double e0_j) const;

  const RotorcraftParams& rotor() const { return rotor_; }

 private:
  RotorcraftParams rotor_;
  double v_min_power_;
  double v_max_range_;
  double power_at_max_range_;
};

}  // namespace uavsec
