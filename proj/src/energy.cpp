#include "uavsec/energy.hpp"

#include <cmath>
#include <stdexcept>

namespace uavsec {

double propulsion_power(double v, const RotorcraftParams& r) {
  if (v < 0.0) throw std::invalid_argument("propulsion_power: negative speed");
  const double v2 = v * v;
  const double v0_2 = r.hover_induced_mps * r.hover_induced_mps;
  const double blade = r.p_blade_w * (1.0 + 3.0 * v2 / (r.tip_speed_mps * r.tip_speed_mps));
  // sqrt(1 + x^2) - x with x = v^2/(2 v0^2); rewritten as 1/(sqrt(1+x^2)+x)
  // so large speeds do not cancel catastrophically.
  const double x = v2 / (2.0 * v0_2);
  const double induced = r.p_induced_w * std::sqrt(1.0 / (std::sqrt(1.0 + x * x) + x));
  const double parasite = 0.5 * r.body_drag_ratio * r.air_density_kg_m3 * r.rotor_solidity *
                          r.disk_area_m2 * v2 * v;
  return blade + induced + parasite;
}

double residual_energy(double prev_j, double v, double dt, const RotorcraftParams& rotor) {
  return prev_j - propulsion_power(v, rotor) * dt;
}

double golden_section_minimize(const std::function<double(double)>& f, double lo, double hi,
                               double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

namespace {
constexpr double kSpeedTolerance = 1e-3;
}

double min_power_speed(const RotorcraftParams& rotor, double v_upper) {
  return golden_section_minimize([&](double v) { return propulsion_power(v, rotor); }, 0.0,
                                 v_upper, kSpeedTolerance);
}

double max_range_speed(const RotorcraftParams& rotor, double v_upper) {
  return golden_section_minimize([&](double v) { return propulsion_power(v, rotor) / v; },
                                 1e-6, v_upper, kSpeedTolerance);
}

EnergyModel::EnergyModel(const RotorcraftParams& rotor, double max_speed_mps)
    : rotor_(rotor),
      v_min_power_(uavsec::min_power_speed(rotor, 2.0 * max_speed_mps)),
      v_max_range_(uavsec::max_range_speed(rotor, 2.0 * max_speed_mps)),
      power_at_max_range_(propulsion_power(v_max_range_, rotor)) {}

double EnergyModel::adaptive_threshold(Vec2 pos, Vec2 endpoint, double e0_j) const {
  return energy_per_meter() * distance(pos, endpoint) + e0_j;
}

}  // namespace uavsec
