#pragma once

#include <cmath>

namespace uavsec {

/// Horizontal position or displacement in meters.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr bool operator==(const Vec2&) const = default;

  double norm() const { return std::hypot(x, y); }
  constexpr double squared_norm() const { return x * x + y * y; }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

/// Axis-aligned rectangle.
struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  constexpr double width() const { return x_max - x_min; }
  constexpr double height() const { return y_max - y_min; }
  constexpr bool contains(Vec2 p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
};

/// Start and end waypoint of a flight.
struct FlightPath {
  Vec2 start;
  Vec2 end;
};

}  // namespace uavsec
