#pragma once

#include <algorithm>
#include <cmath>

#include "spdcas/grid.hpp"

namespace spdcas {

/// World-frame aircraft state: x east, y north, z up (ft); heading clockwise
/// from north (rad); vertical rate in ft/s.
struct AircraftState {
  double x = 0.0, y = 0.0, z = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double vertical_rate = 0.0;
};

/// Controls held over one step; turn rate is clockwise rad/s.
struct AircraftControls {
  double accel = 0.0;
  double turn_rate = 0.0;
  double vertical_rate = 0.0;  // ft/s
};

/// Midpoint-heading integration. Stepping with -dt exactly inverts a +dt step
/// when speed stays inside the limits, which the encounter generators rely on.
inline AircraftState advance(const AircraftState& s, const AircraftControls& u, double dt, double speed_min,
                             double speed_max) {
  AircraftState n = s;
  n.speed = std::clamp(s.speed + u.accel * dt, speed_min, speed_max);
  const double mid = s.heading + 0.5 * u.turn_rate * dt;
  const double dist = 0.5 * (s.speed + n.speed) * dt;
  n.x = s.x + dist * std::sin(mid);
  n.y = s.y + dist * std::cos(mid);
  n.heading = s.heading + u.turn_rate * dt;
  n.vertical_rate = u.vertical_rate;
  n.z = s.z + u.vertical_rate * dt;
  return n;
}

inline double horizontal_separation(const AircraftState& a, const AircraftState& b) {
  return std::hypot(b.x - a.x, b.y - a.y);
}

inline double vertical_separation(const AircraftState& a, const AircraftState& b) { return std::abs(b.z - a.z); }

/// Heading of `b` relative to `a`, clockwise, in [0, 2pi).
inline double relative_heading(double heading_a, double heading_b) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double d = std::fmod(heading_b - heading_a, two_pi);
  if (d < 0.0) d += two_pi;
  if (d >= two_pi) d -= two_pi;
  return d;
}

}  // namespace spdcas
