#pragma once

#include <cmath>
#include <numbers>

namespace shuttle {

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// Planar rigid transform (x, y, theta) used as the SLAM state.
struct PoseSE2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(theta); }
  friend bool operator==(const PoseSE2&, const PoseSE2&) = default;
};

/// Maps a sensor-frame scan end point into the world frame: R(theta) * s + t.
inline Vec2 transform_endpoint(const PoseSE2& pose, const Vec2& s) {
  const double c = std::cos(pose.theta);
  const double sn = std::sin(pose.theta);
  return {c * s.x - sn * s.y + pose.x, sn * s.x + c * s.y + pose.y};
}

}  // namespace shuttle
