#pragma once

#include <Eigen/Core>
#include <cmath>

namespace upright {

using Vec2 = Eigen::Vector2d;

inline Eigen::Matrix2d rot(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix2d m;
  m << c, -s, s, c;
  return m;
}

// 90-degree CCW rotation: d/da [R(a) p] = perp(R(a) p)
inline Vec2 perp(const Vec2& v) { return Vec2(-v.y(), v.x()); }

inline double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a < 0) a += 2.0 * M_PI;
  return a - M_PI;
}

}  // namespace upright
