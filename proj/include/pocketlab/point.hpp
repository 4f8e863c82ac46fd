#pragma once

#include <array>
#include <cmath>

namespace pocketlab {

inline constexpr int kMaxDim = 2;

// A point or displacement on the unit torus. One-dimensional geometries use
// the first coordinate and keep the second at zero.
using Point = std::array<double, kMaxDim>;

inline Point operator+(const Point& a, const Point& b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Point operator-(const Point& a, const Point& b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Point operator*(double s, const Point& a) { return {s * a[0], s * a[1]}; }

inline double dot(const Point& a, const Point& b) { return a[0] * b[0] + a[1] * b[1]; }
inline double norm(const Point& a) { return std::sqrt(a[0] * a[0] + a[1] * a[1]); }

// Minimum-image reduction of a coordinate difference to [-1/2, 1/2].
inline double wrap_delta(double d) {
  if (d > 0.5) return d <= 1.5 ? d - 1.0 : d - std::round(d);
  if (d < -0.5) return d >= -1.5 ? d + 1.0 : d - std::round(d);
  return d;
}

// Reduction of a coordinate to [0, 1).
inline double wrap_unit(double x) {
  double w = x - std::floor(x);
  return w >= 1.0 ? 0.0 : w;
}

inline Point wrap_point(const Point& p) { return {wrap_unit(p[0]), wrap_unit(p[1])}; }

// Shortest displacement from `from` to `to` on the torus.
inline Point torus_displacement(const Point& from, const Point& to) {
  return {wrap_delta(to[0] - from[0]), wrap_delta(to[1] - from[1])};
}

inline double torus_distance(const Point& a, const Point& b) { return norm(torus_displacement(a, b)); }

}  // namespace pocketlab
