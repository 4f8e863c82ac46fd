#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pocketlab/point.hpp"

namespace pocketlab {

// A ball on the torus: an interval [c - r, c + r] in one dimension, a disk in
// two. Pockets and the target region F share this shape.
struct Pocket {
  int dim = 2;
  Point center{};
  double radius = 0.0;

  static Pocket interval(double left, double length);
  static Pocket disk(double cx, double cy, double radius);

  // d-dimensional volume.
  double volume() const;
  // Total (d-1)-dimensional boundary measure; the counting measure (= 2) in 1D.
  double boundary_measure() const;
  // Left endpoint and length, for intervals.
  double left() const { return center[0] - radius; }
  double length() const { return 2.0 * radius; }
};

enum class RegionKind { DeepU, Shell, Boundary, Pocket, Inner, Target };

inline constexpr int kRegionKindCount = 6;

struct RegionTag {
  RegionKind kind = RegionKind::DeepU;
  int pocket = -1;

  friend bool operator==(const RegionTag&, const RegionTag&) = default;
};

std::string to_string(RegionKind kind);

struct NearestPocket {
  int pocket = -1;
  double distance = 0.0;  // distance to the pocket's boundary
  bool inside = false;
};

// Pockets D_1..D_n and an optional target F on the unit torus T^d, d in {1, 2}.
// Immutable after construction; construction rejects overlapping closures.
class Geometry {
 public:
  Geometry(int dimension, std::vector<Pocket> pockets, std::optional<Pocket> target = std::nullopt);

  int dimension() const { return dim_; }
  std::span<const Pocket> pockets() const { return pockets_; }
  const Pocket& pocket(int k) const { return pockets_.at(static_cast<std::size_t>(k)); }
  int pocket_count() const { return static_cast<int>(pockets_.size()); }
  const std::optional<Pocket>& target() const { return target_; }

  // Smallest gap between the closures of any two regions (pockets and F).
  double min_gap() const { return min_gap_; }
  // Shell widths must satisfy delta < max_delta() = min(gap/2, min radius/2).
  double max_delta() const { return max_delta_; }

  // Signed distance to D_k (negative inside). Exact for balls.
  double signed_distance(int k, const Point& x) const;
  // Signed distance to F (negative inside). Requires a target.
  double target_signed_distance(const Point& x) const;
  bool in_target(const Point& x) const;

  NearestPocket nearest_pocket(const Point& x) const;

  // theta(x): the nearest point of the boundary of D_k.
  Point project(int k, const Point& x) const;
  Point project(const Point& x) const;

  // Unit normal at p on the boundary of D_k, pointing from U into the pocket.
  Point unit_normal(int k, const Point& p) const;

  // Maps u in [0, 1) to the boundary of D_k so that uniform u gives the
  // normalised surface measure: arc length in 2D, a fair choice of endpoint
  // in 1D (u < 1/2 selects the right endpoint).
  Point boundary_sample(int k, double u) const;
  // Inverse of boundary_sample on the boundary, in [0, 1).
  double boundary_parameter(int k, const Point& p) const;

  RegionTag classify(const Point& x, double delta) const;
  // Throws DeltaTooLarge unless 0 < delta < max_delta().
  void check_delta(double delta) const;

 private:
  int dim_;
  std::vector<Pocket> pockets_;
  std::optional<Pocket> target_;
  double min_gap_ = 0.0;
  double max_delta_ = 0.0;
};

// Signed distance from x to a ball (negative inside).
double ball_signed_distance(const Pocket& ball, const Point& x);

}  // namespace pocketlab
