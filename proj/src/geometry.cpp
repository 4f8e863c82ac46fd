#include "pocketlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pocketlab/errors.hpp"

namespace pocketlab {

namespace {

constexpr double kBoundaryTol = 1e-12;
constexpr double kNormalTol = 1e-9;

bool on_image_cut(double d) { return std::abs(std::abs(d) - 0.5) < 1e-15; }

}  // namespace

Pocket Pocket::interval(double left, double length) {
  Pocket p;
  p.dim = 1;
  p.radius = 0.5 * length;
  p.center = {wrap_unit(left + p.radius), 0.0};
  return p;
}

Pocket Pocket::disk(double cx, double cy, double radius) {
  Pocket p;
  p.dim = 2;
  p.radius = radius;
  p.center = {wrap_unit(cx), wrap_unit(cy)};
  return p;
}

double Pocket::volume() const {
  return dim == 1 ? 2.0 * radius : std::numbers::pi * radius * radius;
}

double Pocket::boundary_measure() const {
  return dim == 1 ? 2.0 : 2.0 * std::numbers::pi * radius;
}

std::string to_string(RegionKind kind) {
  switch (kind) {
    case RegionKind::DeepU: return "deep_u";
    case RegionKind::Shell: return "shell";
    case RegionKind::Boundary: return "boundary";
    case RegionKind::Pocket: return "pocket";
    case RegionKind::Inner: return "inner";
    case RegionKind::Target: return "target";
  }
  return "unknown";
}

double ball_signed_distance(const Pocket& ball, const Point& x) {
  return torus_distance(ball.center, x) - ball.radius;
}

Geometry::Geometry(int dimension, std::vector<Pocket> pockets, std::optional<Pocket> target)
    : dim_(dimension), pockets_(std::move(pockets)), target_(std::move(target)) {
  if (dim_ != 1 && dim_ != 2) throw GeometryError("dimension must be 1 or 2");

  std::vector<const Pocket*> regions;
  for (const auto& p : pockets_) regions.push_back(&p);
  if (target_) regions.push_back(&*target_);

  double min_radius = std::numeric_limits<double>::infinity();
  double max_radius = 0.0;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const Pocket& p = *regions[i];
    if (p.dim != dim_) throw GeometryError("region dimension does not match geometry");
    if (!(p.radius > 0.0)) throw GeometryError("region must have positive size");
    if (p.radius >= 0.5) throw GeometryError("region does not fit on the unit torus");
    if (i < pockets_.size()) min_radius = std::min(min_radius, p.radius);
    max_radius = std::max(max_radius, p.radius);
  }

  min_gap_ = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < regions.size(); ++i) {
    for (std::size_t j = i + 1; j < regions.size(); ++j) {
      double gap = torus_distance(regions[i]->center, regions[j]->center) - regions[i]->radius -
                   regions[j]->radius;
      if (!(gap > 0.0)) {
        std::string a = i < pockets_.size() ? "pocket " + std::to_string(i) : "target";
        std::string b = j < pockets_.size() ? "pocket " + std::to_string(j) : "target";
        throw GeometryError(a + " and " + b + " closures intersect");
      }
      min_gap_ = std::min(min_gap_, gap);
    }
  }

  max_delta_ = std::min({0.5 * min_gap_, 0.5 * min_radius, 0.5 - max_radius});
}

double Geometry::signed_distance(int k, const Point& x) const {
  return ball_signed_distance(pocket(k), x);
}

double Geometry::target_signed_distance(const Point& x) const {
  if (!target_) throw GeometryError("geometry has no target region");
  return ball_signed_distance(*target_, x);
}

bool Geometry::in_target(const Point& x) const {
  return target_ && ball_signed_distance(*target_, x) <= 0.0;
}

NearestPocket Geometry::nearest_pocket(const Point& x) const {
  NearestPocket best;
  double best_key = std::numeric_limits<double>::infinity();
  for (int k = 0; k < pocket_count(); ++k) {
    double sd = signed_distance(k, x);
    // Inside a pocket wins outright; otherwise the closest boundary.
    double key = sd < 0.0 ? -1.0 : sd;
    if (key < best_key) {
      best_key = key;
      best = {k, std::abs(sd), sd < 0.0};
    }
  }
  return best;
}

Point Geometry::project(int k, const Point& x) const {
  const Pocket& p = pocket(k);
  Point d = torus_displacement(p.center, x);
  double rho = norm(d);
  if (rho < 1e-14) throw AmbiguousProjection("projection from the pocket centre is not unique");
  if (on_image_cut(d[0]) || (dim_ == 2 && on_image_cut(d[1])))
    throw AmbiguousProjection("point is equidistant from two boundary sheets");
  return wrap_point(p.center + (p.radius / rho) * d);
}

Point Geometry::project(const Point& x) const {
  auto np = nearest_pocket(x);
  if (np.pocket < 0) throw GeometryError("geometry has no pockets");
  return project(np.pocket, x);
}

Point Geometry::unit_normal(int k, const Point& p) const {
  const Pocket& pk = pocket(k);
  Point d = torus_displacement(pk.center, p);
  double rho = norm(d);
  if (std::abs(rho - pk.radius) > kNormalTol) throw NotOnBoundary("point is not on the pocket boundary");
  return (-1.0 / rho) * d;
}

Point Geometry::boundary_sample(int k, double u) const {
  const Pocket& p = pocket(k);
  if (dim_ == 1) {
    double side = u < 0.5 ? 1.0 : -1.0;
    return {wrap_unit(p.center[0] + side * p.radius), 0.0};
  }
  double angle = 2.0 * std::numbers::pi * u;
  return wrap_point({p.center[0] + p.radius * std::cos(angle), p.center[1] + p.radius * std::sin(angle)});
}

double Geometry::boundary_parameter(int k, const Point& x) const {
  Point d = torus_displacement(pocket(k).center, x);
  if (dim_ == 1) return d[0] >= 0.0 ? 0.0 : 0.5;
  double t = std::atan2(d[1], d[0]) / (2.0 * std::numbers::pi);
  return wrap_unit(t);
}

void Geometry::check_delta(double delta) const {
  if (!(delta > 0.0) || !(delta < max_delta_))
    throw DeltaTooLarge("delta too large: need 0 < delta < " + std::to_string(max_delta_));
}

RegionTag Geometry::classify(const Point& x, double delta) const {
  check_delta(delta);
  if (in_target(x)) return {RegionKind::Target, -1};
  auto np = nearest_pocket(x);
  if (np.pocket < 0) return {RegionKind::DeepU, -1};
  if (np.distance <= kBoundaryTol) return {RegionKind::Boundary, np.pocket};
  if (np.inside) return {np.distance > delta ? RegionKind::Inner : RegionKind::Pocket, np.pocket};
  if (np.distance < delta) return {RegionKind::Shell, np.pocket};
  return {RegionKind::DeepU, -1};
}

}  // namespace pocketlab
