#pragma once

// delta-skeleton of the limiting process Y on the quotient space U', where
// each pocket closure is collapsed to a single point d_k. Away from the
// pockets Y is a Brownian motion. On reaching the boundary of D_k the walk
// holds at d_k for a fixed time, then re-emerges on the outer shell surface
// at a point drawn from the normalised surface measure.

#include <cstdint>
#include <vector>

#include "pocketlab/geometry.hpp"
#include "pocketlab/random.hpp"
#include "pocketlab/sde.hpp"

namespace pocketlab {

struct QuotientPoint {
  int pocket = -1;  // -1 for a free point
  Point x{};

  static QuotientPoint free(const Point& p) { return {-1, p}; }
  static QuotientPoint collapsed(int k) { return {k, Point{}}; }
  bool is_collapsed() const { return pocket >= 0; }

  friend bool operator==(const QuotientPoint&, const QuotientPoint&) = default;
};

// The quotient map: points of a pocket closure go to its collapsed point.
QuotientPoint quotient_map(const Geometry& geometry, const Point& x);

// EnterPocket carries the boundary point where a Brownian segment ended and
// is followed at the same time by a Hold at the collapsed point.
enum class SkeletonEventType { Move, EnterPocket, Hold, Reenter, HitTarget };

std::string to_string(SkeletonEventType type);

struct SkeletonEvent {
  double time = 0.0;
  SkeletonEventType type = SkeletonEventType::Move;
  QuotientPoint where;
  // Holding duration for Hold events.
  double duration = 0.0;
};

struct SkeletonPath {
  std::vector<SkeletonEvent> events;  // empty unless recording was requested
  double delta = 0.0;
  double horizon = 0.0;
  // Time at which the walk stopped: the hitting time of the closed target,
  // or the horizon.
  double end_time = 0.0;
  bool hit_target = false;
  Point exit{};
  int visits = 0;
  // Total time spent at collapsed points, clipped to the horizon.
  double collapsed_time = 0.0;
};

struct SkeletonConfig {
  // Brownian segments use dt0, eta_diff, step_fraction, t_max, seed and
  // workers; eps and eta_drift are unused.
  SdeConfig steps;
  // Multiplier on the holding time per visit. 1 gives delta Vol / nu.
  double holding_scale = 1.0;
};

// delta * Vol(D_k) / nu(boundary of D_k).
double pocket_holding_time(const Geometry& geometry, int k, double delta);

// boundary_sample pushed a distance delta out of the pocket.
Point reentry_point(const Geometry& geometry, int k, double delta, RandomStream& rng);

// Runs the skeleton from x0 up to time T. With stop_at_target the walk ends
// on first entry to the closed target F.
SkeletonPath sample_path(const Geometry& geometry, const QuotientPoint& x0, double T, double delta,
                         const SkeletonConfig& config, RandomStream& rng, bool stop_at_target = false,
                         bool record_events = true);

// Independent skeleton paths stopped at F (or at t_max), path i using
// stream_key(seed, i). Events are not recorded.
std::vector<SkeletonPath> skeleton_hits(const Geometry& geometry, const QuotientPoint& x0, double delta,
                                        const SkeletonConfig& config, int n_paths);

// Mean hitting time of the closed target. Throws TimeoutDominated when more
// than 1% of the paths reach t_max.
ExitTimeEstimate hitting_time_F(const Geometry& geometry, const QuotientPoint& x0, double delta,
                                const SkeletonConfig& config, int n_paths);

}  // namespace pocketlab
