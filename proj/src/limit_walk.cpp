#include "pocketlab/limit_walk.hpp"

#include <algorithm>
#include <cmath>

#include "pocketlab/errors.hpp"
#include "pocketlab/parallel.hpp"

namespace pocketlab {

QuotientPoint quotient_map(const Geometry& geometry, const Point& x) {
  for (int k = 0; k < geometry.pocket_count(); ++k)
    if (geometry.signed_distance(k, x) <= 1e-12) return QuotientPoint::collapsed(k);
  return QuotientPoint::free(wrap_point(x));
}

std::string to_string(SkeletonEventType type) {
  switch (type) {
    case SkeletonEventType::Move: return "move";
    case SkeletonEventType::EnterPocket: return "enter_pocket";
    case SkeletonEventType::Hold: return "hold";
    case SkeletonEventType::Reenter: return "reenter";
    case SkeletonEventType::HitTarget: return "hit_F";
  }
  return "unknown";
}

double pocket_holding_time(const Geometry& geometry, int k, double delta) {
  if (delta == 0.0) return 0.0;
  geometry.check_delta(delta);
  const Pocket& p = geometry.pocket(k);
  return delta * p.volume() / p.boundary_measure();
}

Point reentry_point(const Geometry& geometry, int k, double delta, RandomStream& rng) {
  geometry.check_delta(delta);
  Point p = geometry.boundary_sample(k, rng.uniform());
  Point n = geometry.unit_normal(k, p);
  return wrap_point(p - delta * n);
}

SkeletonPath sample_path(const Geometry& geometry, const QuotientPoint& x0, double T, double delta,
                         const SkeletonConfig& config, RandomStream& rng, bool stop_at_target,
                         bool record_events) {
  if (!(T > 0.0)) throw DomainError("skeleton horizon must be positive");
  geometry.check_delta(delta);
  if (!(config.holding_scale >= 0.0)) throw ConfigError("holding_scale must be nonnegative");
  if (stop_at_target && !geometry.target()) throw ConfigError("geometry has no target region");

  PathEngine engine(geometry, nullptr, config.steps);
  PathOptions opts;
  for (int k = 0; k < geometry.pocket_count(); ++k) opts.stop.push_back({k, 0.0});
  if (stop_at_target) opts.stop.push_back({-1, 0.0});

  SkeletonPath path;
  path.delta = delta;
  path.horizon = T;
  auto record = [&](double t, SkeletonEventType type, const QuotientPoint& q, double duration = 0.0) {
    if (record_events) path.events.push_back({t, type, q, duration});
  };

  QuotientPoint cur = x0.is_collapsed() ? x0 : quotient_map(geometry, x0.x);
  double t = 0.0;
  if (!cur.is_collapsed()) {
    if (stop_at_target && geometry.in_target(cur.x)) {
      record(0.0, SkeletonEventType::HitTarget, cur);
      path.hit_target = true;
      path.exit = cur.x;
      return path;
    }
    record(0.0, SkeletonEventType::Move, cur);
  }

  for (;;) {
    if (cur.is_collapsed()) {
      int k = cur.pocket;
      double h = config.holding_scale * pocket_holding_time(geometry, k, delta);
      ++path.visits;
      record(t, SkeletonEventType::Hold, cur, h);
      if (t + h >= T) {
        path.collapsed_time += T - t;
        path.end_time = T;
        path.exit = geometry.boundary_sample(k, 0.0);
        return path;
      }
      t += h;
      path.collapsed_time += h;
      cur = QuotientPoint::free(reentry_point(geometry, k, delta, rng));
      record(t, SkeletonEventType::Reenter, cur);
    } else {
      opts.horizon = T - t;
      auto seg = engine.run(cur.x, opts, rng);
      if (seg.status == PathStatus::Timeout) {
        path.end_time = T;
        path.exit = seg.exit;
        record(T, SkeletonEventType::Move, QuotientPoint::free(seg.exit));
        return path;
      }
      t += seg.tau;
      const Surface& s = opts.stop[static_cast<std::size_t>(seg.hit_surface)];
      if (s.pocket < 0) {
        path.hit_target = true;
        path.end_time = t;
        path.exit = seg.exit;
        record(t, SkeletonEventType::HitTarget, QuotientPoint::free(seg.exit));
        return path;
      }
      record(t, SkeletonEventType::EnterPocket, QuotientPoint::free(seg.exit));
      cur = QuotientPoint::collapsed(s.pocket);
    }
  }
}

std::vector<SkeletonPath> skeleton_hits(const Geometry& geometry, const QuotientPoint& x0, double delta,
                                        const SkeletonConfig& config, int n_paths) {
  config.steps.validate();
  std::vector<SkeletonPath> out(static_cast<std::size_t>(std::max(n_paths, 0)));
  parallel_for(n_paths, config.steps.workers, [&](int i) {
    RandomStream rng(stream_key(config.steps.seed, static_cast<std::uint64_t>(i)));
    out[static_cast<std::size_t>(i)] =
        sample_path(geometry, x0, config.steps.t_max, delta, config, rng, true, false);
  });
  return out;
}

ExitTimeEstimate hitting_time_F(const Geometry& geometry, const QuotientPoint& x0, double delta,
                                const SkeletonConfig& config, int n_paths) {
  if (n_paths < 100) throw ConfigError("at least 100 paths are required");
  auto paths = skeleton_hits(geometry, x0, delta, config, n_paths);
  std::vector<TrajectoryOutcome> outcomes(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) {
    outcomes[i].tau = paths[i].end_time;
    outcomes[i].status = paths[i].hit_target ? PathStatus::Hit : PathStatus::Timeout;
  }
  return summarize_exit_times(outcomes);
}

}  // namespace pocketlab
