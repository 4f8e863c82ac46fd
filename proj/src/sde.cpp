#include "pocketlab/sde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pocketlab/errors.hpp"
#include "pocketlab/parallel.hpp"
#include "pocketlab/passage.hpp"

namespace pocketlab {

namespace {

constexpr double kOnSurfaceTol = 1e-12;
constexpr double kBoundaryTol = 1e-12;

// Distances from the current point to every pocket and to F.
struct Probe {
  std::vector<Point> disp;  // pocket centre -> x
  std::vector<double> rho;
  std::vector<double> sd;
  double target_sd = std::numeric_limits<double>::infinity();
};

void probe(const Geometry& geo, const Point& x, Probe& p) {
  auto pockets = geo.pockets();
  for (std::size_t k = 0; k < pockets.size(); ++k) {
    p.disp[k] = torus_displacement(pockets[k].center, x);
    p.rho[k] = norm(p.disp[k]);
    p.sd[k] = p.rho[k] - pockets[k].radius;
  }
  if (geo.target()) p.target_sd = ball_signed_distance(*geo.target(), x);
}

double surface_value(const Surface& s, const Probe& p) {
  double sd = s.pocket < 0 ? p.target_sd : p.sd[static_cast<std::size_t>(s.pocket)];
  return sd - s.offset;
}

Point snap(const Geometry& geo, const Surface& s, const Point& x) {
  const Pocket& ball = s.pocket < 0 ? *geo.target() : geo.pocket(s.pocket);
  Point d = torus_displacement(ball.center, x);
  double rho = norm(d);
  if (rho == 0.0) return wrap_point(x);
  return wrap_point(ball.center + ((ball.radius + s.offset) / rho) * d);
}

// Same partition as Geometry::classify, computed from a probe.
RegionKind region_of(const Probe& p, double delta) {
  if (p.target_sd <= 0.0) return RegionKind::Target;
  std::size_t best = p.sd.size();
  double best_key = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < p.sd.size(); ++k) {
    double key = p.sd[k] < 0.0 ? -1.0 : p.sd[k];
    if (key < best_key) {
      best_key = key;
      best = k;
    }
  }
  if (best == p.sd.size()) return RegionKind::DeepU;
  double sd = p.sd[best];
  double h = std::abs(sd);
  if (h <= kBoundaryTol) return RegionKind::Boundary;
  if (sd < 0.0) return h > delta ? RegionKind::Inner : RegionKind::Pocket;
  return h < delta ? RegionKind::Shell : RegionKind::DeepU;
}

void check_surface(const Geometry& geo, const Surface& s) {
  if (s.pocket < 0) {
    if (!geo.target()) throw ConfigError("target surface requested but the geometry has no target");
    if (s.offset != 0.0) throw ConfigError("offset surfaces of the target are not supported");
    return;
  }
  if (s.pocket >= geo.pocket_count()) throw ConfigError("target pocket index out of range");
  if (s.offset != 0.0 && !(std::abs(s.offset) < geo.max_delta()))
    throw ConfigError("shell target offset must satisfy 0 < delta < max_delta");
}

}  // namespace

namespace detail {

// Radial chart of one pocket. Inside the pocket w(r) = int_0^r sigma^{-1/2},
// so the radial motion has unit diffusion in w. Outside it continues as
// w_R + omega asinh((r - R) / omega), which pairs with the step rule
// dt = kappa^2 (omega^2 + (r - R)^2). The inner map is a cubic Hermite table.
struct PocketChart {
  int pocket = 0;
  int dim = 2;
  Point center{};
  double R = 0.0;
  double c = 0.0;  // amplitude / eps
  double omega = 0.0;
  double zone = 0.0;  // the chart is used while r - R < zone
  double core = 0.0;  // 2D: Cartesian proposals for r < core
  double kappa = 0.5;
  double dt0 = 1e-3;
  int n = 0;
  double h = 0.0;
  double w_R = 0.0;
  std::vector<double> w, dw;
  std::shared_ptr<const PassageLaw> passage;

  double sigma(double r) const {
    if (r >= R) return 1.0;
    double q = 1.0 - r * r / (R * R);
    return 1.0 + c * q * q;
  }
  double dsigma(double r) const {
    if (r >= R) return 0.0;
    double q = 1.0 - r * r / (R * R);
    return -4.0 * c * q * r / (R * R);
  }

  double map(double r) const {
    if (r >= R) return w_R + omega * std::asinh((r - R) / omega);
    double s = r / h;
    int i = std::min(static_cast<int>(s), n - 1);
    double t = s - i, t2 = t * t, t3 = t2 * t;
    auto iu = static_cast<std::size_t>(i);
    return (2 * t3 - 3 * t2 + 1) * w[iu] + (t3 - 2 * t2 + t) * h * dw[iu] + (3 * t2 - 2 * t3) * w[iu + 1] +
           (t3 - t2) * h * dw[iu + 1];
  }
  double slope(double r) const {
    if (r >= R) {
      double z = (r - R) / omega;
      return 1.0 / std::sqrt(1.0 + z * z);
    }
    double s = r / h;
    int i = std::min(static_cast<int>(s), n - 1);
    double t = s - i, t2 = t * t;
    auto iu = static_cast<std::size_t>(i);
    return (6 * t2 - 6 * t) * w[iu] / h + (3 * t2 - 4 * t + 1) * dw[iu] + (6 * t - 6 * t2) * w[iu + 1] / h +
           (3 * t2 - 2 * t) * dw[iu + 1];
  }
  double inverse(double v) const {
    if (v >= w_R) return R + omega * std::sinh((v - w_R) / omega);
    if (v <= 0.0) return 0.0;
    auto it = std::upper_bound(w.begin(), w.end(), v);
    int i = std::clamp(static_cast<int>(it - w.begin()) - 1, 0, n - 1);
    auto iu = static_cast<std::size_t>(i);
    double lo = 0.0, hi = 1.0;
    double t = (v - w[iu]) / (w[iu + 1] - w[iu]);
    for (int iter = 0; iter < 40; ++iter) {
      double r = (i + t) * h;
      double f = map(r) - v;
      if (f > 0.0) hi = t; else lo = t;
      double next = t - f / (slope(r) * h);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - t) < 1e-13) {
        t = next;
        break;
      }
      t = next;
    }
    return (i + t) * h;
  }

  // Signed versions for 1D, where r is the offset from the centre.
  double map_signed(double r) const { return r < 0.0 ? -map(-r) : map(r); }
  double inverse_signed(double v) const { return v < 0.0 ? -inverse(-v) : inverse(v); }

  // Ito drift of w(r) for the radial part of the process.
  double drift(double r) const {
    double a = std::abs(r);
    double mu;
    if (a < R) {
      double s = sigma(a);
      mu = dsigma(a) / (4.0 * std::sqrt(s));
      if (dim == 2) mu += std::sqrt(s) / (2.0 * a);
    } else {
      double z = (a - R) / omega;
      double g = 1.0 / std::sqrt(1.0 + z * z);
      mu = -0.5 * z * g * g * g / omega;
      if (dim == 2) mu += g / (2.0 * a);
    }
    return r < 0.0 ? -mu : mu;
  }

  double dt(double r) const {
    double a = std::abs(r);
    double len = a < R ? omega : std::hypot(omega, a - R);
    return std::min(dt0, kappa * kappa * len * len);
  }
};

}  // namespace detail

namespace {

using detail::PocketChart;

PocketChart make_chart(const Geometry& geo, int k, double amp, const SdeConfig& cfg) {
  const Pocket& p = geo.pocket(k);
  PocketChart ch;
  ch.pocket = k;
  ch.dim = geo.dimension();
  ch.center = p.center;
  ch.R = p.radius;
  ch.c = amp / cfg.eps;
  // Twice the width of the layer where a/eps < 1.
  ch.omega = ch.R / std::sqrt(ch.c);
  ch.kappa = cfg.step_fraction;
  ch.dt0 = cfg.dt0;
  ch.core = ch.dim == 2 ? 0.5 * ch.R : 0.0;
  ch.n = std::max(64, static_cast<int>(std::ceil(8.0 * ch.R / ch.omega)));
  ch.h = ch.R / ch.n;
  ch.w.assign(static_cast<std::size_t>(ch.n) + 1, 0.0);
  ch.dw.assign(static_cast<std::size_t>(ch.n) + 1, 0.0);
  static constexpr double gx[5] = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                   0.9061798459386640};
  static constexpr double gw[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                   0.2369268850561891, 0.2369268850561891};
  for (int i = 0; i <= ch.n; ++i) {
    auto iu = static_cast<std::size_t>(i);
    ch.dw[iu] = 1.0 / std::sqrt(ch.sigma(i * ch.h));
    if (i == 0) continue;
    double mid = (i - 0.5) * ch.h, half = 0.5 * ch.h, sum = 0.0;
    for (int q = 0; q < 5; ++q) sum += gw[q] / std::sqrt(ch.sigma(mid + half * gx[q]));
    ch.w[iu] = ch.w[iu - 1] + half * sum;
  }
  ch.w_R = ch.w.back();
  double reach = cfg.dt0 / (ch.kappa * ch.kappa) - ch.omega * ch.omega;
  ch.zone = reach > 0.0 ? std::sqrt(reach) : 0.0;
  ch.zone = std::min({ch.zone, 0.5 * geo.min_gap(), 0.45 - ch.R});
  double hp = cfg.passage_height;
  if (hp > 0.0 && hp < geo.min_gap() && ch.R + hp < 0.45)
    ch.passage = std::make_shared<const PassageLaw>(ch.dim, ch.R, ch.c, hp, 256);
  return ch;
}

constexpr double kLogTwoPi = 1.8378770664093453;

double log_normal(double x, double mean, double var) {
  double d = x - mean;
  return -0.5 * (kLogTwoPi + std::log(var)) - 0.5 * d * d / var;
}

// log(I0(z) exp(-z)) for z >= 0.
double log_i0e(double z) {
  if (z < 500.0) return std::log(std::cyl_bessel_i(0.0, z)) - z;
  double r = 1.0 / z;
  return -0.5 * std::log(2.0 * std::numbers::pi * z) + std::log1p(r * (0.125 + r * (9.0 / 128.0 + r * 225.0 / 3072.0)));
}

// Density of |Z| for Z ~ N(m, var I) in the plane with |m| = m.
double log_rice(double r, double m, double var) {
  if (r <= 0.0) return -std::numeric_limits<double>::infinity();
  double d = r - m;
  return std::log(r / var) - 0.5 * d * d / var + log_i0e(r * m / var);
}

// Fraction of a step at which w passes `level`: interpolated on a sign change,
// one half when the Brownian bridge with variance var crosses, else 2.
double level_fraction(double wx, double wy, double level, double var, RandomStream& rng) {
  double a = wx - level, b = wy - level;
  if (a * b <= 0.0) return a == b ? 0.0 : a / (a - b);
  double p = std::exp(-2.0 * a * b / var);
  if (p > 1e-16 && rng.uniform() < p) return 0.5;
  return 2.0;
}

}  // namespace

void SdeConfig::validate() const {
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  if (!(dt0 > 0.0)) throw ConfigError("dt0 must be positive");
  if (!(eta_drift > 0.0) || !(eta_diff > 0.0)) throw ConfigError("eta_drift and eta_diff must be positive");
  if (!(step_fraction > 0.0) || step_fraction >= 1.0) throw ConfigError("step_fraction must lie in (0, 1)");
  if (!(passage_height >= 0.0)) throw ConfigError("passage_height must be non-negative");
  if (!(t_max > 0.0)) throw ConfigError("t_max must be positive");
  if (workers < 1) throw ConfigError("workers must be at least 1");
}

Surface Target::surface(const Geometry& geometry) const {
  Surface s;
  switch (kind) {
    case TargetKind::PocketBoundary: s = {pocket, 0.0}; break;
    case TargetKind::OuterShell: s = {pocket, delta}; break;
    case TargetKind::InnerShell: s = {pocket, -delta}; break;
    case TargetKind::TargetBoundary:
    case TargetKind::TargetClosure: s = {-1, 0.0}; break;
  }
  if ((kind == TargetKind::OuterShell || kind == TargetKind::InnerShell) && !(delta > 0.0))
    throw ConfigError("shell targets need delta > 0");
  if (kind != TargetKind::TargetBoundary && kind != TargetKind::TargetClosure && pocket < 0)
    throw ConfigError("pocket targets need a pocket index");
  check_surface(geometry, s);
  return s;
}

PathEngine::PathEngine(const Geometry& geometry, const DiffusivityField* field, const SdeConfig& config)
    : geometry_(geometry), field_(field), config_(config) {
  config_.validate();
  auto charts = std::make_shared<std::vector<PocketChart>>();
  chart_of_.assign(static_cast<std::size_t>(geometry.pocket_count()), -1);
  if (field_) {
    for (int k = 0; k < geometry.pocket_count(); ++k) {
      double amp = field_->amplitude(k);
      if (!(amp > 0.0)) continue;
      chart_of_[static_cast<std::size_t>(k)] = static_cast<int>(charts->size());
      charts->push_back(make_chart(geometry, k, amp, config_));
    }
  }
  charts_ = std::move(charts);
}

TrajectoryOutcome PathEngine::run(const Point& x0, const PathOptions& options, RandomStream& rng) const {
  const Geometry& geo = geometry_;
  const auto pockets = geo.pockets();
  const std::size_t np = pockets.size();
  const int dim = geo.dimension();
  const std::vector<PocketChart>& charts = *charts_;
  const double kappa = config_.step_fraction;
  for (const auto& s : options.stop) check_surface(geo, s);

  TrajectoryOutcome out;
  Point x = wrap_point(x0);
  if (dim == 1) x[1] = 0.0;

  Probe cur{std::vector<Point>(np), std::vector<double>(np), std::vector<double>(np)};
  Probe nxt = cur;
  probe(geo, x, cur);

  const std::size_t ns = options.stop.size();
  std::vector<double> phi(ns), phi_next(ns);
  std::vector<int> side(ns);
  for (std::size_t j = 0; j < ns; ++j) {
    phi[j] = surface_value(options.stop[j], cur);
    if (std::abs(phi[j]) <= kOnSurfaceTol || (options.stop_in_target && cur.target_sd <= 0.0)) {
      out.tau = 0.0;
      out.exit = x;
      out.hit_surface = static_cast<int>(j);
      return out;
    }
    side[j] = phi[j] > 0.0 ? 1 : -1;
  }

  const bool count_excursions = options.excursion_delta > 0.0;
  const double delta_e = options.excursion_delta;
  const bool track_regions = options.region_delta > 0.0;
  // Excursion state: -1 while waiting to touch a pocket closure, otherwise
  // the pocket whose shell edge must be reached before the next count.
  int armed = -1;
  auto update_excursions = [&](const Probe& p) {
    if (armed < 0) {
      for (std::size_t k = 0; k < np; ++k) {
        if (p.sd[k] <= 0.0) {
          ++out.excursions;
          armed = static_cast<int>(k);
          return;
        }
      }
    } else if (p.sd[static_cast<std::size_t>(armed)] - delta_e >= 0.0) {
      armed = -1;
    }
  };
  if (count_excursions) update_excursions(cur);

  struct Where {
    int chart = -1;    // chart whose zone contains the point
    double r = 0.0;    // offset from that chart's centre (signed in 1D)
    double w = 0.0;
    double dt = 0.0;
    bool open = true;  // off-chart step not shortened by a surface
  };
  auto offset = [&](const Probe& p, const PocketChart& ch) {
    auto k = static_cast<std::size_t>(ch.pocket);
    return dim == 2 ? p.rho[k] : p.disp[k][0];
  };
  auto locate = [&](const Probe& p, const std::vector<double>& ph) {
    Where wh;
    for (std::size_t j = 0; j < charts.size(); ++j) {
      const PocketChart& ch = charts[j];
      if (p.sd[static_cast<std::size_t>(ch.pocket)] < ch.zone) {
        wh.chart = static_cast<int>(j);
        wh.r = offset(p, ch);
        wh.w = ch.map_signed(wh.r);
        wh.dt = ch.dt(wh.r);
        return wh;
      }
    }
    double ds = std::numeric_limits<double>::infinity();
    for (double v : ph) ds = std::min(ds, std::abs(v));
    if (count_excursions)
      for (std::size_t k = 0; k < np; ++k) ds = std::min(ds, std::abs(p.sd[k] - delta_e));
    double len = std::max(config_.eta_diff, kappa * ds);
    double dt = std::min(config_.dt0, len * len);
    for (const PocketChart& ch : charts) {
      double d = p.sd[static_cast<std::size_t>(ch.pocket)];
      dt = std::min(dt, kappa * kappa * (ch.omega * ch.omega + d * d));
    }
    wh.dt = dt;
    wh.open = dt == config_.dt0;
    return wh;
  };
  // Per-step variance of the chart coordinate at a chart point.
  auto w_variance = [&](const PocketChart& ch, double r, double dt) {
    double a = std::abs(r);
    double g = ch.slope(a);
    return ch.sigma(a) * g * g * dt;
  };
  auto uses_radial = [&](const PocketChart& ch, double r) { return dim == 1 || r >= ch.core; };
  // Log density, in the radial offset r_to about chart ch, of a proposal made
  // from a point with offset r_from, chart state `from` and step dt.
  auto log_proposal = [&](const PocketChart& ch, const Where& from, double r_from, double dt, double r_to) {
    bool on_chart = from.chart >= 0 && &charts[static_cast<std::size_t>(from.chart)] == &ch;
    if (on_chart && uses_radial(ch, r_from)) {
      double a = std::abs(r_to);
      if (dim == 2 && a <= 0.0) return -std::numeric_limits<double>::infinity();
      double wf = ch.map_signed(r_from);
      return log_normal(ch.map_signed(r_to), wf + ch.drift(r_from) * dt, w_variance(ch, r_from, dt)) +
             std::log(ch.slope(a));
    }
    double s = on_chart ? ch.sigma(std::abs(r_from)) : 1.0;
    double m = r_from;
    if (on_chart) m += 0.5 * ch.dsigma(std::abs(r_from)) * dt * (r_from < 0.0 ? -1.0 : 1.0);
    if (dim == 1) return log_normal(r_to, m, s * dt);
    return log_rice(r_to, std::abs(m), s * dt);
  };
  auto log_target = [&](double r, double dt) { return (dim == 2 ? std::log(r) : 0.0) - std::log(dt); };

  // Passages run only for pockets whose passage ball is clear of every stop
  // surface.
  std::vector<char> passage_on(charts.size(), 0);
  bool any_passage = false;
  if (!count_excursions && !track_regions) {
    for (std::size_t j = 0; j < charts.size(); ++j) {
      const PocketChart& ch = charts[j];
      if (!ch.passage) continue;
      const double hp = ch.passage->height();
      const Pocket& pk = geo.pocket(ch.pocket);
      bool ok = true;
      for (const Surface& s : options.stop) {
        if (s.pocket == ch.pocket) {
          ok = ok && s.offset > hp;
        } else {
          const Pocket& other = s.pocket < 0 ? *geo.target() : geo.pocket(s.pocket);
          ok = ok && torus_distance(pk.center, other.center) - pk.radius - other.radius - s.offset > hp;
        }
      }
      passage_on[j] = ok;
      any_passage = any_passage || ok;
    }
  }

  double t = 0.0;
  Where here = locate(cur, phi);

  // Draws a passage of chart j from the boundary point b reached at time
  // t_at. Returns false when the horizon falls inside it.
  auto passage = [&](std::size_t j, const Point& b, double t_at) {
    const PocketChart& ch = charts[j];
    PassageSample ps = ch.passage->sample(rng);
    ++out.passages;
    if (t_at + ps.time >= options.horizon) {
      out.status = PathStatus::Timeout;
      out.tau = options.horizon;
      out.exit = b;
      return false;
    }
    t = t_at + ps.time;
    const double L = ch.R + ch.passage->height();
    Point d = torus_displacement(ch.center, b);
    Point e{};
    if (dim == 1) {
      e[0] = (d[0] < 0.0 ? -L : L) * ps.side;
    } else {
      Point u = (1.0 / norm(d)) * d;
      double cs = std::cos(ps.angle), sn = std::sin(ps.angle);
      e = L * Point{cs * u[0] - sn * u[1], sn * u[0] + cs * u[1]};
    }
    x = wrap_point(ch.center + e);
    probe(geo, x, cur);
    for (std::size_t i = 0; i < ns; ++i) phi[i] = surface_value(options.stop[i], cur);
    here = locate(cur, phi);
    return true;
  };

  for (std::size_t j = 0; j < charts.size(); ++j) {
    if (passage_on[j] && std::abs(cur.sd[static_cast<std::size_t>(charts[j].pocket)]) <= kBoundaryTol) {
      if (!passage(j, x, 0.0)) return out;
      break;
    }
  }

  for (;;) {
    double dt = here.dt;
    bool last = false;
    if (t + dt >= options.horizon) {
      dt = options.horizon - t;
      last = true;
    }
    RegionKind region = track_regions ? region_of(cur, options.region_delta) : RegionKind::DeepU;
    auto finish_step = [&]() {
      if (track_regions) out.occupation[static_cast<std::size_t>(region)] += dt;
      t = last ? options.horizon : t + dt;
    };
    auto timeout = [&]() {
      out.status = PathStatus::Timeout;
      out.tau = options.horizon;
      out.exit = x;
    };

    double xi0 = rng.normal();
    double xi1 = dim == 2 ? rng.normal() : 0.0;
    ++out.steps;

    const PocketChart* chx = here.chart >= 0 ? &charts[static_cast<std::size_t>(here.chart)] : nullptr;
    bool radial = chx && uses_radial(*chx, here.r);
    bool valid = true;
    Point y;
    double wy = 0.0, dtheta = 0.0;
    Point ux{};
    if (radial) {
      double var = w_variance(*chx, here.r, dt);
      wy = here.w + chx->drift(here.r) * dt + std::sqrt(var) * xi0;
      if (dim == 1) {
        y = chx->center + Point{chx->inverse_signed(wy), 0.0};
      } else if (wy <= 0.0) {
        valid = false;
      } else {
        ux = (1.0 / here.r) * cur.disp[static_cast<std::size_t>(chx->pocket)];
        dtheta = std::sqrt(chx->sigma(here.r) * dt) / here.r * xi1;
        double cs = std::cos(dtheta), sn = std::sin(dtheta);
        Point u{cs * ux[0] - sn * ux[1], sn * ux[0] + cs * ux[1]};
        y = chx->center + chx->inverse(wy) * u;
      }
      if (valid) y = x + torus_displacement(x, y);
    } else {
      Point step{xi0, xi1};
      double s = 1.0;
      Point drift{};
      if (chx) {
        s = chx->sigma(here.r);
        if (here.r > 0.0)
          drift = (0.5 * chx->dsigma(here.r) / here.r) * cur.disp[static_cast<std::size_t>(chx->pocket)];
      }
      y = x + dt * drift + std::sqrt(s * dt) * step;
    }
    if (!valid) {
      ++out.rejections;
      finish_step();
      if (last) {
        timeout();
        return out;
      }
      continue;
    }

    probe(geo, y, nxt);
    for (std::size_t j = 0; j < ns; ++j) phi_next[j] = surface_value(options.stop[j], nxt);
    Where there = locate(nxt, phi_next);

    // Metropolis-Hastings test on the radial marginal about the chart in use,
    // with target density r^{d-1} / dt(r).
    int k = here.chart >= 0 ? here.chart : there.chart;
    if (k >= 0 && !last) {
      bool accept = true;
      if (here.chart >= 0 && there.chart >= 0 && here.chart != there.chart) {
        accept = false;
      } else if ((here.chart >= 0 || here.open) && (there.chart >= 0 || there.open)) {
        const PocketChart& ch = charts[static_cast<std::size_t>(k)];
        double rx = here.chart >= 0 ? here.r : offset(cur, ch);
        double ry = there.chart >= 0 ? there.r : offset(nxt, ch);
        double log_alpha;
        if (dim == 2 && here.chart >= 0 && there.chart >= 0 && !uses_radial(ch, rx) && !uses_radial(ch, ry)) {
          // Both ends in the core: the proposals are plain Gaussians in the plane.
          auto k_pocket = static_cast<std::size_t>(ch.pocket);
          auto mean = [&](const Point& d, double r, double step) {
            return r > 0.0 ? d + (0.5 * ch.dsigma(r) / r * step) * d : d;
          };
          double vx = ch.sigma(rx) * here.dt, vy = ch.sigma(ry) * there.dt;
          Point dx = cur.disp[k_pocket], dy = nxt.disp[k_pocket];
          Point fwd = dy - mean(dx, rx, here.dt), back = dx - mean(dy, ry, there.dt);
          log_alpha = std::log(here.dt / there.dt) + std::log(vx / vy) + 0.5 * dot(fwd, fwd) / vx -
                      0.5 * dot(back, back) / vy;
        } else {
          log_alpha = log_target(std::abs(ry), there.dt) - log_target(std::abs(rx), here.dt) +
                      log_proposal(ch, there, ry, there.dt, rx) - log_proposal(ch, here, rx, here.dt, ry);
        }
        if (log_alpha < 0.0) accept = std::log(rng.uniform_open()) < log_alpha;
      }
      if (!accept) {
        ++out.rejections;
        finish_step();
        continue;
      }
    }

    // Crossings. Surfaces of the chart pocket are tested in w, including the
    // Brownian-bridge chance of an excursion inside the step.
    double wyc = 0.0, var_w = 0.0;
    if (chx) {
      wyc = radial ? wy : chx->map_signed(offset(nxt, *chx));
      var_w = w_variance(*chx, here.r, dt);
    }
    auto chart_fraction = [&](double level_offset, double& f_out, double& sign_out) {
      double level = chx->map(chx->R + level_offset);
      double f = level_fraction(here.w, wyc, level, var_w, rng);
      sign_out = 1.0;
      if (dim == 1) {
        double g = level_fraction(here.w, wyc, -level, var_w, rng);
        if (g < f) {
          f = g;
          sign_out = -1.0;
        }
      }
      f_out = f;
    };

    // Point at radius R + level_offset about the chart pocket, a fraction f
    // into the step.
    auto chart_point = [&](double level_offset, double f, double sign) {
      double r_hit = chx->R + level_offset;
      if (dim == 1) return wrap_point(chx->center + Point{sign * r_hit, 0.0});
      Point u;
      if (radial) {
        double a = f * dtheta;
        u = Point{std::cos(a) * ux[0] - std::sin(a) * ux[1], std::sin(a) * ux[0] + std::cos(a) * ux[1]};
      } else {
        Point d = cur.disp[static_cast<std::size_t>(chx->pocket)] + f * (y - x);
        double len = norm(d);
        u = len > 0.0 ? (1.0 / len) * d : Point{1.0, 0.0};
      }
      return wrap_point(chx->center + r_hit * u);
    };

    std::size_t hit = ns;
    double frac = 2.0, hit_sign = 1.0;
    for (std::size_t j = 0; j < ns; ++j) {
      const Surface& s = options.stop[j];
      double f = 2.0, sg = 1.0;
      if (chx && s.pocket == chx->pocket) {
        chart_fraction(s.offset, f, sg);
      } else if (side[j] * phi_next[j] <= 0.0) {
        f = phi[j] / (phi[j] - phi_next[j]);
      }
      if (f < frac) {
        frac = f;
        hit = j;
        hit_sign = sg;
      }
    }

    if (hit < ns) {
      frac = std::clamp(frac, 0.0, 1.0);
      if (track_regions) out.occupation[static_cast<std::size_t>(region)] += frac * dt;
      out.tau = t + frac * dt;
      const Surface& s = options.stop[hit];
      if (chx && s.pocket == chx->pocket) {
        out.exit = chart_point(s.offset, frac, hit_sign);
      } else {
        out.exit = snap(geo, s, x + frac * (y - x));
      }
      if (dim == 1) out.exit[1] = 0.0;
      out.hit_surface = static_cast<int>(hit);
      return out;
    }

    if (any_passage) {
      int pj = -1;
      double pf = 2.0;
      Point pb{};
      if (chx && passage_on[static_cast<std::size_t>(here.chart)]) {
        double sg = 1.0;
        chart_fraction(0.0, pf, sg);
        if (pf <= 1.0) {
          pj = here.chart;
          pf = std::clamp(pf, 0.0, 1.0);
          pb = chart_point(0.0, pf, sg);
        }
      } else if (!chx) {
        for (std::size_t j = 0; j < charts.size() && pj < 0; ++j) {
          auto k = static_cast<std::size_t>(charts[j].pocket);
          if (!passage_on[j] || nxt.sd[k] > 0.0) continue;
          pj = static_cast<int>(j);
          pf = std::clamp(cur.sd[k] / (cur.sd[k] - nxt.sd[k]), 0.0, 1.0);
          pb = snap(geo, Surface{charts[j].pocket, 0.0}, x + pf * (y - x));
        }
      }
      if (pj >= 0) {
        if (!passage(static_cast<std::size_t>(pj), pb, t + pf * dt)) return out;
        continue;
      }
    }

    if (count_excursions && chx) {
      double f = 2.0, sg = 1.0;
      if (armed < 0) {
        chart_fraction(0.0, f, sg);
        if (f <= 1.0 || nxt.sd[static_cast<std::size_t>(chx->pocket)] <= 0.0) {
          ++out.excursions;
          armed = chx->pocket;
        }
      } else if (armed == chx->pocket) {
        chart_fraction(delta_e, f, sg);
        if (f <= 1.0 || nxt.sd[static_cast<std::size_t>(chx->pocket)] >= delta_e) armed = -1;
      } else {
        update_excursions(nxt);
      }
    } else if (count_excursions) {
      update_excursions(nxt);
    }

    finish_step();
    x = wrap_point(y);
    if (dim == 1) x[1] = 0.0;
    std::swap(cur, nxt);
    std::swap(phi, phi_next);
    here = there;

    if (last) {
      timeout();
      return out;
    }
  }
}

Point sde_step(const DiffusivityField& field, const Point& x, double dt, const Point& xi, double eps) {
  auto loc = field.local(x);
  double scale = std::sqrt((1.0 + loc.value / eps) * dt);
  Point y = wrap_point(x + (dt / (2.0 * eps)) * loc.gradient + scale * xi);
  if (field.geometry().dimension() == 1) y[1] = 0.0;
  return y;
}

double adaptive_dt(const DiffusivityField& field, const Point& x, const SdeConfig& config) {
  auto loc = field.local(x);
  if (loc.pocket < 0) return config.dt0;
  double dt = config.dt0;
  double g = norm(loc.gradient);
  if (g > 0.0) dt = std::min(dt, config.eta_drift * 2.0 * config.eps / g);
  return std::min(dt, config.eta_diff * config.eta_diff / (1.0 + loc.value / config.eps));
}

TrajectoryOutcome run_to_target(const DiffusivityField& field, const Point& x0, const Target& target,
                                const SdeConfig& config, RandomStream& rng) {
  const Geometry& geo = field.geometry();
  PathEngine engine(geo, &field, config);
  PathOptions opts;
  opts.stop.push_back(target.surface(geo));
  opts.horizon = config.t_max;
  opts.stop_in_target = target.kind == TargetKind::TargetClosure;
  return engine.run(x0, opts, rng);
}

std::vector<TrajectoryOutcome> simulate_paths(const PathEngine& engine, const Point& x0,
                                              const PathOptions& options, int n_paths) {
  std::vector<TrajectoryOutcome> out(static_cast<std::size_t>(std::max(n_paths, 0)));
  const std::uint64_t seed = engine.config().seed;
  parallel_for(n_paths, engine.config().workers, [&](int i) {
    RandomStream rng(stream_key(seed, static_cast<std::uint64_t>(i)));
    out[static_cast<std::size_t>(i)] = engine.run(x0, options, rng);
  });
  return out;
}

ExitTimeEstimate summarize_exit_times(std::span<const TrajectoryOutcome> outcomes) {
  ExitTimeEstimate est;
  double sum = 0.0;
  for (const auto& o : outcomes) {
    if (o.status == PathStatus::Timeout) {
      ++est.timeouts;
    } else {
      ++est.hits;
      sum += o.tau;
    }
  }
  if (outcomes.empty()) throw ConfigError("no paths to summarise");
  if (est.timeouts > 0.01 * static_cast<double>(outcomes.size()) || est.hits == 0)
    throw TimeoutDominated(std::to_string(est.timeouts) + " of " + std::to_string(outcomes.size()) +
                           " paths timed out");
  est.mean = sum / est.hits;
  double ss = 0.0;
  for (const auto& o : outcomes)
    if (o.status == PathStatus::Hit) ss += (o.tau - est.mean) * (o.tau - est.mean);
  est.std_error = est.hits > 1 ? std::sqrt(ss / (est.hits - 1) / est.hits) : 0.0;
  return est;
}

ExitTimeEstimate mc_exit_time(const DiffusivityField& field, const Point& x0, const Target& target,
                              const SdeConfig& config, int n_paths) {
  if (n_paths < 100) throw ConfigError("at least 100 paths are required");
  const Geometry& geo = field.geometry();
  PathEngine engine(geo, &field, config);
  PathOptions opts;
  opts.stop.push_back(target.surface(geo));
  opts.horizon = config.t_max;
  opts.stop_in_target = target.kind == TargetKind::TargetClosure;
  auto outcomes = simulate_paths(engine, x0, opts, n_paths);
  return summarize_exit_times(outcomes);
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DomainError("histograms differ in bin count");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

std::vector<double> uniform_boundary_masses(const Geometry& geometry, int bins) {
  if (bins < 1) throw DomainError("need at least one bin");
  auto n = static_cast<std::size_t>(bins);
  if (geometry.dimension() == 2) return std::vector<double>(n, 1.0 / bins);
  std::vector<double> m(n, 0.0);
  m[0] += 0.5;
  m[std::min(n - 1, static_cast<std::size_t>(0.5 * bins))] += 0.5;
  return m;
}

double total_variation_to_uniform(const Geometry& geometry, const EmpiricalBoundaryMeasure& m) {
  auto u = uniform_boundary_masses(geometry, static_cast<int>(m.mass.size()));
  return total_variation(m.mass, u);
}

EmpiricalBoundaryMeasure histogram_exit_points(const Geometry& geometry, int k,
                                               std::span<const TrajectoryOutcome> outcomes, int bins) {
  if (bins < 1) throw DomainError("need at least one bin");
  EmpiricalBoundaryMeasure m;
  m.pocket = k;
  m.mass.assign(static_cast<std::size_t>(bins), 0.0);
  for (const auto& o : outcomes) {
    if (o.status != PathStatus::Hit) continue;
    double u = geometry.boundary_parameter(k, o.exit);
    auto b = std::min(static_cast<std::size_t>(bins - 1), static_cast<std::size_t>(u * bins));
    m.mass[b] += 1.0;
    ++m.samples;
  }
  if (m.samples > 0)
    for (double& v : m.mass) v /= m.samples;
  return m;
}

EmpiricalBoundaryMeasure mc_exit_distribution(const DiffusivityField& field, const Point& x0, int k,
                                              double delta, const SdeConfig& config, int n_paths, int bins) {
  if (n_paths < 100) throw ConfigError("at least 100 paths are required");
  const Geometry& geo = field.geometry();
  geo.check_delta(delta);
  if (std::abs(geo.signed_distance(k, x0)) > 1e-9) throw NotOnBoundary("start must lie on the pocket boundary");
  PathEngine engine(geo, &field, config);
  PathOptions opts;
  opts.stop.push_back(Target::outer_shell(k, delta).surface(geo));
  opts.horizon = config.t_max;
  auto outcomes = simulate_paths(engine, x0, opts, n_paths);
  summarize_exit_times(outcomes);
  return histogram_exit_points(geo, k, outcomes, bins);
}

std::vector<VanishingRow> mc_vanishing_exit(const DiffusivityField& field, const Point& x0,
                                            std::span<const double> eps_list, const SdeConfig& config,
                                            int n_paths) {
  for (std::size_t i = 1; i < eps_list.size(); ++i)
    if (!(eps_list[i] < eps_list[i - 1])) throw ConfigError("eps list must be strictly decreasing");
  const Geometry& geo = field.geometry();
  int k = -1;
  for (int j = 0; j < geo.pocket_count(); ++j)
    if (geo.signed_distance(j, x0) <= kBoundaryTol) k = j;
  if (k < 0) throw ConfigError("start must lie in a pocket closure");

  std::vector<VanishingRow> rows;
  for (double eps : eps_list) {
    SdeConfig cfg = config;
    cfg.eps = eps;
    auto est = mc_exit_time(field, x0, Target::pocket_boundary(k), cfg, n_paths);
    rows.push_back({eps, est.mean, est.std_error, est.mean / std::sqrt(eps)});
  }
  return rows;
}

OccupationEstimate summarize_occupation(const Geometry& geometry, const Point& x0, double delta,
                                        std::span<const TrajectoryOutcome> outcomes) {
  OccupationEstimate est;
  est.paths = static_cast<int>(outcomes.size());
  if (outcomes.empty()) return est;
  auto start = static_cast<std::size_t>(geometry.classify(x0, delta).kind);
  std::array<double, kRegionKindCount> sum{}, sum2{};
  for (const auto& o : outcomes) {
    double total = 0.0;
    for (double v : o.occupation) total += v;
    for (std::size_t r = 0; r < sum.size(); ++r) {
      double f = total > 0.0 ? o.occupation[r] / total : (r == start ? 1.0 : 0.0);
      sum[r] += f;
      sum2[r] += f * f;
    }
  }
  double n = static_cast<double>(outcomes.size());
  for (std::size_t r = 0; r < sum.size(); ++r) {
    est.fraction[r] = sum[r] / n;
    double var = n > 1 ? std::max(0.0, (sum2[r] - n * est.fraction[r] * est.fraction[r]) / (n - 1)) : 0.0;
    est.std_error[r] = std::sqrt(var / n);
  }
  return est;
}

OccupationEstimate mc_occupation(const DiffusivityField& field, const Point& x0, double T, double delta,
                                 const SdeConfig& config, int n_paths) {
  if (!(T >= 0.0) || T > config.t_max) throw ConfigError("occupation horizon must lie in [0, t_max]");
  const Geometry& geo = field.geometry();
  geo.check_delta(delta);
  std::vector<TrajectoryOutcome> outcomes;
  if (T > 0.0) {
    PathEngine engine(geo, &field, config);
    PathOptions opts;
    opts.horizon = T;
    opts.region_delta = delta;
    outcomes = simulate_paths(engine, x0, opts, n_paths);
  } else {
    outcomes.resize(static_cast<std::size_t>(std::max(n_paths, 0)));
  }
  return summarize_occupation(geo, x0, delta, outcomes);
}

}  // namespace pocketlab
