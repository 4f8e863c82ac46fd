#include "pocketlab/diffusivity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pocketlab/errors.hpp"

namespace pocketlab {

DiffusivityField::DiffusivityField(Geometry geometry, std::vector<double> amplitudes)
    : geometry_(std::move(geometry)), amplitudes_(std::move(amplitudes)) {
  if (static_cast<int>(amplitudes_.size()) != geometry_.pocket_count())
    throw ConfigError("one amplitude per pocket is required");
  for (double a : amplitudes_)
    if (!(a > 0.0)) throw ConfigError("pocket amplitudes must be positive");
}

DiffusivityField::Local DiffusivityField::local(const Point& x) const {
  Local out;
  for (int k = 0; k < geometry_.pocket_count(); ++k) {
    const Pocket& p = geometry_.pocket(k);
    Point d = torus_displacement(p.center, x);
    double rho2 = dot(d, d);
    double r2 = p.radius * p.radius;
    if (rho2 >= r2) continue;
    double q = 1.0 - rho2 / r2;
    double amp = amplitudes_[static_cast<std::size_t>(k)];
    out.pocket = k;
    out.value = amp * q * q;
    out.gradient = (-4.0 * amp * q / r2) * d;
    out.depth = p.radius - std::sqrt(rho2);
    return out;
  }
  return out;
}

double DiffusivityField::value(const Point& x) const { return local(x).value; }

Point DiffusivityField::gradient(const Point& x) const { return local(x).gradient; }

double DiffusivityField::profile(int k) const {
  double r = geometry_.pocket(k).radius;
  return 4.0 * amplitude(k) / (r * r);
}

// a / h^2 = A (2R - h)^2 / R^4 on 0 < h <= R, so the ratio lies in
// [A / R^2, 4 A / R^2]. The bounds are widened by a relative 1e-12 so the
// inequality survives rounding at the extremes.
double DiffusivityField::envelope_lower(int k) const {
  double r = geometry_.pocket(k).radius;
  return amplitude(k) / (r * r) * (1.0 - 1e-12);
}

double DiffusivityField::envelope_upper(int k) const { return profile(k) * (1.0 + 1e-12); }

namespace {

void check_barrier_args(double h, const BarrierParams& p) {
  if (!(p.delta > 0.0) || !(p.eps > 0.0) || !(p.r > 0.0) || !(p.R >= p.r))
    throw DomainError("barrier parameters need delta, eps > 0 and 0 < r <= R");
  if (!(h >= 0.0) || h > p.delta) throw DomainError("barrier argument outside [0, delta]");
}

}  // namespace

double barrier_w(double h, const BarrierParams& p) {
  check_barrier_args(h, p);
  double s = std::sqrt(p.eps * p.R);
  double arc = p.delta * std::atan(h * std::sqrt(p.R / p.eps)) / s;
  double log_term = std::log1p(p.R * h * h / p.eps) / (2.0 * p.R);
  return 2.0 * p.R / p.r * (arc - log_term);
}

double barrier_w_prime(double h, const BarrierParams& p) {
  check_barrier_args(h, p);
  return 2.0 * p.R / p.r * (p.delta - h) / (p.eps + p.R * h * h);
}

double barrier_w_second(double h, const BarrierParams& p) {
  check_barrier_args(h, p);
  double den = p.eps + p.R * h * h;
  return 2.0 * p.R / p.r * (-den - 2.0 * p.R * h * (p.delta - h)) / (den * den);
}

SupersolutionReport verify_supersolution(const DiffusivityField& field, int k, double delta, double eps,
                                         int samples) {
  const Geometry& geo = field.geometry();
  geo.check_delta(delta);
  if (!(eps > 0.0)) throw DomainError("eps must be positive");
  if (samples < 1) throw DomainError("need at least one sample");

  const Pocket& pk = geo.pocket(k);
  const double psi = field.profile(k);
  const BarrierParams params{delta, eps, psi, psi};
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);

  SupersolutionReport rep;
  rep.samples = samples;
  rep.sup_u = 2.0 * eps * barrier_w(delta, params);
  rep.max_operator = -std::numeric_limits<double>::infinity();
  rep.max_a1 = -std::numeric_limits<double>::infinity();

  for (int i = 0; i < samples; ++i) {
    double h = delta * (i + 0.5) / samples;
    double rho = pk.radius - h;
    Point dir;
    if (geo.dimension() == 1) {
      dir = {i % 2 == 0 ? 1.0 : -1.0, 0.0};
    } else {
      double phi = 2.0 * std::numbers::pi * std::fmod(i * golden, 1.0);
      dir = {std::cos(phi), std::sin(phi)};
    }
    Point x = wrap_point(pk.center + rho * dir);
    auto loc = field.local(x);

    // h = R - rho, so grad h = -dir and the Laplacian of h is -(d-1)/rho.
    Point grad_h = -1.0 * dir;
    double lap_h = -(geo.dimension() - 1) / rho;
    double da_dh = dot(loc.gradient, grad_h);
    double a = loc.value;
    double w1 = barrier_w_prime(h, params);
    double w2 = barrier_w_second(h, params);

    double total = (eps + a) * w2 + (da_dh + (eps + a) * lap_h) * w1;
    double a1 = (eps + psi * h * h) * w2 + 2.0 * psi * h * w1;
    double a2 = (a - psi * h * h) * w2;
    double a3 = (da_dh - 2.0 * psi * h + (eps + a) * lap_h) * w1;

    rep.max_operator = std::max(rep.max_operator, total);
    rep.max_a1 = std::max(rep.max_a1, a1);
    rep.max_abs_a2 = std::max(rep.max_abs_a2, std::abs(a2));
    rep.max_abs_a3 = std::max(rep.max_abs_a3, std::abs(a3));
  }
  return rep;
}

}  // namespace pocketlab
