#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "pocketlab/diffusivity.hpp"
#include "pocketlab/errors.hpp"
#include "pocketlab/random.hpp"

using namespace pocketlab;

namespace {

DiffusivityField disk_field(double amp = 1.0) {
  return DiffusivityField(Geometry(2, {Pocket::disk(0.5, 0.5, 0.15)}), {amp});
}

Point random_pocket_point(RandomStream& rng, const Pocket& p) {
  double rho = p.radius * std::sqrt(rng.uniform()), t = 2 * std::numbers::pi * rng.uniform();
  return {p.center[0] + rho * std::cos(t), p.center[1] + rho * std::sin(t)};
}

}  // namespace

TEST_CASE("a vanishes on U and peaks at the centre") {
  auto f = disk_field(2.5);
  CHECK(f.value({0.9, 0.9}) == 0.0);
  CHECK(f.value({0.65, 0.5}) == 0.0);
  CHECK(f.value({0.5, 0.5}) == doctest::Approx(2.5));
  CHECK(f.gradient({0.9, 0.1}) == Point{0.0, 0.0});
  CHECK(f.gradient({0.5, 0.5}) == Point{0.0, 0.0});
  CHECK_THROWS_AS(DiffusivityField(Geometry(2, {Pocket::disk(0.5, 0.5, 0.15)}), {0.0}), ConfigError);
  CHECK_THROWS_AS(DiffusivityField(Geometry(2, {Pocket::disk(0.5, 0.5, 0.15)}), {}), ConfigError);
}

TEST_CASE("quadratic vanishing at the boundary") {
  const double A = 1.7, r0 = 0.15;
  auto f = disk_field(A);
  auto ratio = [&](double h) {
    double a = f.value({0.5 + r0 - h, 0.5});
    return a / (h * h);
  };
  // Two Richardson steps with ratio 10 on a series in powers of h.
  auto once = [&](double h) { return (10.0 * ratio(h / 10.0) - ratio(h)) / 9.0; };
  for (double s : {1e-2, 1e-3, 1e-4}) {
    double h = s * r0;
    double extrap = (100.0 * once(h / 10.0) - once(h)) / 99.0;
    CHECK(extrap == doctest::Approx(4 * A / (r0 * r0)).epsilon(1e-6));
  }
  CHECK(f.profile(0) == doctest::Approx(4 * A / (r0 * r0)));
}

TEST_CASE("interval field") {
  DiffusivityField f(Geometry(1, {Pocket::interval(0.0, 0.2)}), {1.0});
  CHECK(f.value({0.1, 0.0}) == doctest::Approx(1.0));
  CHECK(f.value({0.5, 0.0}) == 0.0);
  // s = 0.05 into the interval: (1 - (2s/l - 1)^2)^2 = 0.75^2.
  CHECK(f.value({0.05, 0.0}) == doctest::Approx(0.5625));
  CHECK(f.value({0.95, 0.0}) == 0.0);
}

TEST_CASE("gradient matches central differences") {
  auto f = disk_field(1.3);
  const auto& p = f.geometry().pocket(0);
  RandomStream rng(4);
  const double s = 1e-6;
  for (int i = 0; i < 100; ++i) {
    Point x = random_pocket_point(rng, p);
    if (f.geometry().nearest_pocket(x).distance < 2 * s) continue;
    Point g = f.gradient(x);
    Point fd{(f.value({x[0] + s, x[1]}) - f.value({x[0] - s, x[1]})) / (2 * s),
             (f.value({x[0], x[1] + s}) - f.value({x[0], x[1] - s})) / (2 * s)};
    double scale = std::max(norm(g), 1e-3);
    CHECK(norm(g - fd) / scale <= 1e-5);
  }
}

TEST_CASE("gradient is continuous across the boundary") {
  auto f = disk_field();
  CHECK(norm(f.gradient({0.65 - 1e-9, 0.5})) < 1e-6);
}

TEST_CASE("envelope holds at random pocket points") {
  auto f = disk_field(0.8);
  const auto& p = f.geometry().pocket(0);
  RandomStream rng(8);
  double c1 = f.envelope_lower(0), c2 = f.envelope_upper(0);
  bool ok = true;
  for (int i = 0; i < 100000; ++i) {
    Point x = random_pocket_point(rng, p);
    double h = f.geometry().nearest_pocket(x).distance;
    double a = f.value(x);
    ok &= c1 * h * h <= a && a <= c2 * h * h;
  }
  CHECK(ok);
  for (double t : {1e-2, 1e-4, 1e-6}) CHECK(f.value({0.65 - t, 0.5}) <= c2 * t * t);
}

TEST_CASE("barrier_w closed form") {
  BarrierParams p{0.02, 1e-3, 1.0, 1.0};
  CHECK(barrier_w(0.0, p) == 0.0);
  CHECK(barrier_w_prime(0.02, p) == 0.0);
  double quad = oracle::simpson([&](double t) { return 2.0 * (0.02 - t) / (1e-3 + t * t); }, 0.0, 0.01, 1e-14);
  CHECK(std::abs(barrier_w(0.01, p) - quad) <= 1e-10);
  CHECK_THROWS_AS(barrier_w(0.03, p), DomainError);
  CHECK_THROWS_AS(barrier_w(-1e-9, p), DomainError);

  BarrierParams q{0.02, 1e-4, 177.0, 177.0};
  double prev = barrier_w(0.0, q);
  for (int i = 1; i <= 200; ++i) {
    double h = 0.02 * i / 200.0;
    double w = barrier_w(h, q);
    CHECK(w > prev);
    if (i < 200) CHECK(barrier_w_prime(h, q) > 0.0);
    prev = w;
  }
}

TEST_CASE("barrier derivatives match differences") {
  BarrierParams p{0.02, 1e-4, 100.0, 150.0};
  const double s = 1e-7;
  for (double h : {0.001, 0.005, 0.013}) {
    double d1 = (barrier_w(h + s, p) - barrier_w(h - s, p)) / (2 * s);
    CHECK(barrier_w_prime(h, p) == doctest::Approx(d1).epsilon(1e-6));
    double d2 = (barrier_w_prime(h + s, p) - barrier_w_prime(h - s, p)) / (2 * s);
    CHECK(barrier_w_second(h, p) == doctest::Approx(d2).epsilon(1e-6));
  }
}

TEST_CASE("supersolution inequality") {
  auto f = disk_field();
  for (double eps : {1e-3, 1e-4}) {
    auto rep = verify_supersolution(f, 0, 0.02, eps, 1000);
    CHECK(rep.max_a1 <= -2.0 + 1e-9);
    CHECK(rep.max_operator <= -0.5);
    CHECK(rep.samples == 1000);
  }
  CHECK_THROWS_AS(verify_supersolution(f, 0, 0.2, 1e-3, 10), DeltaTooLarge);
}

TEST_CASE("supersolution operator agrees with a finite-difference evaluation") {
  // One sample sits at depth delta/2 on the ray of angle 0.
  const double delta = 0.02, eps = 1e-3, r0 = 0.15;
  auto f = disk_field();
  auto rep = verify_supersolution(f, 0, delta, eps, 1);
  const double psi = f.profile(0);
  BarrierParams bp{delta, eps, psi, psi};
  auto u = [&](double x, double y) {
    double h = r0 - std::hypot(x - 0.5, y - 0.5);
    return 2 * eps * barrier_w(h, bp);
  };
  const double x = 0.5 + r0 - delta / 2, y = 0.5, s = 1e-5;
  double lap = (u(x + s, y) + u(x - s, y) + u(x, y + s) + u(x, y - s) - 4 * u(x, y)) / (s * s);
  Point gu{(u(x + s, y) - u(x - s, y)) / (2 * s), (u(x, y + s) - u(x, y - s)) / (2 * s)};
  double a = f.value({x, y});
  double op = 0.5 * (1 + a / eps) * lap + dot(f.gradient({x, y}), gu) / (2 * eps);
  CHECK(rep.max_operator == doctest::Approx(op).epsilon(1e-4));
}

TEST_CASE("sup of the barrier scales like sqrt(eps)") {
  auto f = disk_field();
  double lo = INFINITY, hi = 0;
  for (double eps : {1e-2, 1e-3, 1e-4}) {
    double r = verify_supersolution(f, 0, 0.02, eps, 10).sup_u / std::sqrt(eps);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  CHECK(hi / lo <= 2.0);
}
