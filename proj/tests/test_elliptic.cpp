#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "pocketlab/elliptic.hpp"
#include "pocketlab/errors.hpp"
#include "pocketlab/random.hpp"

using namespace pocketlab;

namespace {

Geometry symmetric_line() { return Geometry(1, {Pocket::interval(0.0, 0.2)}, Pocket::interval(0.55, 0.1)); }

Geometry disk_with_target() {
  return Geometry(2, {Pocket::disk(0.5, 0.5, 0.15)}, Pocket::disk(0.2, 0.2, 0.05));
}

double max_abs_diff(const Grid& grid, const GridField& u, const std::function<double(const Point&)>& f) {
  double m = 0;
  for (int i = 0; i < grid.node_count(); ++i)
    if (grid.kind(i) == Grid::NodeKind::Interior) m = std::max(m, std::abs(u[static_cast<std::size_t>(i)] - f(grid.node(i))));
  return m;
}

}  // namespace

TEST_CASE("Dirichlet problem on a segment") {
  // U = (0, 0.35); rhs 1 with lambda 0 solves u''/2 = -1.
  Geometry g(1, {Pocket::interval(0.35, 0.65)});
  Grid grid(g, 1000);
  GridField rhs(static_cast<std::size_t>(grid.node_count()), 1.0);
  auto u = solve_dirichlet(grid, rhs, constant_boundary({0.0}), 0.0);
  CHECK(max_abs_diff(grid, u, [](const Point& x) { return oracle::bm_interval_exit(x[0], 0.35); }) <= 1e-6);
}

TEST_CASE("Dirichlet problem with constant data") {
  auto g = disk_with_target();
  Grid grid(g, 64);
  GridField zero(static_cast<std::size_t>(grid.node_count()), 0.0);
  auto u = solve_dirichlet(grid, zero, constant_boundary({0.7}, 0.7), 0.0);
  CHECK(max_abs_diff(grid, u, [](const Point&) { return 0.7; }) <= 1e-10);

  GridField kappa(static_cast<std::size_t>(grid.node_count()), 1.2);
  auto v = solve_dirichlet(grid, kappa, constant_boundary({0.4}, 0.4), 3.0);
  CHECK(max_abs_diff(grid, v, [](const Point&) { return 0.4; }) <= 1e-10);
}

TEST_CASE("singular Dirichlet system") {
  // The pocket sits between grid lines, so no arm is cut and lambda = 0
  // leaves the constants in the kernel.
  Geometry g(2, {Pocket::disk(0.0625, 0.0625, 0.01)});
  Grid grid(g, 8);
  CHECK_THROWS_AS(DirichletSolver(grid, 0.0), SingularSystem);
  CHECK_NOTHROW(DirichletSolver(grid, 1.0));
}

TEST_CASE("flux of simple fields") {
  Geometry g(2, {Pocket::disk(0.5, 0.5, 0.15)});
  Grid grid(g, 256, false);
  auto c = sample_field(grid, [](const Point&) { return 3.0; });
  CHECK(std::abs(flux_integral(grid, c, 0, constant_boundary({3.0}))) <= 1e-8);
  auto lin = sample_field(grid, [](const Point& x) { return x[0]; });
  CHECK(std::abs(flux_integral(grid, lin, 0, [](const Point& p, int) { return p[0]; })) <= 1e-8);
}

TEST_CASE("flux of the annulus-harmonic field") {
  const double rin = 0.15, rout = 0.4;
  Geometry g(2, {Pocket::disk(0.5, 0.5, rin)});
  auto h = [&](const Point& x) { return std::log(rout / torus_distance(x, {0.5, 0.5})) / std::log(rout / rin); };
  double exact = 2 * std::numbers::pi / std::log(rout / rin);
  double prev_err = 0;
  for (int n : {200, 400, 800}) {
    Grid grid(g, n, false);
    auto u = sample_field(grid, h);
    double err = std::abs(flux_integral(grid, u, 0, constant_boundary({1.0})) - exact) / exact;
    if (prev_err > 0) CHECK(err < 0.5 * prev_err);
    prev_err = err;
  }
  CHECK(prev_err <= 1e-3);
}

TEST_CASE("one-dimensional flux uses the inward normals") {
  Geometry g(1, {Pocket::interval(0.4, 0.2)});
  Grid grid(g, 1000, false);
  // u = (x - 0.5)^2 grows away from the pocket on both sides, so the
  // derivative along the inward normal is -0.2 at each end.
  auto u = sample_field(grid, [](const Point& x) { return (x[0] - 0.5) * (x[0] - 0.5); });
  CHECK(flux_integral(grid, u, 0, constant_boundary({0.01})) == doctest::Approx(-0.4).epsilon(1e-9));
}

TEST_CASE("closed form in one dimension") {
  auto cf = closed_form_1d(symmetric_line());
  REQUIRE(cf.c.size() == 1);
  CHECK(cf.c[0] == doctest::Approx(0.1575).epsilon(1e-14));
  CHECK(cf.c[0] == doctest::Approx(oracle::symmetric_1d_constant(0.35, 0.2)).epsilon(1e-14));
  CHECK(cf.flux(0) == doctest::Approx(0.2).epsilon(1e-14));
  for (const auto& arc : cf.arcs) {
    CHECK(arc.length == doctest::Approx(0.35));
    if (arc.left_region == 0) {
      CHECK(arc.b == doctest::Approx(-0.1));
      CHECK(arc.u0 == doctest::Approx(0.1575));
    }
    // Zero on the boundary of F.
    double at_f = arc.right_region == Grid::kTargetRegion ? -arc.length * arc.length + arc.b * arc.length + arc.u0 : arc.u0;
    CHECK(std::abs(at_f) <= 1e-14);
  }
  CHECK(cf.evaluate(0.3) == doctest::Approx(oracle::symmetric_1d_u(0.1, 0.35, 0.2)));
  CHECK(cf.evaluate(0.9) == doctest::Approx(oracle::symmetric_1d_u(0.1, 0.35, 0.2)));
  CHECK(cf.evaluate(0.1) == doctest::Approx(0.1575));
  CHECK_THROWS_AS(cf.evaluate(0.6), DomainError);

  auto w2 = closed_form_1d(symmetric_line(), 2.0);
  CHECK(w2.c[0] == doctest::Approx(oracle::symmetric_1d_constant(0.35, 0.2, 2.0)));
}

TEST_CASE("closed form tends to the Brownian value as the pocket shrinks") {
  const double ell = 1e-7;
  Geometry g(1, {Pocket::interval(1.0 - ell / 2, ell)}, Pocket::interval(0.45, 0.1));
  auto cf = closed_form_1d(g);
  CHECK(cf.c[0] == doctest::Approx(0.45 * 0.45).epsilon(1e-6));
}

TEST_CASE("grid solver reproduces the one-dimensional closed form") {
  auto g = symmetric_line();
  auto cf = closed_form_1d(g);
  for (int n : {500, 1000, 2000}) {
    Grid grid(g, n);
    auto sol = solve_hitting_problem(grid);
    CHECK(std::abs(sol.c[0] - 0.1575) <= 1e-9);
    CHECK(std::abs(sol.flux_residual[0]) <= 1e-8);
    CHECK(sol.interior_residual <= 1e-9);
    double err = 0;
    for (int i = 0; i < grid.node_count(); ++i)
      if (grid.kind(i) != Grid::NodeKind::Target)
        err = std::max(err, std::abs(sol.u[static_cast<std::size_t>(i)] - cf.evaluate(grid.node(i)[0])));
    // The scheme is exact for quadratics, so only rounding remains.
    CHECK(err <= 1e-9);
  }
}

TEST_CASE("several pockets in one dimension") {
  Geometry g(1, {Pocket::interval(0.05, 0.1), Pocket::interval(0.3, 0.15), Pocket::interval(0.6, 0.05)},
             Pocket::interval(0.8, 0.07));
  auto cf = closed_form_1d(g);
  Grid grid(g, 2000);
  auto sol = solve_hitting_problem(grid);
  for (int k = 0; k < 3; ++k) {
    CHECK(sol.c[static_cast<std::size_t>(k)] == doctest::Approx(cf.c[static_cast<std::size_t>(k)]).epsilon(1e-8));
    CHECK(cf.flux(k) == doctest::Approx(g.pocket(k).length()).epsilon(1e-12));
    CHECK(std::abs(sol.flux_residual[static_cast<std::size_t>(k)]) <= 1e-8);
  }
}

TEST_CASE("hitting problem around a disk") {
  auto g = disk_with_target();
  std::vector<double> c;
  for (int n : {200, 400}) {
    Grid grid(g, n);
    auto sol = solve_hitting_problem(grid);
    c.push_back(sol.c[0]);
    CHECK(std::abs(sol.flux_residual[0]) <= 1e-8);
    CHECK(sol.interior_residual <= 1e-9);
    double umin = INFINITY, umax = 0, near_f = 0;
    for (int i = 0; i < grid.node_count(); ++i) {
      if (grid.kind(i) == Grid::NodeKind::Target) continue;
      double u = sol.u[static_cast<std::size_t>(i)];
      umin = std::min(umin, u);
      umax = std::max(umax, u);
      if (g.target_signed_distance(grid.node(i)) < 2.0 / n) near_f = std::max(near_f, u);
    }
    CHECK(umin >= 0.0);
    CHECK(near_f < umax);
  }
  CHECK(std::abs(c[0] - c[1]) / c[1] <= 0.01);
}

TEST_CASE("observed order of the disk hitting constant") {
  auto g = disk_with_target();
  std::vector<double> c;
  for (int n : {100, 200, 400}) c.push_back(solve_hitting_problem(Grid(g, n)).c[0]);
  double order = std::log2(std::abs(c[0] - c[1]) / std::abs(c[1] - c[2]));
  MESSAGE("observed order " << order);
  CHECK(order >= 1.5);
}

TEST_CASE("hitting problem needs a target") {
  Geometry g(2, {Pocket::disk(0.5, 0.5, 0.15)});
  CHECK_THROWS_AS(solve_hitting_problem(Grid(g, 64)), ConfigError);
}

TEST_CASE("resolvent with constant data") {
  Geometry g(2, {Pocket::disk(0.3, 0.3, 0.1), Pocket::disk(0.7, 0.65, 0.12)});
  Grid grid(g, 128);
  const double lambda = 2.0, kappa = 0.7;
  std::vector<double> at{kappa, kappa};
  auto sol = solve_resolvent(grid, lambda, [&](const Point&) { return kappa; }, at);
  for (double v : sol.u) CHECK(std::abs(v - kappa / lambda) <= 1e-10);
  for (double v : sol.c) CHECK(std::abs(v - kappa / lambda) <= 1e-10);
  for (double v : sol.g) CHECK(std::abs(v) <= 1e-10);
  for (double v : sol.flux_residual) CHECK(std::abs(v) <= 1e-8);
  CHECK(std::isfinite(sol.coupling_condition));
}

TEST_CASE("resolvent keeps nonnegative data nonnegative") {
  Geometry g(2, {Pocket::disk(0.3, 0.3, 0.1), Pocket::disk(0.7, 0.65, 0.12)});
  Grid grid(g, 96);
  RandomStream rng(31);
  for (int s = 0; s < 5; ++s) {
    double ax = rng.uniform(), ay = rng.uniform(), amp = rng.uniform();
    // A bump placed at random, zero on both pocket boundaries where its
    // support stays away from them.
    auto psi = [&](const Point& x) {
      double d = torus_distance(x, {ax, ay});
      return d < 0.2 ? amp * (1 - d / 0.2) * (1 - d / 0.2) : 0.0;
    };
    std::vector<double> at{psi(g.pocket(0).center), psi(g.pocket(1).center)};
    auto sol = solve_resolvent(grid, 1.0, psi, at);
    double m = INFINITY;
    for (double v : sol.u) m = std::min(m, v);
    CHECK(m >= -1e-10);
    for (double v : sol.g) CHECK(std::isfinite(v));
  }
}

TEST_CASE("resolvent for large lambda") {
  Geometry g(2, {Pocket::disk(0.5, 0.5, 0.15)});
  Grid grid(g, 128);
  auto psi = [&](const Point& x) {
    double sd = g.signed_distance(0, x);
    double s = std::min(1.0, std::max(sd, 0.0) / 0.2);
    return 1.0 + 0.5 * std::sin(2 * std::numbers::pi * x[0]) * std::sin(2 * std::numbers::pi * x[1]) * s * s;
  };
  const double lambda = 1e3;
  std::vector<double> at{1.0};
  auto sol = solve_resolvent(grid, lambda, psi, at);
  double err = 0, sup = 0;
  for (int i = 0; i < grid.node_count(); ++i) {
    Point x = grid.node(i);
    err = std::max(err, std::abs(lambda * sol.u[static_cast<std::size_t>(i)] - (grid.kind(i) == Grid::NodeKind::Interior ? psi(x) : 1.0)));
    sup = std::max(sup, psi(x));
  }
  CHECK(err <= 0.05 * sup);
}

TEST_CASE("resolvent coupling in one dimension is diagonally dominant") {
  Geometry g(1, {Pocket::interval(0.05, 0.1), Pocket::interval(0.3, 0.15), Pocket::interval(0.6, 0.05)});
  Grid grid(g, 1000);
  std::vector<double> at{1.0, 0.5, 0.2};
  auto sol = solve_resolvent(grid, 1.0, [](const Point& x) { return 1.0 + x[0]; }, at);
  for (int j = 0; j < 3; ++j) {
    double off = 0;
    for (int k = 0; k < 3; ++k)
      if (k != j) off += std::abs(sol.coupling(j, k));
    CHECK(std::abs(sol.coupling(j, j)) > off);
    CHECK(std::abs(sol.flux_residual[static_cast<std::size_t>(j)]) <= 1e-8);
  }
}

TEST_CASE("interpolation") {
  Geometry g(2, {Pocket::disk(0.5, 0.5, 0.15)});
  Grid grid(g, 64, false);
  auto u = sample_field(grid, [](const Point& x) { return 1.0 + 2.0 * x[0] - x[1] + x[0] * x[1]; });
  CHECK(interpolate(grid, u, {0.123, 0.111}) == doctest::Approx(1.0 + 0.246 - 0.111 + 0.123 * 0.111).epsilon(1e-12));
  CHECK(interpolate(grid, u, grid.node(grid.index(3, 4))) == u[static_cast<std::size_t>(grid.index(3, 4))]);
}
