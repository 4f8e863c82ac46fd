#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "pocketlab/errors.hpp"
#include "pocketlab/geometry.hpp"
#include "pocketlab/random.hpp"

using namespace pocketlab;

namespace {

Geometry disk_geometry() { return Geometry(2, {Pocket::disk(0.5, 0.5, 0.15)}); }

}  // namespace

TEST_CASE("pocket volumes and boundary measures") {
  auto d = Pocket::disk(0.5, 0.5, 0.15);
  CHECK(d.volume() == doctest::Approx(std::numbers::pi * 0.0225).epsilon(1e-15));
  CHECK(d.boundary_measure() == doctest::Approx(2 * std::numbers::pi * 0.15).epsilon(1e-15));
  auto i = Pocket::interval(0.0, 0.2);
  CHECK(i.volume() == doctest::Approx(0.2));
  CHECK(i.boundary_measure() == 2.0);
  CHECK(i.left() == doctest::Approx(0.0));
  CHECK(i.length() == doctest::Approx(0.2));
}

TEST_CASE("construction rejects intersecting closures") {
  CHECK_THROWS_AS(Geometry(2, {Pocket::disk(0.3, 0.5, 0.15), Pocket::disk(0.6, 0.5, 0.15)}), GeometryError);
  // Touching closures also intersect.
  CHECK_THROWS_AS(Geometry(1, {Pocket::interval(0.0, 0.2)}, Pocket::interval(0.2, 0.1)), GeometryError);
  // Across the periodic seam.
  CHECK_THROWS_AS(Geometry(2, {Pocket::disk(0.05, 0.5, 0.1), Pocket::disk(0.9, 0.5, 0.1)}), GeometryError);
  CHECK_NOTHROW(Geometry(2, {Pocket::disk(0.3, 0.3, 0.1), Pocket::disk(0.7, 0.65, 0.12)}));
}

TEST_CASE("nearest_pocket") {
  auto g = disk_geometry();
  auto c = g.nearest_pocket({0.5, 0.5});
  CHECK(c.pocket == 0);
  CHECK(c.distance == doctest::Approx(0.15));
  CHECK(c.inside);

  auto far = g.nearest_pocket({0.9, 0.9});
  CHECK_FALSE(far.inside);
  CHECK(std::abs(far.distance - oracle::sampled_circle_distance(0.9, 0.9, 0.5, 0.5, 0.15, 10000)) <= 1e-6);

  Geometry g1(1, {Pocket::interval(0.0, 0.2)});
  auto n1 = g1.nearest_pocket({0.3, 0.0});
  CHECK(n1.pocket == 0);
  CHECK(n1.distance == doctest::Approx(0.1));
  CHECK_FALSE(n1.inside);
}

TEST_CASE("nearest_pocket matches brute force across the seam") {
  Geometry g(2, {Pocket::disk(0.1, 0.9, 0.08)});
  RandomStream rng(3);
  for (int i = 0; i < 50; ++i) {
    double x = rng.uniform(), y = rng.uniform();
    auto np = g.nearest_pocket({x, y});
    if (np.inside) continue;
    CHECK(std::abs(np.distance - oracle::sampled_circle_distance(x, y, 0.1, 0.9, 0.08, 20000)) <= 1e-6);
  }
}

TEST_CASE("project") {
  auto g = disk_geometry();
  auto p = g.project(0, {0.7, 0.5});
  CHECK(p[0] == doctest::Approx(0.65));
  CHECK(p[1] == doctest::Approx(0.5));
  CHECK_THROWS_AS(g.project(0, {0.5, 0.5}), AmbiguousProjection);

  Geometry g1(1, {Pocket::interval(0.0, 0.2)});
  // Midpoint of the complementary arc.
  CHECK_THROWS_AS(g1.project(0, {0.6, 0.0}), AmbiguousProjection);
}

TEST_CASE("projection distance equals the boundary distance in the shell") {
  auto g = disk_geometry();
  RandomStream rng(9);
  for (int i = 0; i < 200; ++i) {
    double rho = 0.15 + 0.02 * rng.uniform(), t = 2 * std::numbers::pi * rng.uniform();
    Point x{0.5 + rho * std::cos(t), 0.5 + rho * std::sin(t)};
    Point th = g.project(0, x);
    double h = g.nearest_pocket(x).distance;
    CHECK(torus_distance(x, th) == doctest::Approx(h).epsilon(1e-12));
    CHECK(std::abs(h - oracle::sampled_circle_distance(x[0], x[1], 0.5, 0.5, 0.15, 20000)) <= 1e-6);
    // The disk relation |x - c| = r0 + h.
    CHECK(torus_distance(x, {0.5, 0.5}) == doctest::Approx(0.15 + h).epsilon(1e-12));
    // The normal at theta(x) points from x toward the pocket.
    Point n = g.unit_normal(0, th);
    Point e = torus_displacement(x, th);
    CHECK(dot(n, (1.0 / norm(e)) * e) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("unit_normal") {
  auto g = disk_geometry();
  auto n = g.unit_normal(0, {0.65, 0.5});
  CHECK(n[0] == doctest::Approx(-1.0));
  CHECK(n[1] == doctest::Approx(0.0));
  CHECK_THROWS_AS(g.unit_normal(0, {0.7, 0.5}), NotOnBoundary);

  Geometry g1(1, {Pocket::interval(0.0, 0.2)});
  CHECK(g1.unit_normal(0, {0.2, 0.0})[0] == doctest::Approx(-1.0));
  CHECK(g1.unit_normal(0, {0.0, 0.0})[0] == doctest::Approx(1.0));
}

TEST_CASE("boundary_sample") {
  auto g = disk_geometry();
  auto p = g.boundary_sample(0, 0.0);
  CHECK(p[0] == doctest::Approx(0.65));
  CHECK(p[1] == doctest::Approx(0.5));

  RandomStream rng(21);
  const int n = 1000000;
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) {
    auto q = g.boundary_sample(0, rng.uniform());
    mx += q[0] - 0.5;
    my += q[1] - 0.5;
  }
  // Each coordinate has variance r0^2 / 2.
  double se = 0.15 / std::sqrt(2.0 * n);
  CHECK(std::abs(mx / n) <= 3 * se);
  CHECK(std::abs(my / n) <= 3 * se);

  const int m = 100000, bins = 16;
  std::vector<int> counts(bins, 0);
  for (int i = 0; i < m; ++i) {
    double u = g.boundary_parameter(0, g.boundary_sample(0, rng.uniform()));
    counts[static_cast<std::size_t>(std::min(bins - 1, static_cast<int>(u * bins)))]++;
  }
  double sd = oracle::binomial_sd(1.0 / bins, m);
  for (int c : counts) CHECK(std::abs(static_cast<double>(c) / m - 1.0 / bins) <= 4 * sd);

  Geometry g1(1, {Pocket::interval(0.0, 0.2)});
  CHECK(g1.boundary_sample(0, 0.25)[0] == doctest::Approx(0.2));
  CHECK(g1.boundary_sample(0, 0.75)[0] == doctest::Approx(0.0));
}

TEST_CASE("boundary_parameter inverts boundary_sample") {
  auto g = disk_geometry();
  for (double u : {0.0, 0.1, 0.37, 0.5, 0.93}) CHECK(g.boundary_parameter(0, g.boundary_sample(0, u)) == doctest::Approx(u));
}

TEST_CASE("classify") {
  Geometry g(2, {Pocket::disk(0.5, 0.5, 0.15)}, Pocket::disk(0.15, 0.15, 0.05));
  CHECK(g.classify({0.65, 0.5}, 0.02) == RegionTag{RegionKind::Boundary, 0});
  CHECK(g.classify({0.66, 0.5}, 0.02) == RegionTag{RegionKind::Shell, 0});
  CHECK(g.classify({0.64, 0.5}, 0.02) == RegionTag{RegionKind::Pocket, 0});
  CHECK(g.classify({0.5, 0.5}, 0.02) == RegionTag{RegionKind::Inner, 0});
  CHECK(g.classify({0.9, 0.9}, 0.02) == RegionTag{RegionKind::DeepU, -1});
  CHECK(g.classify({0.15, 0.16}, 0.02) == RegionTag{RegionKind::Target, -1});
  CHECK_THROWS_AS(g.classify({0.9, 0.9}, 0.08), DeltaTooLarge);
  CHECK_THROWS_AS(g.classify({0.9, 0.9}, 0.0), DeltaTooLarge);
}

TEST_CASE("classified region areas match the analytic values") {
  auto g = disk_geometry();
  const double delta = 0.02, r = 0.15;
  const int n = 1000000;
  RandomStream rng(17);
  std::array<int, kRegionKindCount> counts{};
  for (int i = 0; i < n; ++i) counts[static_cast<std::size_t>(g.classify({rng.uniform(), rng.uniform()}, delta).kind)]++;
  auto check = [&](RegionKind k, double area) {
    double f = static_cast<double>(counts[static_cast<std::size_t>(k)]) / n;
    CHECK(std::abs(f - area) <= 3 * oracle::binomial_sd(area, n));
  };
  const double pi = std::numbers::pi;
  check(RegionKind::Shell, 2 * pi * r * delta + pi * delta * delta);
  check(RegionKind::Inner, pi * (r - delta) * (r - delta));
  check(RegionKind::Pocket, pi * r * r - pi * (r - delta) * (r - delta));
  check(RegionKind::DeepU, 1.0 - pi * (r + delta) * (r + delta));
}

TEST_CASE("max_delta") {
  Geometry g(2, {Pocket::disk(0.3, 0.3, 0.1), Pocket::disk(0.7, 0.65, 0.12)});
  double gap = std::hypot(0.4, 0.35) - 0.22;
  CHECK(g.min_gap() == doctest::Approx(gap));
  CHECK(g.max_delta() == doctest::Approx(std::min(gap / 2, 0.05)));
}
