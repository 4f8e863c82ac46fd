#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pocketlab/errors.hpp"
#include "pocketlab/passage.hpp"
#include "pocketlab/sde.hpp"

using namespace pocketlab;

TEST_CASE("passage mean time matches the radial closed form") {
  // (1/2) r^{1-d} (r^{d-1} sigma u')' = -1 gives r^{d-1} sigma u' = -2 r^d / d, and
  // sigma = 1 beyond R, so u(R) = ((R + h)^2 - R^2) / d whatever the pocket does.
  for (int dim : {1, 2}) {
    for (double eps : {1e-2, 1e-4, 1e-6}) {
      const double R = 0.15, h = 0.005;
      PassageLaw law(dim, R, 1.0 / eps, h, 256);
      double exact = ((R + h) * (R + h) - R * R) / dim;
      CAPTURE(dim);
      CAPTURE(eps);
      CHECK(law.mean_time() == doctest::Approx(exact).epsilon(1e-6));
    }
  }
}

TEST_CASE("1D exit side follows the scale function") {
  // P(exit on the entry side) = (h + S) / (2h + S) with S = int_pocket dr / sigma.
  const double R = 0.1, h = 0.005;
  for (double eps : {1e-2, 1e-4}) {
    double c = 1.0 / eps;
    double S = oracle::simpson(
        [&](double r) {
          double q = 1.0 - r * r / (R * R);
          return 1.0 / (1.0 + c * q * q);
        },
        -R, R, 1e-13);
    PassageLaw law(1, R, c, h, 256);
    CHECK(law.same_side_probability() == doctest::Approx((h + S) / (2 * h + S)).epsilon(1e-8));
  }
}

TEST_CASE("2D angular coefficients match a shooting solution") {
  const double R = 0.15, h = 0.005;
  for (double eps : {1e-2, 1e-3}) {
    double c = 1.0 / eps;
    PassageLaw law(2, R, c, h, 256);
    const auto& phi = law.angle_coefficients();
    REQUIRE(phi.size() > 10);
    for (int m : {1, 2, 5, 10}) {
      CAPTURE(eps);
      CAPTURE(m);
      CHECK(phi[static_cast<std::size_t>(m - 1)] ==
            doctest::Approx(oracle::passage_angle_coefficient(R, c, h, m)).epsilon(2e-4));
    }
    for (std::size_t m = 1; m < phi.size(); ++m) CHECK(phi[m] <= phi[m - 1]);
  }
}

TEST_CASE("passage time distribution") {
  PassageLaw law(2, 0.15, 1e4, 0.005, 256);
  CHECK(law.time_cdf(0.0) == 0.0);
  CHECK(law.time_cdf(1e-9) < 1e-12);
  CHECK(law.time_cdf(1.0) == doctest::Approx(1.0));
  double prev = 0.0;
  for (double t = 1e-7; t < 1e-1; t *= 1.1) {
    double f = law.time_cdf(t);
    CHECK(f >= prev);
    prev = f;
  }
}

TEST_CASE("passage samples reproduce the law") {
  const int n = 200000;
  SUBCASE("1D") {
    PassageLaw law(1, 0.1, 1e4, 0.005, 256);
    RandomStream rng(3);
    double s = 0.0, s2 = 0.0;
    int same = 0;
    for (int i = 0; i < n; ++i) {
      auto p = law.sample(rng);
      s += p.time;
      s2 += p.time * p.time;
      same += p.side > 0;
    }
    double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
    CHECK(std::abs(mean - law.mean_time()) <= 4 * se);
    double p = law.same_side_probability();
    CHECK(std::abs(static_cast<double>(same) / n - p) <= 4 * oracle::binomial_sd(p, n));
  }
  SUBCASE("2D") {
    PassageLaw law(2, 0.15, 1e4, 0.005, 256);
    RandomStream rng(4);
    double s = 0.0, s2 = 0.0, c1 = 0.0, c3 = 0.0, sn = 0.0;
    for (int i = 0; i < n; ++i) {
      auto p = law.sample(rng);
      s += p.time;
      s2 += p.time * p.time;
      c1 += std::cos(p.angle);
      c3 += std::cos(3 * p.angle);
      sn += std::sin(p.angle);
    }
    double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
    CHECK(std::abs(mean - law.mean_time()) <= 4 * se);
    // |cos| <= 1, so 4 / sqrt(n) bounds four standard errors.
    CHECK(std::abs(c1 / n - law.angle_coefficients()[0]) <= 4.0 / std::sqrt(n));
    CHECK(std::abs(c3 / n - law.angle_coefficients()[2]) <= 4.0 / std::sqrt(n));
    CHECK(std::abs(sn / n) <= 4.0 / std::sqrt(n));
  }
}

TEST_CASE("passage law rejects bad input") {
  CHECK_THROWS_AS(PassageLaw(3, 0.1, 1e4, 0.005), ConfigError);
  CHECK_THROWS_AS(PassageLaw(2, 0.1, 1e4, 0.0), ConfigError);
  CHECK_THROWS_AS(PassageLaw(2, -0.1, 1e4, 0.005), ConfigError);
}
